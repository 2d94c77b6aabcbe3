#include "litechain/core/types.hpp"

#include <cmath>
#include <set>

#include "litechain/core/serialize.hpp"

namespace litechain {

double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

void DatasetShard::push_back(const double* x, std::uint32_t label) {
  features.insert(features.end(), x, x + dim);
  labels.push_back(label);
}

void DatasetShard::validate(std::uint32_t num_classes) const {
  if (labels.empty()) throw Error("dataset shard is empty");
  if (features.size() != labels.size() * dim) {
    throw Error("dataset shard feature matrix does not match label count");
  }
  for (auto l : labels) {
    if (l >= num_classes) {
      throw Error("label " + std::to_string(l) + " out of range for " +
                  std::to_string(num_classes) + " classes");
    }
  }
}

void Device::validate() const {
  if (!(reliability >= 0.0 && reliability <= 1.0)) {
    throw Error("device " + std::to_string(id) + ": reliability outside [0,1]");
  }
  if (!(compute > 0.0)) throw Error("device " + std::to_string(id) + ": compute must be > 0");
  if (!(tx_power > 0.0)) throw Error("device " + std::to_string(id) + ": tx_power must be > 0");
  if (!(reputation >= 0.0)) throw Error("device " + std::to_string(id) + ": negative reputation");
}

std::vector<DeviceId> Partition::members(ClusterId k) const {
  std::vector<DeviceId> out;
  for (const auto& [d, c] : assignments) {
    if (c == k) out.push_back(d);
  }
  return out;
}

std::map<ClusterId, std::vector<DeviceId>> Partition::clusters() const {
  std::map<ClusterId, std::vector<DeviceId>> out;
  for (const auto& [d, c] : assignments) out[c].push_back(d);
  return out;
}

std::vector<DeviceId> Partition::committee_members() const {
  std::vector<DeviceId> out;
  out.reserve(committee.size());
  for (const auto& [k, d] : committee) out.push_back(d);
  return out;
}

ClusterId Partition::cluster_of(DeviceId d) const {
  auto it = assignments.find(d);
  if (it == assignments.end()) throw Error("device " + std::to_string(d) + " not in partition");
  return it->second;
}

bool Partition::is_committee(DeviceId d) const {
  auto it = assignments.find(d);
  if (it == assignments.end()) return false;
  auto h = committee.find(it->second);
  return h != committee.end() && h->second == d;
}

bool Partition::well_formed() const {
  const auto cl = clusters();
  if (cl.size() != committee.size()) return false;
  for (const auto& [k, head] : committee) {
    auto it = assignments.find(head);
    if (it == assignments.end() || it->second != k) return false;
    if (!cl.contains(k)) return false;
  }
  return true;
}

bool Partition::feasible() const {
  const auto k = num_clusters();
  return well_formed() && k >= 4 && k <= assignments.size();
}

Partition Partition::singletons(const std::vector<DeviceId>& ids) {
  Partition p;
  for (auto id : ids) {
    p.assignments[id] = id;
    p.committee[id] = id;
  }
  return p;
}

void ModelUpdate::seal() { identifier = canonical_hash(weights); }

void assign_roles(std::vector<Device>& devices, const Partition& p) {
  for (auto& d : devices) d.role = p.is_committee(d.id) ? Role::committee : Role::member;
}

}  // namespace litechain
