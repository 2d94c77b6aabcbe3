#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace litechain {

using DeviceId = std::uint32_t;
using ClusterId = std::uint32_t;
using Digest = std::array<std::uint8_t, 32>;

/// Base error for every module. Messages are meant to be shown to a user as is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

double distance(const Position& a, const Position& b);

/// Row-major |D| x dim feature matrix with one label per row.
struct DatasetShard {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * dim; }
  void push_back(const double* x, std::uint32_t label);

  /// Throws unless size >= 1, features match dim and all labels < num_classes.
  void validate(std::uint32_t num_classes) const;

  friend bool operator==(const DatasetShard&, const DatasetShard&) = default;
};

enum class Role : std::uint8_t { member = 0, committee = 1 };

struct Device {
  DeviceId id = 0;
  Position position;
  double compute = 1.0;   // float ops per second
  double tx_power = 1.0;  // watts
  DatasetShard dataset;
  double reliability = 1.0;  // probability of behaving honestly in consensus
  double reputation = 0.0;   // raw score reliability is normalized from
  Role role = Role::member;

  void validate() const;

  friend bool operator==(const Device&, const Device&) = default;
};

/// Cluster assignment plus one committee member per cluster.
struct Partition {
  std::map<DeviceId, ClusterId> assignments;
  std::map<ClusterId, DeviceId> committee;

  std::size_t num_clusters() const { return committee.size(); }
  std::vector<DeviceId> members(ClusterId k) const;
  std::map<ClusterId, std::vector<DeviceId>> clusters() const;
  std::vector<DeviceId> committee_members() const;
  ClusterId cluster_of(DeviceId d) const;
  bool is_committee(DeviceId d) const;

  /// Every device in exactly one cluster, every cluster has exactly one head
  /// drawn from its own members, and no empty clusters.
  bool well_formed() const;
  /// well_formed() and 4 <= K <= N.
  bool feasible() const;

  static Partition singletons(const std::vector<DeviceId>& ids);

  friend bool operator==(const Partition&, const Partition&) = default;
};

struct ModelUpdate {
  std::vector<double> weights;
  std::uint32_t owner = 0;
  std::uint64_t round = 0;
  std::uint32_t local_steps = 0;
  Digest identifier{};
  bool signature_valid = true;

  /// Recompute identifier from the weights.
  void seal();

  friend bool operator==(const ModelUpdate&, const ModelUpdate&) = default;
};

/// Apply Role::committee to heads of `p` and Role::member to everyone else.
void assign_roles(std::vector<Device>& devices, const Partition& p);

}  // namespace litechain
