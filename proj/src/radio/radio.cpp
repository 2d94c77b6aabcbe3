#include "litechain/radio/radio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace litechain::radio {

void ChannelParams::validate() const {
  const double xs[] = {bandwidth,    noise_power,    antenna_gain,      carrier_freq,        pathloss_exp,
                       light_speed,  broadcast_coef, broadcast_timeout, broadcast_unit_bytes};
  for (double x : xs) {
    if (!(x > 0.0)) throw Error("channel parameters must be strictly positive");
  }
  if (pathloss_exp < 2.0) throw Error("path-loss exponent must be >= 2");
}

void SizeProfile::validate() const {
  const double xs[] = {model_size, block_size, msg_size,  commit_cost,
                       gen_cost,   train_cost, agg_cost, verify_cost};
  for (double x : xs) {
    if (!(x >= 0.0)) throw Error("size profile entries must be non-negative");
  }
  if (msg_size > block_size) throw Error("message size exceeds block size");
}

double channel_gain(double d, const ChannelParams& cp) {
  if (!(d > 0.0)) throw Error("coincident devices");
  return cp.antenna_gain *
         std::pow(cp.light_speed / (4.0 * std::numbers::pi * cp.carrier_freq * d), cp.pathloss_exp);
}

double comm_rate(const Device& from, const Device& to, const ChannelParams& cp) {
  const double h = channel_gain(distance(from.position, to.position), cp);
  return cp.bandwidth * std::log2(1.0 + from.tx_power * h / cp.noise_power);
}

double train_latency(std::size_t samples, double compute, double rate_bps, const SizeProfile& sp) {
  if (!(rate_bps > 0.0)) throw Error("unreachable committee member");
  return sp.train_cost * static_cast<double>(samples) / compute + 8.0 * sp.model_size / rate_bps;
}

double train_latency(const Device& dev, const Device& head, const SizeProfile& sp,
                     const ChannelParams& cp) {
  if (dev.id == head.id) {
    return sp.train_cost * static_cast<double>(dev.dataset.size()) / dev.compute;
  }
  return train_latency(dev.dataset.size(), dev.compute, comm_rate(dev, head, cp), sp);
}

namespace {

void check_committee_size(std::size_t k) {
  if (k < 4) throw Error("BFT minimum violated: committee of " + std::to_string(k));
}

double broadcast_term(std::size_t k, const SizeProfile& sp, const ChannelParams& cp) {
  return cp.broadcast_coef * static_cast<double>(k - 1) *
         (sp.block_size + sp.model_size + 2.0 * sp.msg_size) / cp.broadcast_unit_bytes;
}

}  // namespace

VerifyLatency verify_latency(const Device& requester, std::span<const Device> committee,
                             const SizeProfile& sp, const ChannelParams& cp) {
  check_committee_size(committee.size());
  VerifyLatency v;
  v.generate = sp.gen_cost / requester.compute;
  v.broadcast = broadcast_term(committee.size(), sp, cp);
  for (const auto& m : committee) {
    v.commit = std::max(v.commit, sp.commit_cost / m.compute);
    if (m.id == requester.id) continue;
    v.verify = std::max(v.verify, sp.verify_cost / m.compute);
    v.unicast = std::max(v.unicast, 8.0 * sp.msg_size / comm_rate(m, requester, cp));
  }
  return v;
}

LinkTable::LinkTable(std::span<const Device> devices, const ChannelParams& cp) : cp_(cp) {
  const auto n = devices.size();
  rates_.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    compute_.push_back(devices[i].compute);
    samples_.push_back(devices[i].dataset.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) rates_[i][j] = comm_rate(devices[i], devices[j], cp);
    }
  }
}

LinkTable::LinkTable(std::span<const Device> devices, std::vector<std::vector<double>> rates,
                     const ChannelParams& cp)
    : rates_(std::move(rates)), cp_(cp) {
  if (rates_.size() != devices.size()) throw Error("rate matrix does not match device count");
  for (const auto& d : devices) {
    compute_.push_back(d.compute);
    samples_.push_back(d.dataset.size());
  }
}

double LinkTable::train_latency(std::size_t dev, std::size_t head, const SizeProfile& sp) const {
  if (dev == head) return sp.train_cost * static_cast<double>(samples_[dev]) / compute_[dev];
  return radio::train_latency(samples_[dev], compute_[dev], rates_[dev][head], sp);
}

VerifyLatency LinkTable::verify_latency(std::size_t requester, std::span<const std::size_t> committee,
                                        const SizeProfile& sp) const {
  check_committee_size(committee.size());
  VerifyLatency v;
  v.generate = sp.gen_cost / compute_[requester];
  v.broadcast = broadcast_term(committee.size(), sp, cp_);
  for (auto m : committee) {
    v.commit = std::max(v.commit, sp.commit_cost / compute_[m]);
    if (m == requester) continue;
    v.verify = std::max(v.verify, sp.verify_cost / compute_[m]);
    const double r = rates_[m][requester];
    if (!(r > 0.0)) throw Error("unreachable committee member");
    v.unicast = std::max(v.unicast, 8.0 * sp.msg_size / r);
  }
  return v;
}

double LinkTable::aggregate_latency(std::size_t head, std::size_t cluster_size,
                                    const SizeProfile& sp) const {
  return sp.agg_cost * static_cast<double>(cluster_size) / compute_[head];
}

RoundLatency round_latency(const Partition& partition, std::span<const Device> devices,
                           const LinkTable& links, const SizeProfile& sp) {
  if (!partition.feasible()) throw Error("round latency needs a feasible partition");
  std::unordered_map<DeviceId, std::size_t> index;
  for (std::size_t i = 0; i < devices.size(); ++i) index[devices[i].id] = i;
  auto idx = [&](DeviceId d) {
    auto it = index.find(d);
    if (it == index.end()) throw Error("partition references unknown device " + std::to_string(d));
    return it->second;
  };

  std::vector<std::size_t> committee;
  for (const auto& [k, head] : partition.committee) committee.push_back(idx(head));

  RoundLatency out;
  out.per_device.assign(devices.size(), 0.0);
  for (const auto& [k, members] : partition.clusters()) {
    ClusterLatency cl;
    cl.cluster = k;
    cl.head = partition.committee.at(k);
    const auto head = idx(cl.head);
    for (auto m : members) cl.train_max = std::max(cl.train_max, links.train_latency(idx(m), head, sp));
    cl.aggregate = links.aggregate_latency(head, members.size(), sp);
    cl.chain = links.verify_latency(head, committee, sp);
    for (auto m : members) out.per_device[idx(m)] = cl.total();
    out.max = std::max(out.max, cl.total());
    out.clusters.push_back(cl);
  }
  return out;
}

RoundLatency round_latency(const Partition& partition, std::span<const Device> devices,
                           const SizeProfile& sp, const ChannelParams& cp) {
  return round_latency(partition, devices, LinkTable(devices, cp), sp);
}

CommComplexity<double> comm_complexity(long n, long k, const SizeProfile& sp) {
  return comm_complexity<double>(n, k, sp.model_size, sp.block_size);
}

}  // namespace litechain::radio
