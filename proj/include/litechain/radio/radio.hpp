#pragma once

// Link-rate, latency and communication-complexity model.
//
// Units: distances in metres, rates in bits/s, compute in float-ops/s, sizes
// in bytes (converted to bits wherever they cross a link). The serial
// broadcast term is theta seconds per `broadcast_unit_bytes` of payload per
// recipient.

#include <span>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain::radio {

struct ChannelParams {
  double bandwidth = 20e6;           // b, Hz
  double noise_power = 1e-13;        // sigma^2, W
  double antenna_gain = 4.11;        // A_d
  double carrier_freq = 915e6;       // f_c, Hz
  double pathloss_exp = 2.8;         // d_e
  double light_speed = 3e8;          // v^l, m/s
  double broadcast_coef = 0.5;       // theta, s per broadcast unit
  double broadcast_timeout = 300.0;  // s, per broadcast message
  double broadcast_unit_bytes = 1e6;

  void validate() const;
};

struct SizeProfile {
  double model_size = 25e6;   // Lambda^size, bytes
  double block_size = 2048;   // B^info, bytes
  double msg_size = 256;      // B^info', bytes
  double commit_cost = 1e6;   // B^com, flops
  double gen_cost = 1e6;      // B^gen, flops
  double train_cost = 1e9;    // Lambda^comp, flops per sample
  double agg_cost = 1.3e7;    // Lambda^agg, flops per aggregated model
  double verify_cost = 2e10;  // Lambda^veri, flops

  void validate() const;
};

/// Free-space gain A_d (v / (4 pi f_c d))^d_e. Throws "coincident devices" at d <= 0.
double channel_gain(double d, const ChannelParams& cp);

/// Shannon rate b log2(1 + p h / sigma^2) from `from` to `to`.
double comm_rate(const Device& from, const Device& to, const ChannelParams& cp);

/// Local computation plus upload to the committee member. The upload term is
/// zero when the device is its own committee member.
double train_latency(const Device& dev, const Device& head, const SizeProfile& sp,
                     const ChannelParams& cp);
/// Same with an explicit rate; throws "unreachable committee member" when rate <= 0.
double train_latency(std::size_t samples, double compute, double rate_bps,
                     const SizeProfile& sp);

/// The five terms of the blockchain verification latency, kept apart so that
/// callers can reconcile per-phase accounting.
struct VerifyLatency {
  double generate = 0.0;
  double broadcast = 0.0;
  double verify = 0.0;
  double commit = 0.0;
  double unicast = 0.0;

  double total() const { return generate + broadcast + verify + commit + unicast; }
};

/// Verification latency for a block requested by `requester` (a committee member).
VerifyLatency verify_latency(const Device& requester, std::span<const Device> committee,
                             const SizeProfile& sp, const ChannelParams& cp);

/// Pairwise link rates plus the latency formulas over them. Devices are
/// addressed by index into the vector the table was built from.
class LinkTable {
 public:
  LinkTable(std::span<const Device> devices, const ChannelParams& cp);
  /// Explicit rates (row = sender) for synthetic networks.
  LinkTable(std::span<const Device> devices, std::vector<std::vector<double>> rates,
            const ChannelParams& cp);

  std::size_t size() const { return compute_.size(); }
  double rate(std::size_t from, std::size_t to) const { return rates_[from][to]; }
  double compute(std::size_t i) const { return compute_[i]; }
  std::size_t samples(std::size_t i) const { return samples_[i]; }
  const ChannelParams& channel() const { return cp_; }

  double train_latency(std::size_t dev, std::size_t head, const SizeProfile& sp) const;
  VerifyLatency verify_latency(std::size_t requester, std::span<const std::size_t> committee,
                               const SizeProfile& sp) const;
  double aggregate_latency(std::size_t head, std::size_t cluster_size, const SizeProfile& sp) const;

 private:
  std::vector<std::vector<double>> rates_;
  std::vector<double> compute_;
  std::vector<std::size_t> samples_;
  ChannelParams cp_;
};

struct ClusterLatency {
  ClusterId cluster = 0;
  DeviceId head = 0;
  double train_max = 0.0;  // slowest member's training + upload
  double aggregate = 0.0;  // T^agg of the head
  VerifyLatency chain;     // T^bc of the head

  double total() const { return train_max + aggregate + chain.total(); }
};

struct RoundLatency {
  std::vector<double> per_device;  // in the order of the devices span
  std::vector<ClusterLatency> clusters;
  double max = 0.0;
};

/// Per-device round latency: the slowest cluster-mate's training plus the
/// committee member's aggregation and verification. Requires a feasible partition.
RoundLatency round_latency(const Partition& partition, std::span<const Device> devices,
                           const SizeProfile& sp, const ChannelParams& cp);
RoundLatency round_latency(const Partition& partition, std::span<const Device> devices,
                           const LinkTable& links, const SizeProfile& sp);

/// Expected bytes per training round for the one-tier and K-cluster networks.
template <typename T>
struct CommComplexity {
  T one_tier;
  T litechain;
  T reduction;
};

/// block_bytes is the expected broadcast-message size (B-bar).
template <typename T>
CommComplexity<T> comm_complexity(long n, long k, T model_bytes, T block_bytes) {
  if (n < 4) throw Error("communication complexity needs N >= 4");
  if (k < 4 || k > n) throw Error("communication complexity needs 4 <= K <= N");
  const T N(n), K(k);
  CommComplexity<T> c{
      (N * N - N) * model_bytes + (T(2) * N * N + N - T(2)) * block_bytes,
      T(2) * N * model_bytes / K + (T(2) * K * K + K - T(2)) * block_bytes,
      T(0)};
  c.reduction = c.one_tier - c.litechain;
  return c;
}

/// Closed-form reduction at K = 4, the largest over feasible K.
template <typename T>
T max_comm_reduction(long n, T model_bytes, T block_bytes) {
  if (n < 4) throw Error("communication complexity needs N >= 4");
  const T N(n);
  return model_bytes * (N * N - T(3) * N / T(2)) + block_bytes * (T(2) * N * N + N - T(36));
}

CommComplexity<double> comm_complexity(long n, long k, const SizeProfile& sp);

}  // namespace litechain::radio
