#pragma once

// Coalition-formation game that turns a flat device set into a two-tier
// partition. Players are devices; a switch moves one device into another
// existing cluster. The value of a cluster is u = S / T_k (committee security
// over the cluster's round latency) minus a penalty when the partition breaks
// the structural constraints (one cluster per device, one committee member per
// cluster, 4 <= K <= N).

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "litechain/core/types.hpp"
#include "litechain/radio/radio.hpp"

namespace litechain::clustering {

struct GameConfig {
  /// A cluster is a neighbour of device i when one of its members is reachable
  /// from i at >= this rate (bits/s). Zero makes every cluster a neighbour.
  double min_neighbor_rate = 0.0;
  /// PENALTY = penalty_factor x the largest utility observed so far.
  double penalty_factor = 1e6;
  /// Gains at or below gain_tolerance x |welfare| count as zero.
  double gain_tolerance = 1e-9;
  /// Safety cap on slots; 0 picks 50 N^2.
  std::size_t max_slots = 0;
};

struct SwitchOp {
  DeviceId device = 0;
  ClusterId from = 0;
  ClusterId to = 0;
  double gain = 0.0;
};

struct SlotTrace {
  std::size_t slot = 0;
  std::vector<SwitchOp> executed;
  double welfare = 0.0;  // after the slot
  Digest partition_hash{};
};

struct GameResult {
  Partition partition;
  std::vector<SlotTrace> trace;
  std::size_t slots = 0;
  double initial_welfare = 0.0;
  double welfare = 0.0;
};

struct Evaluation {
  double security = 0.0;
  std::map<ClusterId, double> latency;  // T_k
  std::map<ClusterId, double> value;    // v = u - c
  bool feasible = false;
  double welfare = 0.0;  // sum of v
};

/// Value, gain and election rules over a fixed device set. Partitions passed in
/// must cover exactly the model's devices.
class ValueModel {
 public:
  ValueModel(std::span<const Device> devices, const radio::LinkTable& links,
             const radio::SizeProfile& sizes, GameConfig config = {});
  ~ValueModel();
  ValueModel(const ValueModel&) = delete;
  ValueModel& operator=(const ValueModel&) = delete;

  /// Evaluate with the partition's committee as given.
  Evaluation evaluate(const Partition& p) const;
  double cluster_value(const Partition& p, ClusterId k) const;

  /// Head of cluster k maximizing u_k with every other head held fixed
  /// (ties: lowest device id).
  DeviceId elect(const Partition& p, ClusterId k) const;
  /// Re-elect every head in ascending cluster order.
  void reelect_all(Partition& p) const;

  /// Move op.device into op.to, drop an emptied cluster, re-elect the heads
  /// of both affected clusters (ascending id order).
  Partition apply(const Partition& p, const SwitchOp& op) const;
  /// Welfare change of the switch: the destination's marginal contribution
  /// with the device added, minus the source's marginal contribution, plus the
  /// induced change on every other cluster through the shared committee.
  double switch_gain(const Partition& p, DeviceId device, ClusterId to) const;

  /// Neighbour clusters of a device (excluding its own).
  std::vector<ClusterId> neighbors(const Partition& p, DeviceId device) const;
  /// Every single switch (to any other cluster) whose gain exceeds tolerance.
  std::vector<SwitchOp> nash_audit(const Partition& p) const;

  double penalty() const;
  double tolerance(double welfare) const;

  /// Replace device reliabilities (after reputation normalization).
  void set_reliabilities(const std::map<DeviceId, double>& reliability);

 private:
  friend GameResult run_game(std::span<const Device>, const radio::LinkTable&,
                             const radio::SizeProfile&, GameConfig);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Run the game from the all-singletons partition. Throws for N < 4 or when
/// the slot cap is hit.
GameResult run_game(std::span<const Device> devices, const radio::LinkTable& links,
                    const radio::SizeProfile& sizes, GameConfig config = {});

}  // namespace litechain::clustering
