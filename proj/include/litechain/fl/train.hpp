#pragma once

// Local training, off-chain verification, intra-cluster FedAvg and the
// staleness-aware inter-cluster aggregate.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "litechain/core/rng.hpp"
#include "litechain/core/types.hpp"
#include "litechain/fl/model.hpp"

namespace litechain::fl {

struct TrainConfig {
  double learning_rate = 0.001;
  /// Local SGD steps per round (Phi). 0 derives it from epochs.
  std::size_t steps = 0;
  std::size_t epochs = 1;
  std::size_t batch = 128;
};

/// Steps actually taken for a shard of `samples` rows.
std::size_t local_steps(const TrainConfig& cfg, std::size_t samples);

/// Phi mini-batch SGD steps from `start` on `shard`. Batches walk a
/// per-epoch shuffle drawn from `rng`. Throws "divergence at step i" on a
/// non-finite loss. The returned update is sealed with owner and round set.
ModelUpdate local_train(const ModelSpec& spec, std::span<const double> start, const DatasetShard& shard,
                        const TrainConfig& cfg, DeviceId owner, std::uint64_t round, Rng& rng);

struct Verdict {
  bool accepted = false;
  std::string reason;  // "signature" or "quality" when rejected
  double accuracy = 0.0;
};

/// Accepted iff the signature is valid and accuracy on `sample` is >= threshold.
Verdict offchain_verify(const ModelUpdate& update, const ModelSpec& spec, const DatasetShard& sample,
                        double threshold);

/// Data-size-weighted mean. Throws "empty aggregation" for no inputs.
std::vector<double> fedavg(std::span<const std::vector<double>> weights, std::span<const double> sizes);

/// Staleness weight s (t - tau + 1)^(-q).
double staleness_weight(double s, std::uint64_t t, std::uint64_t tau, double q = 0.5);

/// Running inter-cluster aggregate. Every cluster holds one term
/// (tau, weight, model); a fresh contribution replaces the cluster's term:
///   w = sum_k' s_k' w_k' - s_k(old) w_k(old) + s (t - tau + 1)^(-q) w_k(new).
/// All clusters start from the common initial model at weight s.
class StalenessAggregator {
 public:
  StalenessAggregator(std::vector<ClusterId> clusters, std::vector<double> init, double s, double q = 0.5);

  struct Term {
    std::uint64_t tau = 0;
    double weight = 0.0;
    std::vector<double> model;
  };

  /// Replace cluster k's term with `model` trained from version `tau`, at time
  /// `t` >= tau. Returns the new aggregate.
  const std::vector<double>& contribute(ClusterId k, std::uint64_t tau, std::vector<double> model,
                                        std::uint64_t t);

  const std::vector<double>& global() const { return sum_; }
  const Term& term(ClusterId k) const { return terms_.at(k); }
  double base() const { return s_; }

 private:
  std::map<ClusterId, Term> terms_;
  std::vector<double> sum_;
  double s_;
  double q_;
};

}  // namespace litechain::fl
