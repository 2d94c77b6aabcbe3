#include "litechain/fl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "litechain/core/serialize.hpp"

namespace litechain::fl {

std::size_t local_steps(const TrainConfig& cfg, std::size_t samples) {
  if (cfg.steps > 0) return cfg.steps;
  if (cfg.batch == 0) throw Error("batch size must be >= 1");
  const std::size_t per_epoch = (samples + cfg.batch - 1) / cfg.batch;
  return std::max<std::size_t>(1, cfg.epochs * per_epoch);
}

ModelUpdate local_train(const ModelSpec& spec, std::span<const double> start, const DatasetShard& shard,
                        const TrainConfig& cfg, DeviceId owner, std::uint64_t round, Rng& rng) {
  if (shard.size() == 0) throw Error("local training on an empty shard");
  if (cfg.batch == 0) throw Error("batch size must be >= 1");
  const std::size_t steps = local_steps(cfg, shard.size());
  const std::size_t batch = std::min(cfg.batch, shard.size());

  ModelUpdate u;
  u.weights.assign(start.begin(), start.end());
  u.owner = owner;
  u.round = round;
  u.local_steps = static_cast<std::uint32_t>(steps);

  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<double> grad(u.weights.size());
  std::vector<std::size_t> rows;
  for (std::size_t step = 0; step < steps; ++step) {
    rows.clear();
    while (rows.size() < batch) {
      if (cursor == order.size()) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    const double l = loss_and_grad(spec, u.weights, shard, rows, grad);
    if (!std::isfinite(l)) throw Error("divergence at step " + std::to_string(step));
    for (std::size_t i = 0; i < grad.size(); ++i) u.weights[i] -= cfg.learning_rate * grad[i];
  }
  for (std::size_t i = 0; i < u.weights.size(); ++i) {
    if (!std::isfinite(u.weights[i])) throw Error("divergence at step " + std::to_string(steps - 1));
  }
  u.seal();
  return u;
}

Verdict offchain_verify(const ModelUpdate& update, const ModelSpec& spec, const DatasetShard& sample,
                        double threshold) {
  Verdict v;
  if (!update.signature_valid) {
    v.reason = "signature";
    return v;
  }
  v.accuracy = accuracy(spec, update.weights, sample);
  v.accepted = v.accuracy >= threshold;
  if (!v.accepted) v.reason = "quality";
  return v;
}

std::vector<double> fedavg(std::span<const std::vector<double>> weights, std::span<const double> sizes) {
  if (weights.empty()) throw Error("empty aggregation");
  if (weights.size() != sizes.size()) throw Error("fedavg needs one size per model");
  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  if (!(total > 0.0)) throw Error("fedavg sizes must be positive");
  std::vector<double> out(weights.front().size(), 0.0);
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m].size() != out.size()) throw Error("fedavg models differ in size");
    const double f = sizes[m] / total;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += f * weights[m][i];
  }
  return out;
}

double staleness_weight(double s, std::uint64_t t, std::uint64_t tau, double q) {
  if (t < tau) throw Error("staleness needs t >= tau");
  return s * std::pow(static_cast<double>(t - tau + 1), -q);
}

StalenessAggregator::StalenessAggregator(std::vector<ClusterId> clusters, std::vector<double> init, double s,
                                         double q)
    : sum_(init.size(), 0.0), s_(s), q_(q) {
  if (clusters.empty()) throw Error("staleness aggregator needs at least one cluster");
  if (!(s > 0.0)) throw Error("staleness base must be > 0");
  for (auto k : clusters) {
    if (!terms_.emplace(k, Term{0, s, init}).second) throw Error("duplicate cluster id");
    for (std::size_t i = 0; i < init.size(); ++i) sum_[i] += s * init[i];
  }
}

const std::vector<double>& StalenessAggregator::contribute(ClusterId k, std::uint64_t tau, std::vector<double> model,
                                                           std::uint64_t t) {
  auto& term = terms_.at(k);
  if (model.size() != sum_.size()) throw Error("aggregated model has the wrong size");
  const double w = staleness_weight(s_, t, tau, q_);
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += w * model[i] - term.weight * term.model[i];
  term = Term{tau, w, std::move(model)};
  return sum_;
}

}  // namespace litechain::fl
