#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace litechain {

/// SplitMix64 step. Used for seeding and for deriving child stream keys.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic, splittable stream: xoshiro256** seeded through SplitMix64.
///
/// Every stream carries a fixed key derived from its seed (or from its
/// parent's key and a label). split() depends only on that key, never on how
/// many values have been drawn, so child streams are stable under changes to
/// the parent's consumption pattern.
///
/// All distributions are implemented here rather than taken from <random> so
/// that output is identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Gamma(shape, 1).
  double gamma(double shape);
  std::vector<double> dirichlet(double alpha, std::size_t n);

  template <typename T>
  void shuffle(std::span<T> xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key);

  std::uint64_t key_;
  std::uint64_t s_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace litechain
