#pragma once

// Consensus security: the probability that a committee with independent
// per-member reliabilities p_j suffers at most floor((K-1)/3) failures, where
// member j fails with probability 1 - p_j.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace litechain::secmetric {

inline constexpr std::size_t kEnumerationLimit = 25;

/// Largest number of failed members a committee of size k tolerates.
constexpr std::size_t fault_budget(std::size_t k) { return k == 0 ? 0 : (k - 1) / 3; }

/// Exact value by summing over every failure subset of size <= budget.
/// Throws for committees larger than kEnumerationLimit.
double security_enum(std::span<const double> reliabilities);

/// Poisson-binomial CDF P(failures <= budget) via the discrete Fourier
/// transform of the characteristic function. One O(K^2) pass.
double security_dft(std::span<const double> reliabilities, std::size_t budget);
double security_dft(std::span<const double> reliabilities);

/// Incremental evaluation for "the committee minus one seat plus candidate j"
/// queries: the fixed members' characteristic-function products are computed
/// once, after which each candidate costs O(K).
class SeatEvaluator {
 public:
  /// `fixed` are the reliabilities of the members that stay; the committee
  /// size evaluated is fixed.size() + 1.
  explicit SeatEvaluator(std::span<const double> fixed);

  double with_candidate(double reliability) const;

 private:
  std::size_t k_;
  std::vector<std::complex<double>> base_;   // product over fixed members, per frequency
  std::vector<std::complex<double>> phase_;  // e^{i w l}
  std::vector<std::complex<double>> window_; // sum_{M<=budget} e^{-i w l M}
};

}  // namespace litechain::secmetric
