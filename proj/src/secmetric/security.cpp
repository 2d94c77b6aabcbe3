#include "litechain/secmetric/security.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "litechain/core/types.hpp"

namespace litechain::secmetric {
namespace {

void check_reliabilities(std::span<const double> p) {
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error("reliability outside [0,1]");
  }
}

// Sum over all subsets of size exactly `left` drawn from p[from..], where the
// chosen members fail and the rest succeed. `acc` carries the product so far.
double enumerate(std::span<const double> p, std::size_t from, std::size_t left, double acc) {
  if (acc == 0.0) return 0.0;
  if (from == p.size()) return left == 0 ? acc : 0.0;
  if (p.size() - from < left) return 0.0;
  double s = 0.0;
  if (left > 0) s += enumerate(p, from + 1, left - 1, acc * (1.0 - p[from]));
  s += enumerate(p, from + 1, left, acc * p[from]);
  return s;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

constexpr double kMaxImaginaryResidue = 1e-8;

// P(failures <= budget) from the characteristic function sampled at the
// K + 1 roots of unity.
double poisson_binomial_cdf(std::span<const double> reliabilities, std::size_t budget) {
  const auto k = reliabilities.size();
  const double w = 2.0 * std::numbers::pi / static_cast<double>(k + 1);
  std::complex<double> total = 0.0;
  for (std::size_t l = 0; l <= k; ++l) {
    const auto z = std::polar(1.0, w * static_cast<double>(l));
    std::complex<double> prod = 1.0;
    for (double p : reliabilities) {
      const double q = 1.0 - p;
      prod *= (1.0 - q) + q * z;
    }
    std::complex<double> window = 0.0;
    for (std::size_t m = 0; m <= budget; ++m) {
      window += std::polar(1.0, -w * static_cast<double>(l * m % (k + 1)));
    }
    total += window * prod;
  }
  total /= static_cast<double>(k + 1);
  if (std::abs(total.imag()) > kMaxImaginaryResidue) throw Error("numerical instability");
  return clamp01(total.real());
}

}  // namespace

double security_enum(std::span<const double> reliabilities) {
  const auto k = reliabilities.size();
  if (k == 0) throw Error("empty committee");
  if (k > kEnumerationLimit) {
    throw Error("committee of " + std::to_string(k) +
                " exceeds the enumeration limit; use security_dft");
  }
  check_reliabilities(reliabilities);
  double s = 0.0;
  for (std::size_t m = 0; m <= fault_budget(k); ++m) s += enumerate(reliabilities, 0, m, 1.0);
  return clamp01(s);
}

double security_dft(std::span<const double> reliabilities, std::size_t budget) {
  const auto k = reliabilities.size();
  if (k == 0) throw Error("empty committee");
  check_reliabilities(reliabilities);
  // Members with p = 1 never fail and members with p = 0 always do; settle
  // them exactly and transform only the uncertain rest.
  std::vector<double> uncertain;
  std::size_t certain_failures = 0;
  for (double p : reliabilities) {
    if (p == 0.0) {
      ++certain_failures;
    } else if (p != 1.0) {
      uncertain.push_back(p);
    }
  }
  if (certain_failures > budget) return 0.0;
  budget -= certain_failures;
  if (budget >= uncertain.size()) return 1.0;
  return poisson_binomial_cdf(uncertain, budget);
}

double security_dft(std::span<const double> reliabilities) {
  return security_dft(reliabilities, fault_budget(reliabilities.size()));
}

SeatEvaluator::SeatEvaluator(std::span<const double> fixed) : k_(fixed.size() + 1) {
  check_reliabilities(fixed);
  const auto budget = fault_budget(k_);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(k_ + 1);
  base_.resize(k_ + 1);
  phase_.resize(k_ + 1);
  window_.resize(k_ + 1);
  for (std::size_t l = 0; l <= k_; ++l) {
    phase_[l] = std::polar(1.0, w * static_cast<double>(l));
    std::complex<double> prod = 1.0;
    for (double p : fixed) prod *= p + (1.0 - p) * phase_[l];
    base_[l] = prod;
    std::complex<double> win = 0.0;
    for (std::size_t m = 0; m <= budget; ++m) {
      win += std::polar(1.0, -w * static_cast<double>(l * m % (k_ + 1)));
    }
    window_[l] = win;
  }
}

double SeatEvaluator::with_candidate(double reliability) const {
  const double q = 1.0 - reliability;
  std::complex<double> total = 0.0;
  for (std::size_t l = 0; l <= k_; ++l) {
    total += window_[l] * base_[l] * (reliability + q * phase_[l]);
  }
  return clamp01(total.real() / static_cast<double>(k_ + 1));
}

}  // namespace litechain::secmetric
