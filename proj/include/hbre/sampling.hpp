#pragma once

// Exact offspring draws and one-sided stable variates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/random/binomial_distribution.hpp>

#include "hbre/errors.hpp"
#include "hbre/offspring_law.hpp"
#include "hbre/rng.hpp"

namespace hbre {

using BigCount = boost::multiprecision::cpp_int;

/// Natural log of a nonnegative big integer (-inf for 0).
inline double log_of(const BigCount& c) {
  if (c.is_zero()) return -logmath::kInf;
  const auto& b = c.backend();
  const std::size_t n = b.size();
  if (n <= 2) return std::log(c.convert_to<double>());
  const auto* limbs = b.limbs();
  const double top = static_cast<double>(limbs[n - 1]) * 0x1.0p64 + static_cast<double>(limbs[n - 2]);
  return std::log(top) + static_cast<double>(64 * (n - 2)) * std::numbers::ln2;
}

/// Nearest representable integer with 53 significant bits to e^{log_n}.
inline BigCount big_from_log(double log_n) {
  if (!std::isfinite(log_n)) throw DomainError("big_from_log requires a finite log");
  if (log_n < 36.0) return BigCount(static_cast<std::uint64_t>(std::llround(std::exp(log_n))));
  const double e2 = log_n / std::numbers::ln2;
  const auto shift = static_cast<long>(std::floor(e2)) - 52;
  const auto mantissa = static_cast<std::uint64_t>(std::llround(std::exp2(e2 - static_cast<double>(shift))));
  return BigCount(mantissa) << shift;
}

/// One offspring draw. Values above 2^53 are carried by their log, since a
/// binary64 uniform cannot resolve individual integers that far into the tail.
struct OffspringDraw {
  std::uint64_t value = 0;
  double log_value = 0.0;
  bool huge = false;
};

/// Sum of many draws: small values exactly, values beyond 2^53 as big integers.
struct DrawSum {
  unsigned __int128 small = 0;
  BigCount huge = 0;

  void add(const OffspringDraw& d) {
    if (d.huge) {
      huge += big_from_log(d.log_value);
    } else {
      small += d.value;
    }
  }
  BigCount total() const {
    BigCount t = (BigCount(static_cast<std::uint64_t>(small >> 64)) << 64) +
                 BigCount(static_cast<std::uint64_t>(small));
    return t + huge;
  }
};

/// Inverse-CDF sampler for one law.
///
/// Sibuya laws use a table of P(X > n) for n <= table_size and, beyond it, an
/// asymptotic guess for min{n : P(X > n) < V} corrected by exact evaluation of
/// P(X > n) = Gamma(n+1-a) / (Gamma(1-a) Gamma(n+1)).
///
/// Large batches are split by category first: for Sibuya the hazard
/// P(X = k | X >= k) is a/k, so the count landing on k is binomial given the
/// number still undecided. The batch switches to single draws conditioned on
/// X >= k once few draws remain.
class OffspringSampler {
 public:
  static constexpr std::size_t kDefaultTable = 4096;
  static constexpr double kExactLimit = 9007199254740992.0;  // 2^53

  explicit OffspringSampler(const OffspringLaw& law, std::size_t table_size = kDefaultTable) : law_(law) {
    if (law.family() == Family::SibuyaLike) {
      alpha_ = law.alpha();
      lgamma_1ma_ = law.lgamma_one_minus_alpha();
      survival_.resize(std::max<std::size_t>(table_size, 64) + 1);
      survival_[0] = 1.0;
      for (std::size_t n = 1; n < survival_.size(); ++n) {
        survival_[n] = survival_[n - 1] * (1.0 - alpha_ / static_cast<double>(n));
      }
    }
  }

  OffspringDraw draw(RandomStream& rng) const {
    if (law_.family() == Family::FinitePmf) {
      const double u = rng.uniform();
      auto cdf = law_.cdf();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto k = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
      return {k, 0.0, false};
    }
    return draw_from(1, rng.uniform_pos());
  }

  /// Sum of n independent draws.
  DrawSum sum(std::uint64_t n, RandomStream& rng) const {
    DrawSum out;
    if (law_.family() == Family::FinitePmf) {
      sum_pmf(n, rng, out);
      return out;
    }
    const std::size_t table = survival_.size() - 1;
    std::uint64_t remaining = n;
    std::size_t k = 1;
    for (; k <= table && remaining > 0; ++k) {
      if (remaining < (table - k + 1) / 8) break;
      const double hazard = alpha_ / static_cast<double>(k);
      boost::random::binomial_distribution<std::int64_t, double> bin(static_cast<std::int64_t>(remaining), hazard);
      const auto m = static_cast<std::uint64_t>(bin(rng));
      out.small += static_cast<unsigned __int128>(m) * k;
      remaining -= m;
    }
    // the rest are conditioned on X >= k
    const double scale = survival_[k - 1];
    for (std::uint64_t i = 0; i < remaining; ++i) out.add(draw_from(k, scale * rng.uniform_pos()));
    return out;
  }

  /// log P(X > n) for a Sibuya law, n >= 64, from the Stirling series of the
  /// difference lgamma(n+1-a) - lgamma(n+1) arranged to avoid cancellation.
  static double log_survival_large(double alpha, double lgamma_one_minus_alpha, double n) {
    const double z0 = n + 1.0;
    const double z1 = z0 - alpha;
    const double i0 = 1.0 / z0;
    const double i1 = 1.0 / z1;
    const double i0_3 = i0 * i0 * i0;
    const double i1_3 = i1 * i1 * i1;
    const double d = (z1 - 0.5) * std::log1p(-alpha * i0) - alpha * std::log(z0) + alpha +
                     alpha * i0 * i1 / 12.0 - (i1_3 - i0_3) / 360.0 + (i1_3 * i1 * i1 - i0_3 * i0 * i0) / 1260.0;
    return d - lgamma_one_minus_alpha;
  }

 private:
  // min{n >= first : P(X > n) < v}, given v <= P(X > first - 1).
  OffspringDraw draw_from(std::size_t first, double v) const {
    if (v > survival_.back()) {
      const auto it = std::partition_point(survival_.begin() + static_cast<std::ptrdiff_t>(first), survival_.end(),
                                           [v](double s) { return s >= v; });
      return {static_cast<std::uint64_t>(it - survival_.begin()), 0.0, false};
    }
    return tail_draw(v);
  }

  double log_survival(double n) const { return log_survival_large(alpha_, lgamma_1ma_, n); }

  OffspringDraw tail_draw(double v) const {
    const double log_v = std::log(v);
    // P(X > n) ~ (n + (1-a)/2)^{-a} / Gamma(1-a)
    const double log_guess = -(log_v + lgamma_1ma_) / alpha_;
    if (log_guess > std::log(kExactLimit)) return {0, log_guess, true};
    const double first = static_cast<double>(survival_.size());
    double n = std::max(first, std::ceil(std::exp(log_guess) - 0.5 * (1.0 - alpha_)));
    // The guess is off by O(1); the caps only bind where binary64 cannot
    // separate neighbouring survival values anyway.
    for (int i = 0; i < 64 && log_survival(n) >= log_v; ++i) n += 1.0;
    for (int i = 0; i < 64 && n > first && log_survival(n - 1.0) < log_v; ++i) n -= 1.0;
    return {static_cast<std::uint64_t>(n), 0.0, false};
  }

  void sum_pmf(std::uint64_t n, RandomStream& rng, DrawSum& out) const {
    auto w = law_.weights();
    if (n < 4 * w.size()) {
      for (std::uint64_t i = 0; i < n; ++i) out.small += draw(rng).value;
      return;
    }
    std::uint64_t remaining = n;
    double mass_left = 1.0;
    for (std::size_t k = 0; k < w.size() && remaining > 0; ++k) {
      if (w[k] <= 0.0) continue;
      std::uint64_t m = remaining;
      if (k + 1 < w.size() && w[k] < mass_left) {
        boost::random::binomial_distribution<std::int64_t, double> bin(static_cast<std::int64_t>(remaining),
                                                                      std::min(1.0, w[k] / mass_left));
        m = static_cast<std::uint64_t>(bin(rng));
      }
      out.small += static_cast<unsigned __int128>(m) * k;
      remaining -= m;
      mass_left -= w[k];
    }
  }

  OffspringLaw law_;
  double alpha_ = 0.0;
  double lgamma_1ma_ = 0.0;
  std::vector<double> survival_;
};

/// One exact draw from the offspring law.
inline BigCount sample_offspring(const OffspringLaw& law, RandomStream& rng) {
  const OffspringSampler sampler(law, 64);
  const auto d = sampler.draw(rng);
  return d.huge ? big_from_log(d.log_value) : BigCount(d.value);
}

/// log S where S > 0 has Laplace transform E exp(-lambda S) = exp(-lambda^alpha), alpha in (0,1).
///
/// Kanter's representation: with U ~ Uniform(0, pi) and E ~ Exp(1),
///   S = sin(alpha U) / sin(U)^{1/alpha} * (sin((1-alpha) U) / E)^{(1-alpha)/alpha}.
inline double sample_log_positive_stable(double alpha, RandomStream& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UnsupportedLaw("stable index must lie in (0,1)");
  const double u = std::numbers::pi * rng.uniform_open();
  const double e = rng.exponential();
  const double r = (1.0 - alpha) / alpha;
  return std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha +
         r * (std::log(std::sin((1.0 - alpha) * u)) - std::log(e));
}

}  // namespace hbre
