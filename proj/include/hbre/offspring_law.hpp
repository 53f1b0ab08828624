#pragma once

// Offspring distributions and the algebra of their generating functions.
//
// Two families are supported:
//   * Sibuya(alpha): f(s) = 1 - (1 - s)^alpha, alpha in (0,1). Infinite mean,
//     p_0 = 0, and every transform has a closed form.
//   * FinitePmf(p_0, ..., p_K): f(s) = sum_k p_k s^k. Transforms are evaluated
//     numerically, always in the coordinate that keeps relative precision
//     (1 - x for points near 1, log x for points near 0).
//
// Notation used below:
//   k(s) = -log f(e^{-s})          (generation-forward log transform)
//   h(s) = -log f^{-1}(e^{-s})     (its functional inverse)
//   Q(s) = f'(s)(1 - s)/(1 - f(s)) (regularity kernel, in [0,1) for valid laws)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "hbre/errors.hpp"
#include "hbre/root_finding.hpp"
#include "hbre/tail_scalar.hpp"

namespace hbre {

enum class Family { SibuyaLike, FinitePmf };

/// Whether construction enforces "no zero offspring" and "p_1 != 1".
/// Relaxed laws are for exploratory runs only; the limit theory does not cover them.
enum class AssumptionPolicy { Enforce, Relaxed };

class OffspringLaw {
 public:
  static constexpr double kWeightSumTolerance = 1e-12;
  static constexpr double kInverseRelTolerance = 1e-12;
  static constexpr int kInverseIterationCap = 200;

  static OffspringLaw sibuya(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha must be in (0,1), got " + std::to_string(alpha));
    }
    return OffspringLaw(Sibuya{alpha, boost::math::lgamma(1.0 - alpha)});
  }

  static OffspringLaw finite_pmf(std::vector<double> weights,
                                 AssumptionPolicy policy = AssumptionPolicy::Enforce) {
    if (weights.empty()) throw ValidationError("pmf weights must be nonempty");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("pmf weights must be finite and nonnegative");
      total += w;
    }
    if (std::fabs(total - 1.0) > kWeightSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "pmf weights must sum to 1 (sum = " << total << ")";
      throw ValidationError(msg.str());
    }
    while (weights.size() > 1 && weights.back() == 0.0) weights.pop_back();
    if (policy == AssumptionPolicy::Enforce) {
      if (weights[0] != 0.0) throw ValidationError("A1 violated: p_0 must be 0");
      if (weights.size() > 1 && weights[1] == 1.0) throw ValidationError("p_1=1: degenerate law rejected");
    }
    auto data = std::make_shared<Pmf>();
    data->weights = std::move(weights);
    const auto& p = data->weights;
    data->log_weights.resize(p.size());
    data->cdf.resize(p.size());
    double acc = 0.0;
    double mean = 0.0;
    data->first_positive = p.size();
    for (std::size_t k = 0; k < p.size(); ++k) {
      data->log_weights[k] = std::log(p[k]);
      acc += p[k];
      data->cdf[k] = acc;
      mean += static_cast<double>(k) * p[k];
      if (p[k] > 0.0 && data->first_positive == p.size()) data->first_positive = k;
    }
    data->cdf.back() = 1.0;
    data->mean = mean;
    return OffspringLaw(std::shared_ptr<const Pmf>(std::move(data)));
  }

  Family family() const noexcept {
    return std::holds_alternative<Sibuya>(rep_) ? Family::SibuyaLike : Family::FinitePmf;
  }

  /// Sibuya index. Throws for other families.
  double alpha() const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) return s->alpha;
    throw UnsupportedLaw("alpha() requires a Sibuya law");
  }

  /// Index of the one-sided stable law in whose domain of attraction the law lies.
  std::optional<double> stable_index() const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) return s->alpha;
    return std::nullopt;
  }

  std::span<const double> weights() const {
    if (auto* p = std::get_if<PmfPtr>(&rep_)) return (*p)->weights;
    throw UnsupportedLaw("weights() requires a finite pmf law");
  }

  std::span<const double> cdf() const {
    if (auto* p = std::get_if<PmfPtr>(&rep_)) return (*p)->cdf;
    throw UnsupportedLaw("cdf() requires a finite pmf law");
  }

  double p0() const noexcept {
    if (auto* p = std::get_if<PmfPtr>(&rep_)) return (*p)->weights[0];
    return 0.0;
  }

  bool satisfies_a1() const noexcept { return p0() == 0.0; }

  bool is_degenerate_identity() const noexcept {
    if (auto* p = std::get_if<PmfPtr>(&rep_)) return (*p)->weights.size() == 2 && (*p)->weights[1] == 1.0;
    return false;
  }

  /// m = f'(1-); +inf for Sibuya.
  double mean() const noexcept {
    if (std::holds_alternative<Sibuya>(rep_)) return logmath::kInf;
    return std::get<PmfPtr>(rep_)->mean;
  }

  /// P(X > n).
  double survival(std::uint64_t n) const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) {
      if (n == 0) return 1.0;
      return std::exp(sibuya_log_survival(s->alpha, s->lgamma_one_minus_alpha, static_cast<double>(n)));
    }
    const auto& cdf = std::get<PmfPtr>(rep_)->cdf;
    return n >= cdf.size() ? 0.0 : 1.0 - cdf[n];
  }

  /// P(X = k).
  double probability(std::uint64_t k) const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) {
      if (k == 0) return 0.0;
      return s->alpha / static_cast<double>(k) * survival(k - 1);
    }
    const auto& p = std::get<PmfPtr>(rep_)->weights;
    return k < p.size() ? p[k] : 0.0;
  }

  /// f(s) for s in [0,1].
  double pgf(double s) const {
    check_unit(s, "pgf");
    if (auto* sib = std::get_if<Sibuya>(&rep_)) {
      return -std::expm1(sib->alpha * std::log1p(-s));
    }
    const auto& p = std::get<PmfPtr>(rep_)->weights;
    double acc = 0.0;
    for (std::size_t k = p.size(); k-- > 0;) acc = acc * s + p[k];
    return acc;
  }

  /// 1 - f(1 - u), returned as a complement coordinate.
  ComplementCoord pgf_complement(ComplementCoord u) const {
    return ComplementCoord::from_log(log_pgf_complement(u.log_u()));
  }

  /// log(1 - f(1 - u)) from log u.
  double log_pgf_complement(double log_u) const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) return s->alpha * log_u;
    const Pmf& d = *std::get<PmfPtr>(rep_);
    if (log_u == -logmath::kInf) return log_u;
    if (log_u < logmath::kTinyLog) return log_u + std::log(d.mean);
    const double l1 = std::log1p(-std::exp(log_u));
    double acc = 0.0;
    for (std::size_t k = 1; k < d.weights.size(); ++k) {
      if (d.weights[k] == 0.0) continue;
      acc += d.weights[k] * -std::expm1(static_cast<double>(k) * l1);
    }
    return std::min(0.0, std::log(acc));
  }

  /// log f(x) from log x, accurate when x is far from 1.
  double log_pgf_from_log(double log_x) const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) {
      // log(1 - (1-x)^a) with (1-x)^a = exp(a log1p(-x)).
      const double x = std::exp(log_x);
      if (log_x < logmath::kTinyLog) return std::log(s->alpha) + log_x;
      return std::log(-std::expm1(s->alpha * std::log1p(-x)));
    }
    const Pmf& d = *std::get<PmfPtr>(rep_);
    double hi = -logmath::kInf;
    for (std::size_t k = 0; k < d.weights.size(); ++k) {
      if (d.weights[k] == 0.0) continue;
      hi = std::max(hi, d.log_weights[k] + static_cast<double>(k) * log_x);
    }
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (std::size_t k = 0; k < d.weights.size(); ++k) {
      if (d.weights[k] == 0.0) continue;
      acc += std::exp(d.log_weights[k] + static_cast<double>(k) * log_x - hi);
    }
    return hi + std::log(acc);
  }

  /// f'(s) for s in [0,1]. Throws UnboundedResult at s = 1 for infinite-mean laws.
  double pgf_derivative(double s) const {
    check_unit(s, "pgf_derivative");
    if (auto* sib = std::get_if<Sibuya>(&rep_)) {
      if (s == 1.0) throw UnboundedResult("f'(1-) is infinite for a Sibuya law");
      return sib->alpha * std::exp((sib->alpha - 1.0) * std::log1p(-s));
    }
    const auto& p = std::get<PmfPtr>(rep_)->weights;
    double acc = 0.0;
    for (std::size_t k = p.size(); k-- > 1;) acc = acc * s + static_cast<double>(k) * p[k];
    return acc;
  }

  /// f^{-1}(x) for x in [0,1).
  double inverse_pgf(double x) const {
    if (!(x >= 0.0 && x < 1.0)) throw DomainError("inverse_pgf requires x in [0,1)");
    if (auto* s = std::get_if<Sibuya>(&rep_)) return -std::expm1(std::log1p(-x) / s->alpha);
    if (x == 0.0 && satisfies_a1()) return 0.0;
    if (!satisfies_a1()) return inverse_pgf_plain(x);
    const double log_u = inverse_log_complement(std::log1p(-x));
    return -std::expm1(log_u);
  }

  /// Solves 1 - f(1 - u) = w for u, all in log coordinate: returns log u from log w.
  double inverse_log_complement(double log_w) const {
    if (std::isnan(log_w) || log_w > 0.0) throw DomainError("complement target must satisfy log w <= 0");
    if (auto* s = std::get_if<Sibuya>(&rep_)) return log_w / s->alpha;
    const Pmf& d = *std::get<PmfPtr>(rep_);
    if (log_w == -logmath::kInf) return log_w;
    if (!satisfies_a1()) {
      const double x = -std::expm1(log_w);
      return std::log1p(-inverse_pgf_plain(x));
    }
    if (log_w == 0.0) return 0.0;
    const double log_mean = std::log(d.mean);
    if (log_w < logmath::kTinyLog) return log_w - log_mean;
    // A1 gives u <= w <= m u.
    const double hi = log_w;
    const double lo = log_w - log_mean;
    if (!(lo < hi)) return hi;
    auto g = [&](double lu) { return log_pgf_complement(lu) - log_w; };
    return detail::solve_increasing(g, lo, hi, kInverseRelTolerance, kInverseIterationCap,
                                    "inverse pgf (complement)")
        .x;
  }

  /// Solves f(r) = e^{log_x} for log r, accurate for x far from 1.
  double inverse_log_pgf(double log_x) const {
    if (std::isnan(log_x) || log_x > 0.0) throw DomainError("inverse_log_pgf requires log x <= 0");
    if (log_x == 0.0) return 0.0;
    if (auto* s = std::get_if<Sibuya>(&rep_)) {
      // r = 1 - (1-x)^{1/a}
      if (log_x < logmath::kTinyLog) return log_x - std::log(s->alpha);
      return std::log(-std::expm1(std::log1p(-std::exp(log_x)) / s->alpha));
    }
    if (!satisfies_a1()) return std::log(inverse_pgf_plain(std::exp(log_x)));
    const Pmf& d = *std::get<PmfPtr>(rep_);
    const double k0 = static_cast<double>(d.first_positive);
    // f(r) <= r and f(r) >= p_k0 r^k0.
    const double lo = log_x;
    const double hi = std::min(0.0, (log_x - d.log_weights[d.first_positive]) / k0);
    if (!(lo < hi)) return lo;
    auto g = [&](double lr) { return log_pgf_from_log(lr) - log_x; };
    return detail::solve_increasing(g, lo, hi, kInverseRelTolerance, kInverseIterationCap,
                                    "inverse pgf (log)")
        .x;
  }

  /// k(s) = -log f(e^{-s}).
  TailScalar k_transform(TailScalar s) const {
    if (!(s.log() > -logmath::kInf)) throw DomainError("k_transform requires s > 0");
    const double log_s = s.log();
    if (auto* sib = std::get_if<Sibuya>(&rep_)) {
      // 1 - f(e^{-s}) = (1 - e^{-s})^a; e^{-s} underflows past the cutoff.
      if (log_s > kLogUnderflowCut) return TailScalar::from_value(std::exp(log_s) - std::log(sib->alpha));
      const double log_w = logmath::log1mexp_from_log(log_s);
      return TailScalar::from_log(logmath::log_neg_log1m_exp(sib->alpha * log_w));
    }
    if (log_s <= kLogLn2) {
      const double log_v = log_pgf_complement(logmath::log1mexp_from_log(log_s));
      if (log_v < -std::numbers::ln2) return TailScalar::from_log(logmath::log_neg_log1m_exp(log_v));
    }
    const double sv = std::exp(log_s);
    if (!std::isfinite(sv)) return TailScalar::from_log(logmath::kInf);
    return TailScalar::from_value(-log_pgf_from_log(-sv));
  }

  /// h(s) = -log f^{-1}(e^{-s}), the inverse of k.
  TailScalar h_transform(TailScalar s) const {
    if (!(s.log() > -logmath::kInf)) throw DomainError("h_transform requires s > 0");
    const double log_s = s.log();
    if (auto* sib = std::get_if<Sibuya>(&rep_)) {
      if (log_s > kLogUnderflowCut) return TailScalar::from_value(std::exp(log_s) + std::log(sib->alpha));
      const double log_w = logmath::log1mexp_from_log(log_s);
      return TailScalar::from_log(logmath::log_neg_log1m_exp(log_w / sib->alpha));
    }
    if (log_s <= kLogLn2) {
      const double log_u = inverse_log_complement(logmath::log1mexp_from_log(log_s));
      return TailScalar::from_log(logmath::log_neg_log1m_exp(log_u));
    }
    const double sv = std::exp(log_s);
    if (!std::isfinite(sv)) return TailScalar::from_log(logmath::kInf);
    return TailScalar::from_value(-inverse_log_pgf(-sv));
  }

  /// Q at the point 1 - u.
  double q_ratio(ComplementCoord u) const {
    if (auto* s = std::get_if<Sibuya>(&rep_)) return s->alpha;
    const Pmf& d = *std::get<PmfPtr>(rep_);
    const double log_u = u.log_u();
    if (log_u == -logmath::kInf) {
      throw DomainError("q_ratio requires s < 1");
    }
    const double log_den = log_pgf_complement(log_u);
    double log_num;
    if (log_u < logmath::kTinyLog) {
      log_num = std::log(d.mean) + log_u;
    } else {
      const double l1 = std::log1p(-std::exp(log_u));
      double deriv = 0.0;
      for (std::size_t k = 1; k < d.weights.size(); ++k) {
        if (d.weights[k] == 0.0) continue;
        const double pw = k == 1 ? 1.0 : std::exp(static_cast<double>(k - 1) * l1);
        deriv += static_cast<double>(k) * d.weights[k] * pw;
      }
      log_num = std::log(deriv) + log_u;
    }
    return std::exp(log_num - log_den);
  }

  double q_ratio(double s) const {
    if (!(s >= 0.0 && s < 1.0)) throw DomainError("q_ratio requires s in [0,1)");
    return q_ratio(ComplementCoord::from_point(s));
  }

  /// Short human-readable tag, e.g. "sibuya(0.5)".
  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    if (auto* s = std::get_if<Sibuya>(&rep_)) {
      os << "sibuya(" << s->alpha << ")";
    } else {
      os << "pmf(";
      const auto& p = std::get<PmfPtr>(rep_)->weights;
      for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << p[k];
      os << ")";
    }
    return os.str();
  }

  friend bool operator==(const OffspringLaw& a, const OffspringLaw& b) {
    if (a.family() != b.family()) return false;
    if (a.family() == Family::SibuyaLike) return a.alpha() == b.alpha();
    auto wa = a.weights();
    auto wb = b.weights();
    return std::equal(wa.begin(), wa.end(), wb.begin(), wb.end());
  }

  /// log P(X > n) for a Sibuya law; n >= 1 may exceed 2^53.
  static double sibuya_log_survival(double alpha, double lgamma_one_minus_alpha, double n) {
    // P(X > n) = Gamma(n+1-a) / (Gamma(1-a) Gamma(n+1)).
    return std::log(boost::math::tgamma_delta_ratio(n + 1.0 - alpha, alpha)) - lgamma_one_minus_alpha;
  }

  double lgamma_one_minus_alpha() const { return std::get<Sibuya>(rep_).lgamma_one_minus_alpha; }

 private:
  static constexpr double kLogLn2 = -0.36651292058166432;  // log(ln 2)
  static constexpr double kLogUnderflowCut = 6.5510803350434044;  // log(700)

  struct Sibuya {
    double alpha;
    double lgamma_one_minus_alpha;
  };
  struct Pmf {
    std::vector<double> weights;
    std::vector<double> log_weights;
    std::vector<double> cdf;
    double mean = 0.0;
    std::size_t first_positive = 0;
  };
  using PmfPtr = std::shared_ptr<const Pmf>;

  explicit OffspringLaw(Sibuya s) : rep_(s) {}
  explicit OffspringLaw(PmfPtr p) : rep_(std::move(p)) {}

  static void check_unit(double s, const char* what) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError(std::string(what) + " requires s in [0,1]");
  }

  // Plain bisection on [0,1]; only reached for relaxed laws with p_0 > 0.
  double inverse_pgf_plain(double x) const {
    const double f0 = pgf(0.0);
    if (x < f0) throw DomainError("inverse_pgf: x below f(0)");
    if (x == f0) return 0.0;
    auto g = [&](double r) { return pgf(r) - x; };
    return detail::solve_increasing(g, 0.0, 1.0, kInverseRelTolerance, kInverseIterationCap,
                                    "inverse pgf (plain)")
        .x;
  }

  std::variant<Sibuya, PmfPtr> rep_;
};

}  // namespace hbre
