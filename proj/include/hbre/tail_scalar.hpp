#pragma once

// Log-coordinate scalars.
//
// Iterated inverse generating functions shrink double-exponentially, so every
// quantity that can leave the binary64 range is carried as its natural log.
// The helpers below evaluate the few compound expressions we need
// (log(1 - e^-s), log(-log(1 - u)), ...) without cancellation or underflow.

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <numbers>
#include <span>

#include "hbre/errors.hpp"

namespace hbre {

namespace logmath {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this log-magnitude exp() of the argument is under 1e-304 and first
// order expansions are exact in binary64.
inline constexpr double kTinyLog = -700.0;

/// log(1 - e^{-s}) for s > 0.
inline double log1mexp(double s) {
  if (s <= 0.0) return -kInf;
  if (s <= std::numbers::ln2) return std::log(-std::expm1(-s));
  return std::log1p(-std::exp(-s));
}

/// log(1 - e^{-s}) where s = e^{log_s}.
inline double log1mexp_from_log(double log_s) {
  if (log_s < kTinyLog) return log_s - 0.5 * std::exp(log_s);
  return log1mexp(std::exp(log_s));
}

/// log(-log(1 - u)) where u = e^{log_u} in (0, 1].
inline double log_neg_log1m_exp(double log_u) {
  if (log_u >= 0.0) return kInf;
  if (log_u < kTinyLog) return log_u + 0.5 * std::exp(log_u);
  double neg_log;
  if (log_u < -std::numbers::ln2) {
    neg_log = -std::log1p(-std::exp(log_u));
  } else {
    neg_log = -std::log(-std::expm1(log_u));
  }
  return std::log(neg_log);
}

/// log(sum_i e^{x_i}).
inline double logsumexp(std::span<const double> xs) {
  double hi = -kInf;
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double logaddexp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace logmath

/// Positive quantity stored as its natural log. -inf encodes 0, +inf encodes infinity.
class TailScalar {
 public:
  constexpr TailScalar() = default;

  static constexpr TailScalar from_log(double log_value) { return TailScalar(log_value); }

  static TailScalar from_value(double value) {
    if (!(value >= 0.0)) throw DomainError("TailScalar requires a nonnegative value");
    return TailScalar(std::log(value));
  }

  static constexpr TailScalar zero() { return TailScalar(-logmath::kInf); }
  static constexpr TailScalar one() { return TailScalar(0.0); }

  constexpr double log() const noexcept { return log_value_; }
  double value() const noexcept { return std::exp(log_value_); }

  constexpr bool is_zero() const noexcept { return log_value_ == -logmath::kInf; }
  constexpr bool is_infinite() const noexcept { return log_value_ == logmath::kInf; }

  friend constexpr TailScalar operator*(TailScalar a, TailScalar b) {
    return TailScalar(a.log_value_ + b.log_value_);
  }
  friend constexpr TailScalar operator/(TailScalar a, TailScalar b) {
    return TailScalar(a.log_value_ - b.log_value_);
  }
  friend TailScalar operator+(TailScalar a, TailScalar b) {
    return TailScalar(logmath::logaddexp(a.log_value_, b.log_value_));
  }
  TailScalar pow(double exponent) const { return TailScalar(exponent * log_value_); }

  friend constexpr auto operator<=>(TailScalar a, TailScalar b) { return a.log_value_ <=> b.log_value_; }
  friend constexpr bool operator==(TailScalar a, TailScalar b) = default;

 private:
  constexpr explicit TailScalar(double log_value) : log_value_(log_value) {}

  double log_value_ = -logmath::kInf;
};

/// A point x in [0,1] represented through u = 1 - x, so that points
/// arbitrarily close to 1 keep full relative precision in 1 - x.
class ComplementCoord {
 public:
  constexpr ComplementCoord() = default;

  static ComplementCoord from_log(double log_u) {
    if (std::isnan(log_u) || log_u > 0.0) throw DomainError("complement coordinate requires log u <= 0");
    return ComplementCoord(TailScalar::from_log(log_u));
  }
  static ComplementCoord from_complement(TailScalar u) { return from_log(u.log()); }
  static ComplementCoord from_point(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("point must lie in [0,1]");
    return ComplementCoord(TailScalar::from_log(std::log1p(-x)));
  }
  /// The point e^{-s}: u = 1 - e^{-s}.
  static ComplementCoord from_neg_exp(TailScalar s) {
    return ComplementCoord(TailScalar::from_log(logmath::log1mexp_from_log(s.log())));
  }

  constexpr TailScalar u() const noexcept { return u_; }
  constexpr double log_u() const noexcept { return u_.log(); }

  /// x = 1 - u.
  double point() const noexcept { return -std::expm1(u_.log()); }

 private:
  constexpr explicit ComplementCoord(TailScalar u) : u_(u) {}

  TailScalar u_ = TailScalar::one();
};

}  // namespace hbre
