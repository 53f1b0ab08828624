#pragma once

// Kolmogorov-Smirnov distances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "hbre/errors.hpp"

namespace hbre {

inline constexpr double kKsCoefficient95 = 1.358;

struct KsResult {
  double D = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;  // second sample size; 0 for one-sample tests
  double critical_95 = 0.0;

  bool passes(double tolerance) const { return D <= tolerance; }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"D", D}, {"n", n}, {"critical", critical_95}};
    if (m > 0) j["m"] = m;
    return j;
  }
};

/// One-sample statistic against a continuous cdf.
inline KsResult ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ValidationError("ks_statistic requires a nonempty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, x.size(), 0, kKsCoefficient95 / std::sqrt(n)};
}

/// Two-sample statistic sup |F_a - F_b|.
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample requires nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return {d, x.size(), y.size(), kKsCoefficient95 * std::sqrt((n + m) / (n * m))};
}

inline double uniform_cdf(double x) { return std::clamp(x, 0.0, 1.0); }
inline double exponential_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

/// Right-continuous empirical distribution function.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sample) : x_(std::move(sample)) {
    if (x_.empty()) throw ValidationError("empirical cdf requires a nonempty sample");
    std::sort(x_.begin(), x_.end());
  }
  double operator()(double v) const {
    return static_cast<double>(std::upper_bound(x_.begin(), x_.end(), v) - x_.begin()) /
           static_cast<double>(x_.size());
  }
  std::size_t size() const noexcept { return x_.size(); }

 private:
  std::vector<double> x_;
};

}  // namespace hbre
