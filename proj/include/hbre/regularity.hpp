#pragma once

// Regular / irregular classification of points and processes.
//
// Two independent pieces of evidence are combined:
//   * the Q-product  sum_i log Q_{xi_i}(e^{-h_{i+1}(xi, s)}), which diverges to
//     -inf exactly at regular points;
//   * the ratios h_n(xi, t) / h_n(xi, s) for t < s, which vanish at regular
//     points and settle at a positive level at irregular ones.
// An Irregular verdict is only ever issued from the ratios.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbre/composition.hpp"
#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/tail_scalar.hpp"

namespace hbre {

enum class Verdict { Regular, Irregular, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Regular: return "regular";
    case Verdict::Irregular: return "irregular";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassifyConfig {
  std::size_t n_max = 200;
  double regular_threshold = -40.0;
  std::vector<double> ratio_grid = {0.25, 0.5, 0.75};  // fractions t/s
  std::size_t slope_window = 10;
  double slope_tol = 1e-3;

  nlohmann::json to_json() const {
    return {{"n_max", n_max},           {"regular_threshold", regular_threshold}, {"ratio_grid", ratio_grid},
            {"slope_window", slope_window}, {"slope_tol", slope_tol}};
  }
};

namespace detail {

// h_1..h_n in log coordinate; saturates at -inf instead of failing once the
// value leaves binary64 range.
inline std::vector<double> log_h_sequence(const Environment& env, std::size_t n, TailScalar s) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.log() == -logmath::kInf) {
      out.push_back(s.log());
      continue;
    }
    s = at_index(i, [&] { return env.law_at(i).h_transform(s); });
    out.push_back(s.log());
  }
  return out;
}

// Least-squares slope of ys against their index.
inline double ls_slope(const double* ys, std::size_t m) {
  if (m < 2) return 0.0;
  const double xbar = 0.5 * static_cast<double>(m - 1);
  double ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) ybar += ys[i];
  ybar /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxy += dx * (ys[i] - ybar);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace detail

struct QProductTrace {
  std::vector<double> partial_sums;   // entry n-1 is sum_{i<n} log Q
  std::vector<double> log_h_args;     // log h_{i+1}(xi, s); the Q argument is e^{-h_{i+1}}
};

/// Partial sums of log Q_{xi_i}(f_{i+1}^{(-1)}(xi, e^{-s})) for n = 1..n_max.
inline QProductTrace q_log_products(const Environment& env, TailScalar s, std::size_t n_max) {
  if (!(s.log() > -logmath::kInf)) throw ValidationError("q_log_products requires s > 0");
  QProductTrace out;
  if (n_max == 0) return out;
  out.log_h_args = detail::log_h_sequence(env, n_max, s);
  out.partial_sums.reserve(n_max);
  double acc = 0.0;
  for (std::size_t i = 0; i < n_max; ++i) {
    const double log_u = std::max(logmath::log1mexp_from_log(out.log_h_args[i]), -std::numeric_limits<double>::max());
    const double q = detail::at_index(i, [&] { return env.law_at(i).q_ratio(ComplementCoord::from_log(log_u)); });
    acc += std::min(0.0, std::log(q));
    out.partial_sums.push_back(acc);
  }
  return out;
}

inline QProductTrace q_log_products(const Environment& env, double s, std::size_t n_max) {
  return q_log_products(env, TailScalar::from_value(s), n_max);
}

struct RatioTrend {
  double t = 0.0;
  std::vector<double> log_ratios;  // log h_n(t) - log h_n(s), n = 1..n_max
  double slope = 0.0;              // over the last slope_window points
  double level = 0.0;              // last log ratio
  bool vanishing = false;
  bool stabilized_positive = false;
};

struct PointVerdict {
  double s = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<double> log_q_products;
  std::vector<RatioTrend> ratio_trends;
  ClassifyConfig thresholds;

  nlohmann::json to_json() const {
    nlohmann::json trends = nlohmann::json::array();
    for (const auto& r : ratio_trends) {
      trends.push_back({{"t", r.t},
                        {"log_ratios", r.log_ratios},
                        {"slope", r.slope},
                        {"level", r.level},
                        {"vanishing", r.vanishing},
                        {"stabilized_positive", r.stabilized_positive}});
    }
    return {{"s", s},
            {"verdict", to_string(verdict)},
            {"log_q_products", log_q_products},
            {"ratio_trends", trends},
            {"thresholds", thresholds.to_json()}};
  }
};

inline PointVerdict classify_point(const Environment& env, double s, const ClassifyConfig& config = {}) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("classify_point requires s > 0");
  PointVerdict out;
  out.s = s;
  out.thresholds = config;
  const std::size_t window = std::max<std::size_t>(config.slope_window, 2);
  if (config.n_max < window) return out;

  const auto q = q_log_products(env, TailScalar::from_value(s), config.n_max);
  out.log_q_products = q.partial_sums;
  const bool products_diverge = q.partial_sums.back() <= config.regular_threshold;

  bool all_vanish = !config.ratio_grid.empty();
  bool any_positive = false;
  for (double frac : config.ratio_grid) {
    if (!(frac > 0.0 && frac < 1.0)) throw ValidationError("ratio_grid fractions must lie in (0,1)");
    RatioTrend tr;
    tr.t = frac * s;
    const auto lt = detail::log_h_sequence(env, config.n_max, TailScalar::from_value(tr.t));
    tr.log_ratios.reserve(config.n_max);
    for (std::size_t n = 0; n < config.n_max; ++n) {
      const double a = lt[n];
      const double b = q.log_h_args[n];
      // both underflowed: the t-sequence went first, since h_n is increasing
      tr.log_ratios.push_back(a == -logmath::kInf ? -logmath::kInf : a - b);
    }
    tr.level = tr.log_ratios.back();
    const double* tail = tr.log_ratios.data() + (config.n_max - window);
    tr.slope = std::isfinite(tr.level) ? detail::ls_slope(tail, window) : -logmath::kInf;
    tr.vanishing = tr.level <= config.regular_threshold && tr.slope <= 0.0;
    tr.stabilized_positive = std::fabs(tr.slope) < config.slope_tol && tr.level > config.regular_threshold &&
                             tr.level <= 1e-12;
    all_vanish = all_vanish && tr.vanishing;
    any_positive = any_positive || tr.stabilized_positive;
    out.ratio_trends.push_back(std::move(tr));
  }

  if (any_positive) {
    out.verdict = Verdict::Irregular;
  } else if (products_diverge && all_vanish) {
    out.verdict = Verdict::Regular;
  }
  return out;
}

struct ProcessVerdict {
  Verdict verdict = Verdict::Inconclusive;
  std::vector<PointVerdict> points;

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) pts.push_back(p.to_json());
    return {{"verdict", to_string(verdict)}, {"points", pts}};
  }
};

/// Process verdict from point verdicts: any Irregular wins, then all Regular, else Inconclusive.
inline Verdict combine_verdicts(const std::vector<Verdict>& points) {
  if (points.empty()) return Verdict::Inconclusive;
  bool all_regular = true;
  for (Verdict v : points) {
    if (v == Verdict::Irregular) return Verdict::Irregular;
    all_regular = all_regular && v == Verdict::Regular;
  }
  return all_regular ? Verdict::Regular : Verdict::Inconclusive;
}

inline ProcessVerdict classify_process(const Environment& env, const std::vector<double>& s_grid,
                                       const ClassifyConfig& config = {}) {
  if (s_grid.empty()) throw ValidationError("classify_process requires a nonempty s_grid");
  ProcessVerdict out;
  std::vector<Verdict> verdicts;
  for (double s : s_grid) {
    out.points.push_back(classify_point(env, s, config));
    verdicts.push_back(out.points.back().verdict);
  }
  out.verdict = combine_verdicts(verdicts);
  return out;
}

/// Evaluation points for sup_{x<1} Q(x): a linear grid on [0, 0.99] plus
/// complements 1 - x = 10^{-j/8} down to 1e-15.
inline std::vector<ComplementCoord> q_sup_grid() {
  std::vector<ComplementCoord> grid;
  for (int i = 0; i <= 99; ++i) grid.push_back(ComplementCoord::from_point(0.01 * i));
  for (int j = 16; j <= 120; ++j) grid.push_back(ComplementCoord::from_log(-std::log(10.0) * j / 8.0));
  return grid;
}

inline double q_sup(const OffspringLaw& law) {
  static const std::vector<ComplementCoord> grid = q_sup_grid();
  double best = 0.0;
  for (const auto& u : grid) best = std::max(best, law.q_ratio(u));
  return best;
}

struct SufficientCriterion {
  bool holds = false;
  double c_estimate = 1.0;        // max observed sup Q over laws counted as bounded
  double bounded_fraction = 0.0;  // empirical frequency of {sup Q <= c < 1}
  std::size_t samples = 0;
  double margin = 0.0;

  nlohmann::json to_json() const {
    return {{"holds", holds},
            {"c_estimate", c_estimate},
            {"bounded_fraction", bounded_fraction},
            {"samples", samples},
            {"margin", margin}};
  }
};

/// A law counts as bounded away from 1 when its grid supremum is at most 1 - margin.
inline SufficientCriterion check_sufficient_criterion(const EnvironmentModel& model, std::size_t samples,
                                                      double margin = 1e-6) {
  if (samples < 1) throw ValidationError("check_sufficient_criterion requires samples >= 1");
  SufficientCriterion out;
  out.samples = samples;
  out.margin = margin;
  std::size_t bounded = 0;
  double c = 0.0;
  for (std::uint64_t r = 0; r < samples; ++r) {
    const double sup = q_sup(model.draw_law(r, 0));
    if (sup <= 1.0 - margin) {
      ++bounded;
      c = std::max(c, sup);
    }
  }
  out.bounded_fraction = static_cast<double>(bounded) / static_cast<double>(samples);
  out.holds = bounded > 0;
  out.c_estimate = bounded > 0 ? c : 1.0;
  return out;
}

struct RegularPointSearch {
  bool found = false;
  double point = 0.0;
  double lo = 0.0;  // h_{xi_0}(s)
  double hi = 0.0;  // s
  std::vector<PointVerdict> probes;
  std::string failure;

  nlohmann::json to_json() const {
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : probes) pr.push_back({{"s", p.s}, {"verdict", to_string(p.verdict)}});
    nlohmann::json j = {{"found", found}, {"interval", {lo, hi}}, {"probes", pr}};
    if (found) j["point"] = point;
    if (!found) j["failure"] = failure;
    return j;
  }
};

/// Looks for a theta-xi-regular point in [h_{xi_0}(s), s] by dyadic refinement.
inline RegularPointSearch find_regular_point(const Environment& env, double s, const ClassifyConfig& config = {},
                                             int max_depth = 4) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("find_regular_point requires s > 0");
  RegularPointSearch out;
  out.hi = s;
  out.lo = env.law_at(0).h_transform(TailScalar::from_value(s)).value();
  const Environment shifted = env.shift(1);
  auto probe = [&](double p) {
    out.probes.push_back(classify_point(shifted, p, config));
    if (out.probes.back().verdict == Verdict::Regular) {
      out.found = true;
      out.point = p;
    }
    return out.found;
  };
  if (probe(out.hi) || probe(out.lo)) return out;
  for (int depth = 1; depth <= max_depth; ++depth) {
    const std::uint64_t parts = std::uint64_t{1} << depth;
    for (std::uint64_t j = 1; j < parts; j += 2) {
      if (probe(out.lo + (out.hi - out.lo) * static_cast<double>(j) / static_cast<double>(parts))) return out;
    }
  }
  out.failure = "no regular point among " + std::to_string(out.probes.size()) +
                " probes; evidence against the vanishing-defect assumption or n_max too small";
  return out;
}

}  // namespace hbre
