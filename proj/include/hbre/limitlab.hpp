#pragma once

// Monte Carlo checks of the limit laws: Y-limit, W atoms, normalization by
// constants (H, the ratio limit, the functional equation) and the growth-case
// taxonomy.

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
#include "hbre/ks.hpp"
#include "hbre/parallel.hpp"
#include "hbre/population.hpp"
#include "hbre/regularity.hpp"

namespace hbre {

enum class UKind { Log, Log1p };
enum class CRule { SibuyaProduct, Unit, Linear, DoubleExponential, ReciprocalH };

inline const char* to_string(UKind u) { return u == UKind::Log ? "log" : "log1p"; }

inline const char* to_string(CRule c) {
  switch (c) {
    case CRule::SibuyaProduct: return "sibuya_product";
    case CRule::Unit: return "unit";
    case CRule::Linear: return "linear";
    case CRule::DoubleExponential: return "double_exponential";
    case CRule::ReciprocalH: return "reciprocal_h";
  }
  return "?";
}

/// U and c_n.
///
///   U = log    : U(x) = max(log x, 0)
///   U = log1p  : U(x) = log(1 + x)
///
///   sibuya_product      c_n = prod_{i<n} 1/alpha_i
///   unit                c_n = 1
///   linear              c_n = n + 1
///   double_exponential  c_n = exp(exp(n K))
///   reciprocal_h        c_n = 1 / h_n(xi, s0)
struct NormalizationScheme {
  UKind u = UKind::Log;
  CRule c = CRule::SibuyaProduct;
  double k = 1.0;
  double s0 = 1.0;

  static NormalizationScheme example() { return {}; }

  void validate() const {
    if (c == CRule::DoubleExponential && !(k > 0.0 && std::isfinite(k))) {
      throw ValidationError("scheme.k must be > 0");
    }
    if (c == CRule::ReciprocalH && !(s0 > 0.0 && std::isfinite(s0))) throw ValidationError("scheme.s0 must be > 0");
  }

  /// U(x) for x = e^{log_x}.
  double U_of_log(double log_x) const {
    if (u == UKind::Log) return std::max(log_x, 0.0);
    if (log_x > 36.0) return log_x + std::exp(-log_x);
    return std::log1p(std::exp(log_x));
  }

  /// log c_n(xi).
  double log_c(const Environment& env, std::size_t n) const {
    switch (c) {
      case CRule::SibuyaProduct: {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const auto law = env.law_at(i);
          if (law.family() != Family::SibuyaLike) {
            throw UnsupportedLaw("sibuya_product normalization needs Sibuya laws; got " + law.describe());
          }
          acc -= std::log(law.alpha());
        }
        return acc;
      }
      case CRule::Unit: return 0.0;
      case CRule::Linear: return std::log(static_cast<double>(n) + 1.0);
      case CRule::DoubleExponential: return std::exp(static_cast<double>(n) * k);
      case CRule::ReciprocalH: return -compose_h_n(env, n, TailScalar::from_value(s0)).log();
    }
    return 0.0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"u", to_string(u)}, {"c", to_string(c)}};
    if (c == CRule::DoubleExponential) j["k"] = k;
    if (c == CRule::ReciprocalH) j["s0"] = s0;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Simulation settings shared by the Monte Carlo estimators.

struct SimSettings {
  StepConfig step;
  StabilizationRule rule;
  std::size_t workers = 1;
};

/// Path key for experiments that hold one environment fixed across replicates.
inline StreamKey fixed_env_key(const Environment& env, std::uint64_t replicate) {
  return {derive_seed({env.model().base_seed(), env.replicate(), 0x5eedull}), replicate};
}

struct LimitSample {
  std::uint64_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t final_n = 0;
  StepMode mode = StepMode::Exact;
  bool stabilized = false;
  bool truncated = false;
  double log_count = 0.0;
  double Y = 0.0;
  double T = 0.0;
  double U_over_c = std::numeric_limits<double>::quiet_NaN();
};

/// One stabilized path per replicate, each in its own sampled environment.
inline std::vector<LimitSample> run_limit_replicates(const std::shared_ptr<const EnvironmentModel>& model,
                                                     std::size_t replicates, const SimSettings& settings,
                                                     const NormalizationScheme& scheme = {}) {
  return parallel_map<LimitSample>(replicates, settings.workers, [&](std::size_t r) {
    const Environment env = sample_environment(model, r);
    const StreamKey key{model->base_seed(), r};
    const auto path = simulate_until_stable(env, key, settings.step, settings.rule);
    LimitSample s;
    s.replicate = r;
    s.seed = key.path_seed();
    s.final_n = path.final_n();
    s.mode = path.traj.final_mode();
    s.stabilized = path.stabilized;
    s.truncated = path.traj.truncated;
    s.log_count = path.traj.log_count_at(s.final_n);
    s.Y = path.final_y();
    s.T = -std::log(s.Y);
    try {
      s.U_over_c = scheme.U_of_log(s.log_count) * std::exp(-scheme.log_c(env, s.final_n));
    } catch (const UnsupportedLaw&) {
    }
    return s;
  });
}

struct QuantileCheck {
  double x = 0.0;
  double p_hat = 0.0;
  double se = 0.0;
};

struct YDistribution {
  std::vector<double> y_samples;  // stabilized replicates only
  std::vector<double> t_samples;
  KsResult ks_uniform;
  KsResult ks_exponential;  // -log(1 - Y) against Exp(1)
  std::vector<QuantileCheck> quantiles;
  std::size_t replicates = 0;
  std::size_t excluded = 0;   // stabilization failed
  std::size_t truncated = 0;
  std::size_t log_mode = 0;   // replicates that ended in asymptotic mode

  nlohmann::json to_json(bool with_samples = true) const {
    nlohmann::json q = nlohmann::json::array();
    for (const auto& c : quantiles) q.push_back({{"x", c.x}, {"p_hat", c.p_hat}, {"se", c.se}});
    nlohmann::json j = {{"replicates", replicates},       {"excluded_unstabilized", excluded},
                        {"truncated", truncated},         {"log_mode", log_mode},
                        {"ks_uniform", ks_uniform.to_json()}, {"ks_exponential", ks_exponential.to_json()},
                        {"quantiles", q}};
    if (with_samples) {
      j["y_samples"] = y_samples;
      j["t_samples"] = t_samples;
    }
    return j;
  }
};

inline YDistribution summarize_Y(const std::vector<LimitSample>& samples) {
  YDistribution out;
  out.replicates = samples.size();
  std::vector<double> minus_log_1my;
  for (const auto& s : samples) {
    out.truncated += s.truncated;
    out.log_mode += s.mode == StepMode::LogApprox;
    if (!s.stabilized) {
      ++out.excluded;
      continue;
    }
    out.y_samples.push_back(s.Y);
    out.t_samples.push_back(s.T);
    minus_log_1my.push_back(-std::log1p(-s.Y));
  }
  if (out.y_samples.empty()) throw NonConvergence("no replicate reached Y-stabilization", 0.0);
  out.ks_uniform = ks_statistic(out.y_samples, uniform_cdf);
  out.ks_exponential = ks_statistic(minus_log_1my, exponential_cdf);
  const double n = static_cast<double>(out.y_samples.size());
  for (double x : {0.25, 0.5, 0.75}) {
    const double hits = static_cast<double>(
        std::count_if(out.y_samples.begin(), out.y_samples.end(), [x](double y) { return y <= x; }));
    const double p = hits / n;
    out.quantiles.push_back({x, p, std::sqrt(x * (1.0 - x) / n)});
  }
  return out;
}

inline YDistribution estimate_Y_distribution(const std::shared_ptr<const EnvironmentModel>& model,
                                             std::size_t replicates, const SimSettings& settings) {
  if (replicates < 100) throw ValidationError("estimate_Y_distribution requires replicates >= 100");
  return summarize_Y(run_limit_replicates(model, replicates, settings));
}

struct NormalizedSample {
  std::vector<double> values;  // U(Z_n)/c_n at final n, stabilized replicates only
  std::optional<KsResult> ks_exponential;
  std::size_t excluded = 0;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"n", values.size()}, {"excluded", excluded}};
    j["ks_exponential"] = ks_exponential ? ks_exponential->to_json() : nlohmann::json(nullptr);
    return j;
  }
};

/// With `compare_exponential`, the sample is tested against Exp(1).
inline NormalizedSample summarize_normalized(const std::vector<LimitSample>& samples, bool compare_exponential) {
  NormalizedSample out;
  for (const auto& s : samples) {
    if (!s.stabilized || std::isnan(s.U_over_c)) {
      ++out.excluded;
      continue;
    }
    out.values.push_back(s.U_over_c);
  }
  if (compare_exponential && !out.values.empty()) out.ks_exponential = ks_statistic(out.values, exponential_cdf);
  return out;
}

/// Exp(1) comparison applies to the Sibuya product scheme with U = log on a Sibuya model.
inline bool is_example_setup(const EnvironmentModel& model, const NormalizationScheme& scheme) {
  return model.is_sibuya_uniform() && scheme.c == CRule::SibuyaProduct && scheme.u == UKind::Log;
}

inline NormalizedSample normalized_limit_sample(const std::shared_ptr<const EnvironmentModel>& model,
                                                const NormalizationScheme& scheme, std::size_t replicates,
                                                const SimSettings& settings) {
  if (replicates < 100) throw ValidationError("normalized_limit_sample requires replicates >= 100");
  scheme.validate();
  return summarize_normalized(run_limit_replicates(model, replicates, settings, scheme),
                              is_example_setup(*model, scheme));
}

// ---------------------------------------------------------------------------
// W atoms and the martingale mean on one fixed environment.

struct WAtoms {
  double s = 0.0;
  std::size_t n = 0;
  std::size_t replicates = 0;
  double dead_band = 5.0;
  std::size_t zero = 0;
  std::size_t infinity = 0;
  std::size_t ambiguous = 0;
  std::size_t exact_final = 0;  // replicates still in exact mode at n
  std::size_t truncated = 0;
  double mean_X = 0.0;
  double se_X = 0.0;

  double frac(std::size_t c) const { return static_cast<double>(c) / static_cast<double>(replicates); }
  double frac_zero() const { return frac(zero); }
  double frac_infinity() const { return frac(infinity); }
  double frac_ambiguous() const { return frac(ambiguous); }
  double se_frac(std::size_t c) const {
    const double p = frac(c);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(replicates));
  }

  nlohmann::json to_json() const {
    return {{"s", s},
            {"n", n},
            {"replicates", replicates},
            {"dead_band", dead_band},
            {"frac_zero", frac_zero()},
            {"frac_infinity", frac_infinity()},
            {"frac_ambiguous", frac_ambiguous()},
            {"se_frac_zero", se_frac(zero)},
            {"se_frac_infinity", se_frac(infinity)},
            {"exact_final", exact_final},
            {"truncated", truncated},
            {"mean_X", mean_X},
            {"se_X", se_X}};
  }
};

/// Classifies each path by log Z_n + log h_n(xi, s): below -dead_band means W = 0,
/// above +dead_band means W = infinity, otherwise ambiguous.
inline WAtoms estimate_W_atoms(const Environment& env, double s, std::size_t replicates, std::size_t n,
                               const SimSettings& settings, double dead_band = 5.0) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("estimate_W_atoms requires s > 0");
  if (replicates < 1) throw ValidationError("estimate_W_atoms requires replicates >= 1");
  if (!(dead_band >= 0.0)) throw ValidationError("dead_band must be >= 0");
  const double log_h = compose_h_n(env, n, TailScalar::from_value(s)).log();
  struct Row {
    double log_zh;
    double x;
    bool exact;
    bool truncated;
  };
  const auto rows = parallel_map<Row>(replicates, settings.workers, [&](std::size_t r) {
    const auto traj = simulate_trajectory(env, n, fixed_env_key(env, r), settings.step);
    if (traj.truncated) return Row{0.0, 0.0, false, true};
    const auto m = compute_martingale_logX(traj.log_count_at(n), TailScalar::from_log(log_h), s, n);
    return Row{m.log_Z_h, std::exp(m.log_X_n), traj.final_mode() == StepMode::Exact, false};
  });
  WAtoms out;
  out.s = s;
  out.n = n;
  out.replicates = replicates;
  out.dead_band = dead_band;
  double sum = 0.0, sum2 = 0.0;
  std::size_t used = 0;
  for (const auto& row : rows) {
    if (row.truncated) {
      ++out.truncated;
      ++out.ambiguous;
      continue;
    }
    ++used;
    sum += row.x;
    sum2 += row.x * row.x;
    out.exact_final += row.exact;
    if (row.log_zh < -dead_band) {
      ++out.zero;
    } else if (row.log_zh > dead_band) {
      ++out.infinity;
    } else {
      ++out.ambiguous;
    }
  }
  if (used > 0) {
    const double m = sum / static_cast<double>(used);
    out.mean_X = m;
    out.se_X = used > 1 ? std::sqrt(std::max(0.0, sum2 / static_cast<double>(used) - m * m) /
                                    static_cast<double>(used - 1))
                        : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization by constants.

/// U(1/h_n(xi, s)) / c_n(xi) for n = 1..n_max.
inline std::vector<double> compute_H(const Environment& env, const NormalizationScheme& scheme, double s,
                                     std::size_t n_max) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("compute_H requires s > 0");
  scheme.validate();
  std::vector<double> out;
  out.reserve(n_max);
  const auto path = h_path(env, n_max, TailScalar::from_value(s));
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double u = scheme.U_of_log(-path[n].log());
    out.push_back(u <= 0.0 ? 0.0 : std::exp(std::log(u) - scheme.log_c(env, n)));
  }
  return out;
}

/// c_{n-1}(theta xi) / c_n(xi) for n = 1..n_max.
inline std::vector<double> compute_alpha_ratio(const Environment& env, const NormalizationScheme& scheme,
                                               std::size_t n_max) {
  if (n_max < 1) throw ValidationError("compute_alpha_ratio requires n_max >= 1");
  scheme.validate();
  const Environment shifted = env.shift(1);
  std::vector<double> out;
  out.reserve(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) out.push_back(std::exp(scheme.log_c(shifted, n - 1) - scheme.log_c(env, n)));
  return out;
}

inline std::vector<double> default_u_grid() {
  std::vector<double> u;
  for (int k = 1; k <= 50; ++k) u.push_back(0.1 * k);
  return u;
}

struct FunctionalEquationResult {
  std::string mode;  // "analytic" or "empirical"
  double max_residual = 0.0;
  double argmax_u = 0.0;
  std::size_t environments = 0;
  std::size_t replicates_per_side = 0;
  std::size_t n = 0;
  std::vector<double> alphas;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"mode", mode}, {"max_residual", max_residual}, {"argmax_u", argmax_u},
                        {"environments", environments}, {"alphas", alphas}};
    if (mode == "empirical") {
      j["replicates_per_side"] = replicates_per_side;
      j["n"] = n;
    }
    return j;
  }
};

/// max |F(alpha u) - f_{xi_0}(F(u))| with F(x) = 1 - e^{-x} and alpha from the
/// scheme's ratio limit (read at n = alpha_n).
inline FunctionalEquationResult functional_equation_analytic(const std::shared_ptr<const EnvironmentModel>& model,
                                                             const NormalizationScheme& scheme,
                                                             std::size_t environments,
                                                             const std::vector<double>& u_grid,
                                                             std::size_t alpha_n = 30) {
  FunctionalEquationResult out;
  out.mode = "analytic";
  out.environments = environments;
  for (std::uint64_t r = 0; r < environments; ++r) {
    const Environment env = sample_environment(model, r);
    const double alpha = compute_alpha_ratio(env, scheme, alpha_n).back();
    out.alphas.push_back(alpha);
    const OffspringLaw f0 = env.law_at(0);
    for (double u : u_grid) {
      const double lhs = -std::expm1(-alpha * u);
      // 1 - F(u) = e^{-u}, so f0(F(u)) = 1 - exp(log_pgf_complement(-u))
      const double rhs = -std::expm1(f0.log_pgf_complement(-u));
      const double res = std::fabs(lhs - rhs);
      if (res > out.max_residual) {
        out.max_residual = res;
        out.argmax_u = u;
      }
    }
  }
  return out;
}

/// U(Z_n)/c_n at fixed n over replicates with the fixed-environment keys.
inline std::vector<double> normalized_fixed_n(const Environment& env, const NormalizationScheme& scheme,
                                              std::size_t replicates, std::size_t n, const SimSettings& settings) {
  const double log_c = scheme.log_c(env, n);
  return parallel_map<double>(replicates, settings.workers, [&](std::size_t r) {
    const auto traj = simulate_trajectory(env, n, fixed_env_key(env, r), settings.step);
    if (traj.truncated) return std::numeric_limits<double>::quiet_NaN();
    return scheme.U_of_log(traj.log_count_at(n)) * std::exp(-log_c);
  });
}

/// Empirical version on one environment: both sides from simulated
/// U(Z_n)/c_n, with xi and theta xi paths driven by the same keys.
inline FunctionalEquationResult functional_equation_empirical(const Environment& env,
                                                              const NormalizationScheme& scheme,
                                                              std::size_t replicates, std::size_t n,
                                                              const SimSettings& settings,
                                                              const std::vector<double>& u_grid) {
  if (replicates < 1) throw ValidationError("functional_equation_empirical requires replicates >= 1");
  auto keep = [](std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    return v;
  };
  const EmpiricalCdf F(keep(normalized_fixed_n(env, scheme, replicates, n, settings)));
  const EmpiricalCdf F_shift(keep(normalized_fixed_n(env.shift(1), scheme, replicates, n, settings)));
  const double alpha = compute_alpha_ratio(env, scheme, std::max<std::size_t>(n, 1)).back();
  const OffspringLaw f0 = env.law_at(0);
  FunctionalEquationResult out;
  out.mode = "empirical";
  out.environments = 1;
  out.replicates_per_side = replicates;
  out.n = n;
  out.alphas = {alpha};
  for (double u : u_grid) {
    const double res = std::fabs(F(alpha * u) - f0.pgf(F_shift(u)));
    if (res > out.max_residual) {
      out.max_residual = res;
      out.argmax_u = u;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Growth-case taxonomy.

struct GrowthConfig {
  double divergence = 40.0;  // |log(h_n c_n)| beyond this counts as 0 or infinity
  double unit_tol = 1e-6;    // |log(h_n c_n)| within this counts as 1

  nlohmann::json to_json() const { return {{"divergence", divergence}, {"unit_tol", unit_tol}}; }
};

struct GrowthPoint {
  double s = 0.0;
  std::vector<double> log_products;  // log h_n(xi, s) + log c_n(xi), n = 1..n_max
  std::string trend;                 // "zero", "infinity", "one", "undetermined"
};

struct GrowthDiagnosis {
  std::string growth_case = "inconclusive";  // "a", "b", "c", "d", "inconclusive"
  std::optional<double> s_r;
  std::optional<double> s_i;
  std::vector<GrowthPoint> points;
  GrowthConfig config;

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) {
      pts.push_back({{"s", p.s}, {"trend", p.trend}, {"final_log_product", p.log_products.back()}});
    }
    nlohmann::json j = {{"case", growth_case}, {"points", pts}, {"thresholds", config.to_json()}};
    if (s_r) j["s_r"] = *s_r;
    if (s_i) j["s_i"] = *s_i;
    return j;
  }
};

inline GrowthDiagnosis diagnose_growth_case(const Environment& env, const NormalizationScheme& scheme,
                                            std::vector<double> s_grid, std::size_t n_max,
                                            const GrowthConfig& config = {}) {
  if (s_grid.empty()) throw ValidationError("diagnose_growth_case requires a nonempty s_grid");
  if (n_max < 1) throw ValidationError("diagnose_growth_case requires n_max >= 1");
  scheme.validate();
  std::sort(s_grid.begin(), s_grid.end());
  GrowthDiagnosis out;
  out.config = config;
  std::vector<double> log_c(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) log_c[n - 1] = scheme.log_c(env, n);
  for (double s : s_grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("s_grid entries must be > 0");
    GrowthPoint p;
    p.s = s;
    const auto lh = detail::log_h_sequence(env, n_max, TailScalar::from_value(s));
    for (std::size_t n = 0; n < n_max; ++n) {
      const double v = lh[n] + log_c[n];
      p.log_products.push_back(std::isnan(v) ? 0.0 : v);
    }
    const double last = lh.back() + log_c.back();
    if (std::isnan(last)) {
      p.trend = "undetermined";
    } else if (last >= config.divergence) {
      p.trend = "infinity";
    } else if (last <= -config.divergence) {
      p.trend = "zero";
    } else if (std::fabs(last) <= config.unit_tol) {
      p.trend = "one";
    } else {
      p.trend = "undetermined";
    }
    out.points.push_back(std::move(p));
  }

  auto count = [&](const char* t) {
    return std::count_if(out.points.begin(), out.points.end(), [t](const GrowthPoint& p) { return p.trend == t; });
  };
  const auto total = static_cast<std::ptrdiff_t>(out.points.size());
  if (count("infinity") == total) {
    out.growth_case = "a";
    return out;
  }
  if (count("zero") == total) {
    out.growth_case = "b";
    return out;
  }
  // Split: zeros, then at most one "one", then infinities, in increasing s.
  std::size_t i = 0;
  while (i < out.points.size() && out.points[i].trend == "zero") ++i;
  const std::size_t zeros = i;
  std::optional<std::size_t> unit;
  if (i < out.points.size() && out.points[i].trend == "one") unit = i++;
  const std::size_t first_inf = i;
  while (i < out.points.size() && out.points[i].trend == "infinity") ++i;
  const bool split = i == out.points.size() && zeros > 0 && first_inf < out.points.size();
  if (split) {
    out.growth_case = "c";
    out.s_r = unit ? out.points[*unit].s : 0.5 * (out.points[zeros - 1].s + out.points[first_inf].s);
    return out;
  }
  for (const auto& p : out.points) {
    if (p.trend == "one") {
      out.growth_case = "d";
      out.s_i = p.s;
      return out;
    }
  }
  return out;
}

}  // namespace hbre
