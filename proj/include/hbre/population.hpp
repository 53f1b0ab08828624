#pragma once

// Quenched simulation of Z_0 = 1, Z_{n+1} = sum of Z_n i.i.d. draws from xi_n.
//
// Populations are stepped particle by particle while the current count is
// within the exact budget. Beyond it the heavy-tail scaling limit is used:
// a sum of N i.i.d. Sibuya(a) draws is N^{1/a} S_a in distribution, up to a
// relative error of order N^{-1/a}, with S_a one-sided a-stable. The switch is
// recorded per trajectory and is one-way.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hbre/composition.hpp"
#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/rng.hpp"
#include "hbre/sampling.hpp"
#include "hbre/tail_scalar.hpp"

namespace hbre {

struct ExactState {
  BigCount count;
};
struct LogState {
  double log_count;
};
using PopulationState = std::variant<ExactState, LogState>;

enum class StepMode { Exact, LogApprox };

inline const char* to_string(StepMode m) { return m == StepMode::Exact ? "exact" : "log_approx"; }

inline double log_count(const PopulationState& s) {
  if (auto* e = std::get_if<ExactState>(&s)) return log_of(e->count);
  return std::get<LogState>(s).log_count;
}

inline StepMode mode_of(const PopulationState& s) {
  return std::holds_alternative<ExactState>(s) ? StepMode::Exact : StepMode::LogApprox;
}

struct StepConfig {
  std::uint64_t exact_budget = 1'000'000;
  bool asymptotic_enabled = true;
};

struct OverBudget {};

/// Sum of `count` independent draws. Consumes nothing when count > budget.
inline std::variant<BigCount, OverBudget> step_exact(const BigCount& count, const OffspringLaw& law,
                                                     RandomStream& rng, std::uint64_t budget) {
  if (count > budget) return OverBudget{};
  const auto n = count.convert_to<std::uint64_t>();
  const OffspringSampler sampler(law, n > 256 ? OffspringSampler::kDefaultTable : 64);
  return sampler.sum(n, rng).total();
}

/// log Z' = log Z / a + log S_a for a law with stable index a in (0,1).
inline double step_asymptotic(double log_count, const OffspringLaw& law, RandomStream& rng) {
  const auto index = law.stable_index();
  if (!index) throw UnsupportedLaw("asymptotic stepping needs a law with a stable index; got " + law.describe());
  return log_count / *index + sample_log_positive_stable(*index, rng);
}

struct Trajectory {
  Environment env;
  StreamKey key;
  std::vector<PopulationState> states;
  std::optional<std::size_t> mode_switch_index;  // first generation in log mode
  bool truncated = false;
  std::string truncation_reason;
  std::uint64_t rng_draws = 0;

  Trajectory(Environment e, StreamKey k) : env(std::move(e)), key(k) { states.push_back(ExactState{1}); }

  std::size_t generations() const noexcept { return states.size() - 1; }
  double log_count_at(std::size_t n) const { return log_count(states.at(n)); }
  StepMode mode_at(std::size_t n) const { return mode_of(states.at(n)); }
  StepMode final_mode() const { return mode_of(states.back()); }
};

/// Advances by one generation. Returns false (and marks truncation) when it cannot.
inline bool advance(Trajectory& traj, const StepConfig& config) {
  if (traj.truncated) return false;
  const std::size_t g = traj.generations();
  const OffspringLaw law = traj.env.law_at(g);
  const std::uint64_t position = traj.env.offset() + g;
  const PopulationState& current = traj.states.back();
  if (auto* exact = std::get_if<ExactState>(&current)) {
    RandomStream rng = traj.key.generation_stream(position, StreamPurpose::Offspring);
    auto next = step_exact(exact->count, law, rng, config.exact_budget);
    traj.rng_draws += rng.draws();
    if (auto* c = std::get_if<BigCount>(&next)) {
      traj.states.push_back(ExactState{std::move(*c)});
      return true;
    }
    if (!config.asymptotic_enabled) {
      traj.truncated = true;
      traj.truncation_reason = "exact budget exceeded at generation " + std::to_string(g);
      return false;
    }
    if (!law.stable_index()) {
      traj.truncated = true;
      traj.truncation_reason = "exact budget exceeded and law has no stable index at generation " + std::to_string(g);
      return false;
    }
    traj.mode_switch_index = g + 1;
  }
  RandomStream rng = traj.key.generation_stream(position, StreamPurpose::Stable);
  const double next = step_asymptotic(log_count(current), law, rng);
  traj.rng_draws += rng.draws();
  traj.states.push_back(LogState{next});
  return true;
}

inline Trajectory simulate_trajectory(const Environment& env, std::size_t n_generations, StreamKey key,
                                      const StepConfig& config = {}) {
  if (config.exact_budget < 1) throw ValidationError("exact_budget must be >= 1");
  Trajectory traj(env, key);
  for (std::size_t n = 0; n < n_generations; ++n) {
    if (!advance(traj, config)) break;
  }
  return traj;
}

/// y_n(xi, Z_n) = f_{xi_0}(... f_{xi_{n-1}}(e^{-1/Z_n})), folded in complement coordinate.
inline double compute_Y(const Environment& env, double log_z, std::size_t n) {
  double log_u = logmath::log1mexp_from_log(-log_z);
  for (std::size_t i = n; i-- > 0;) log_u = env.law_at(i).log_pgf_complement(log_u);
  return -std::expm1(log_u);
}

inline double compute_Y(const Trajectory& traj, std::size_t n) {
  if (n > traj.generations()) throw ValidationError("compute_Y: n beyond trajectory");
  return compute_Y(traj.env, traj.log_count_at(n), n);
}

struct MartingaleSample {
  std::size_t n = 0;
  double s = 0.0;
  double log_X_n = 0.0;      // -Z_n h_n(xi, s)
  double log_Z_h = 0.0;      // log Z_n + log h_n(xi, s)
};

inline MartingaleSample compute_martingale_logX(double log_z, TailScalar h_n, double s, std::size_t n) {
  const double log_zh = log_z + h_n.log();
  return {n, s, -std::exp(log_zh), log_zh};
}

inline MartingaleSample compute_martingale_logX(const Trajectory& traj, double s, std::size_t n) {
  if (!(s > 0.0)) throw ValidationError("martingale requires s > 0");
  if (n > traj.generations()) throw ValidationError("compute_martingale_logX: n beyond trajectory");
  return compute_martingale_logX(traj.log_count_at(n), compose_h_n(traj.env, n, TailScalar::from_value(s)), s, n);
}

struct StabilizationRule {
  double y_tol = 1e-4;
  std::size_t n_max = 40;
};

struct StabilizedPath {
  Trajectory traj;
  std::vector<double> y;  // Y_0..Y_final
  bool stabilized = false;

  std::size_t final_n() const noexcept { return y.size() - 1; }
  double final_y() const { return y.back(); }
};

/// Simulates until |Y_n - Y_{n-1}| < y_tol or n reaches n_max.
inline StabilizedPath simulate_until_stable(const Environment& env, StreamKey key, const StepConfig& config,
                                            const StabilizationRule& rule) {
  StabilizedPath out{Trajectory(env, key), {}, false};
  out.y.push_back(compute_Y(out.traj, 0));
  while (out.traj.generations() < rule.n_max) {
    if (!advance(out.traj, config)) break;
    const std::size_t n = out.traj.generations();
    out.y.push_back(compute_Y(out.traj, n));
    if (std::fabs(out.y[n] - out.y[n - 1]) < rule.y_tol) {
      out.stabilized = true;
      break;
    }
  }
  return out;
}

}  // namespace hbre
