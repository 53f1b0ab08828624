#pragma once

// The simulate / classify / limits pipelines behind the command-line tool.
// Each returns its artifacts in memory; write_outputs() puts them on disk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbre/assumptions.hpp"
#include "hbre/config.hpp"
#include "hbre/environment.hpp"
#include "hbre/limitlab.hpp"
#include "hbre/parallel.hpp"
#include "hbre/population.hpp"
#include "hbre/regularity.hpp"
#include "hbre/report.hpp"

namespace hbre {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineOutput {
  nlohmann::json report = nlohmann::json::object();
  std::string samples_csv;
  nlohmann::json environments = nlohmann::json::array();
  nlohmann::json rng = nlohmann::json::object();
  bool complete = true;
};

inline std::shared_ptr<const EnvironmentModel> model_of(const RunConfig& cfg) {
  return std::make_shared<const EnvironmentModel>(build_model(cfg.model));
}

inline nlohmann::json rng_scheme() {
  return {{"generator", "mt19937_64"},
          {"keying", "splitmix64 hash of (seed, replicate, environment position, purpose)"}};
}

inline PipelineOutput run_simulate(const RunConfig& cfg) {
  const auto model = model_of(cfg);
  struct Row {
    std::string csv;
    std::uint64_t draws = 0;
    bool switched = false;
    bool truncated = false;
    double final_log_count = 0.0;
    std::vector<double> final_x;
  };
  const bool fixed = cfg.fixed_env >= 0;
  auto env_for = [&](std::uint64_t r) {
    return sample_environment(model, fixed ? static_cast<std::uint64_t>(cfg.fixed_env) : r);
  };
  const auto rows = parallel_map<Row>(cfg.replicates, cfg.workers, [&](std::size_t r) {
    const Environment env = env_for(r);
    const StreamKey key = fixed ? fixed_env_key(env, r) : StreamKey{cfg.seed, r};
    const auto traj = simulate_trajectory(env, cfg.generations, key, cfg.sim.step);
    Row row;
    row.csv = trajectory_csv_rows(r, traj, cfg.s_grid);
    row.draws = traj.rng_draws;
    row.switched = traj.mode_switch_index.has_value();
    row.truncated = traj.truncated;
    const std::size_t n = traj.generations();
    row.final_log_count = traj.log_count_at(n);
    for (double s : cfg.s_grid) row.final_x.push_back(std::exp(compute_martingale_logX(traj, s, n).log_X_n));
    return row;
  });

  PipelineOutput out;
  out.samples_csv = trajectory_csv_header(cfg.s_grid);
  std::uint64_t draws = 0;
  std::size_t switched = 0, truncated = 0;
  std::vector<double> sum(cfg.s_grid.size(), 0.0), sum2(cfg.s_grid.size(), 0.0);
  for (const auto& row : rows) {
    out.samples_csv += row.csv;
    draws += row.draws;
    switched += row.switched;
    truncated += row.truncated;
    for (std::size_t j = 0; j < row.final_x.size(); ++j) {
      sum[j] += row.final_x[j];
      sum2[j] += row.final_x[j] * row.final_x[j];
    }
  }
  nlohmann::json means = nlohmann::json::array();
  const double R = static_cast<double>(cfg.replicates);
  for (std::size_t j = 0; j < cfg.s_grid.size(); ++j) {
    const double m = sum[j] / R;
    const double se = cfg.replicates > 1 ? std::sqrt(std::max(0.0, sum2[j] / R - m * m) / (R - 1.0)) : 0.0;
    means.push_back({{"s", cfg.s_grid[j]}, {"mean_X", m}, {"se", se}, {"target", std::exp(-cfg.s_grid[j])}});
  }
  out.report = {{"command", "simulate"},
                {"replicates", cfg.replicates},
                {"generations", cfg.generations},
                {"fixed_env", cfg.fixed_env},
                {"mode_switched", switched},
                {"truncated", truncated},
                {"martingale_means", means},
                {"model", model->to_json()},
                {"seed", cfg.seed}};
  out.complete = truncated == 0;
  if (fixed) {
    out.environments.push_back(env_for(0).record(cfg.generations));
  } else {
    for (std::uint64_t r = 0; r < cfg.replicates; ++r) out.environments.push_back(env_for(r).record(cfg.generations));
  }
  out.rng = rng_scheme();
  out.rng["draws"] = draws;
  return out;
}

inline PipelineOutput run_classify(const RunConfig& cfg) {
  const auto model = model_of(cfg);
  const auto verdicts = parallel_map<ProcessVerdict>(cfg.classify_environments, cfg.workers, [&](std::size_t r) {
    return classify_process(sample_environment(model, r), cfg.s_grid, cfg.classify);
  });
  PipelineOutput out;
  out.samples_csv = "environment,s,verdict,log_q_final,max_ratio_level\n";
  std::size_t points[3] = {0, 0, 0};
  std::size_t processes[3] = {0, 0, 0};
  nlohmann::json per_env = nlohmann::json::array();
  for (std::size_t r = 0; r < verdicts.size(); ++r) {
    const auto& v = verdicts[r];
    ++processes[static_cast<int>(v.verdict)];
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : v.points) {
      ++points[static_cast<int>(p.verdict)];
      double max_level = -logmath::kInf;
      for (const auto& t : p.ratio_trends) max_level = std::max(max_level, t.level);
      const double q_final = p.log_q_products.empty() ? 0.0 : p.log_q_products.back();
      out.samples_csv += std::to_string(r) + "," + format_double(p.s) + "," + to_string(p.verdict) + "," +
                         format_double(q_final) + "," + format_double(max_level) + "\n";
      pts.push_back(r == 0 ? p.to_json()
                           : nlohmann::json{{"s", p.s}, {"verdict", to_string(p.verdict)}, {"log_q_final", q_final},
                                            {"max_ratio_level", max_level}});
    }
    per_env.push_back({{"environment", r}, {"verdict", to_string(v.verdict)}, {"points", pts}});
  }
  const Environment env0 = sample_environment(model, 0);
  const double s_mid = cfg.s_grid[cfg.s_grid.size() / 2];
  out.report = {
      {"command", "classify"},
      {"model", model->to_json()},
      {"seed", cfg.seed},
      {"s_grid", cfg.s_grid},
      {"thresholds", cfg.classify.to_json()},
      {"point_counts", {{"regular", points[0]}, {"irregular", points[1]}, {"inconclusive", points[2]}}},
      {"process_counts", {{"regular", processes[0]}, {"irregular", processes[1]}, {"inconclusive", processes[2]}}},
      {"environments", per_env},
      {"assumptions", validate_assumptions(model, cfg.probe).to_json()},
      {"sufficient_criterion", check_sufficient_criterion(*model, cfg.classify_environments).to_json()},
      {"regular_point_search", find_regular_point(env0, s_mid, cfg.classify).to_json()},
  };
  for (std::uint64_t r = 0; r < cfg.classify_environments; ++r) {
    out.environments.push_back(sample_environment(model, r).record(cfg.classify.n_max + 1));
  }
  out.rng = rng_scheme();
  out.rng["draws"] = 0;
  return out;
}

inline PipelineOutput run_limits(const RunConfig& cfg) {
  const auto model = model_of(cfg);
  const auto samples = run_limit_replicates(model, cfg.replicates, cfg.sim, cfg.scheme);
  const bool example = is_example_setup(*model, cfg.scheme);
  const YDistribution y = summarize_Y(samples);
  const NormalizedSample normalized = summarize_normalized(samples, example);

  const Environment env0 = sample_environment(model, 0);
  const std::size_t n_max = std::max<std::size_t>(cfg.generations, 1);
  nlohmann::json h_profile = nlohmann::json::object();
  nlohmann::json alpha_ratio = nullptr;
  nlohmann::json fe_analytic = nullptr;
  nlohmann::json fe_empirical = nullptr;
  nlohmann::json taxonomy = nullptr;
  nlohmann::json notes = nlohmann::json::array();
  try {
    for (double s : cfg.s_grid) h_profile[format_double(s)] = compute_H(env0, cfg.scheme, s, n_max);
    alpha_ratio = compute_alpha_ratio(env0, cfg.scheme, n_max);
    taxonomy = diagnose_growth_case(env0, cfg.scheme, cfg.s_grid, n_max).to_json();
    if (example) {
      fe_analytic = functional_equation_analytic(model, cfg.scheme, cfg.fe_environments, default_u_grid()).to_json();
    }
    fe_empirical =
        functional_equation_empirical(env0, cfg.scheme, cfg.fe_replicates, cfg.fe_generations, cfg.sim, default_u_grid())
            .to_json();
  } catch (const UnsupportedLaw& e) {
    notes.push_back(std::string("normalization scheme not applicable: ") + e.what());
  }
  const WAtoms atoms =
      estimate_W_atoms(env0, cfg.atoms_s, cfg.atoms_replicates, cfg.atoms_generations, cfg.sim, cfg.atoms_dead_band);

  PipelineOutput out;
  out.report = {{"command", "limits"},
                {"model", model->to_json()},
                {"seed", cfg.seed},
                {"scheme", cfg.scheme.to_json()},
                {"y", y.to_json()},
                {"normalized", normalized.to_json()},
                {"h_profile", h_profile},
                {"alpha_ratio", alpha_ratio},
                {"functional_equation", {{"analytic", fe_analytic}, {"empirical", fe_empirical}}},
                {"taxonomy", taxonomy},
                {"w_atoms", atoms.to_json()},
                {"notes", notes}};
  out.samples_csv = limit_samples_csv(samples);
  for (const auto& s : samples) {
    out.environments.push_back(sample_environment(model, s.replicate).record(std::max<std::size_t>(s.final_n, 1)));
  }
  out.rng = rng_scheme();
  out.complete = y.truncated == 0;
  return out;
}

/// Writes report.json, samples.csv, environments.json, config.echo and run_record.json.
/// Timing lives only in run_record.json so that the other files are byte-stable.
inline void write_outputs(const RunConfig& cfg, const PipelineOutput& po, double seconds,
                          const std::string& error = "") {
  std::filesystem::create_directories(cfg.out);
  nlohmann::json report = po.report;
  report["complete"] = po.complete && error.empty();
  report["config"] = cfg.to_json(false);
  write_json_file(cfg.out / "report.json", report);
  if (!po.samples_csv.empty()) write_text_file(cfg.out / "samples.csv", po.samples_csv);
  write_json_file(cfg.out / "environments.json", {{"schema", "hbre.environment_records/1"},
                                                  {"records", po.environments}});
  write_text_file(cfg.out / "config.echo", cfg.echo());
  nlohmann::json record = {{"tool", "hbre"},
                           {"version", kToolVersion},
                           {"command", to_string(cfg.command)},
                           {"config", cfg.to_json()},
                           {"seed", cfg.seed},
                           {"workers", cfg.workers},
                           {"complete", po.complete && error.empty()},
                           {"wall_clock_seconds", seconds},
                           {"rng", po.rng},
                           {"artifacts", {"report.json", "samples.csv", "environments.json", "config.echo"}}};
  if (!error.empty()) record["error"] = error;
  write_json_file(cfg.out / "run_record.json", record);
}

}  // namespace hbre
