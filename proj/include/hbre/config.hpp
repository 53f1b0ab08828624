#pragma once

// Run configuration.
//
// File format: one `key = value` per line, `#` starts a comment, keys are
// flat with dotted namespaces. Every key has exactly one command-line flag;
// flags override file values, which override defaults.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbre/assumptions.hpp"
#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/limitlab.hpp"
#include "hbre/regularity.hpp"
#include "hbre/report.hpp"

namespace hbre {

struct ConfigKey {
  const char* key;
  const char* flag;
  const char* default_value;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model.kind", "--model", "sibuya_uniform", "sibuya_uniform (alias sibuya) or finite_mixture (alias mixture)"},
      {"model.alpha_min", "--alpha-min", "0.2", "lower end of the uniform alpha law"},
      {"model.alpha_max", "--alpha-max", "0.7", "upper end of the uniform alpha law, < 1"},
      {"model.laws", "--laws", "", "mixture laws, e.g. sibuya:0.5;pmf:0,0.5,0.5"},
      {"model.probs", "--probs", "", "mixture probabilities, comma separated"},
      {"model.relax_a1", "--relax-a1", "false", "admit laws with p_0 > 0 or p_1 = 1 (outside the theory)"},
      {"seed", "--seed", "42", "base seed"},
      {"replicates", "--replicates", "2000", "number of replicates"},
      {"generations", "--generations", "40", "generations to simulate / n_max of the Y rule"},
      {"workers", "--workers", "0", "worker threads, 0 = hardware concurrency"},
      {"out", "--out", "out", "output directory"},
      {"s_grid", "--s-grid", "0.25,0.5,1,2,4", "s values"},
      {"sim.exact_budget", "--exact-budget", "1000000", "largest count stepped particle by particle"},
      {"sim.asymptotic", "--asymptotic", "true", "use the stable-limit step beyond the budget"},
      {"sim.y_tol", "--y-tol", "1e-4", "Y stabilization tolerance"},
      {"sim.fixed_env", "--fixed-env", "-1", "simulate: environment index shared by all replicates, -1 = own env each"},
      {"classify.environments", "--environments", "100", "sampled environments for classify"},
      {"classify.n_max", "--classify-n-max", "200", "generations inspected per point"},
      {"classify.regular_threshold", "--regular-threshold", "-40", "log Q-product threshold"},
      {"classify.ratio_grid", "--ratio-grid", "0.25,0.5,0.75", "fractions t/s for h-ratios"},
      {"classify.slope_window", "--slope-window", "10", "points in the slope fit"},
      {"classify.slope_tol", "--slope-tol", "1e-3", "slope below which a ratio counts as settled"},
      {"probe.n_probe", "--probe-n", "30", "defect-ratio depth"},
      {"probe.replicates", "--probe-replicates", "10", "environments probed for the defect ratio"},
      {"probe.s_grid", "--probe-s-grid", "0.5,1,2", "s values for the defect ratio"},
      {"scheme.u", "--scheme-u", "log", "log or log1p"},
      {"scheme.c", "--scheme-c", "sibuya_product",
       "sibuya_product, unit, linear, double_exponential or reciprocal_h"},
      {"scheme.k", "--scheme-k", "1", "K of double_exponential"},
      {"scheme.s0", "--scheme-s0", "1", "s0 of reciprocal_h"},
      {"atoms.s", "--atoms-s", "0.69314718055994531", "s for the W-atom split"},
      {"atoms.replicates", "--atoms-replicates", "10000", "paths for the W-atom split"},
      {"atoms.generations", "--atoms-generations", "30", "generation at which atoms are read"},
      {"atoms.dead_band", "--dead-band", "5", "half width of the ambiguous band of log Z_n + log h_n"},
      {"fe.environments", "--fe-environments", "100", "environments for the analytic functional equation"},
      {"fe.replicates", "--fe-replicates", "2000", "paths per side for the empirical functional equation"},
      {"fe.generations", "--fe-generations", "30", "generation of the empirical functional equation"},
      {"verify.criteria", "--criteria", "all", "acceptance criteria to run, e.g. AC1,AC4"},
      {"report.format", "--format", "json", "report command: json or csv"},
  };
  return keys;
}

enum class Command { Simulate, Classify, Limits, Verify, Report };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Classify: return "classify";
    case Command::Limits: return "limits";
    case Command::Verify: return "verify";
    case Command::Report: return "report";
  }
  return "?";
}

inline std::optional<Command> parse_command(const std::string& s) {
  if (s == "simulate") return Command::Simulate;
  if (s == "classify") return Command::Classify;
  if (s == "limits") return Command::Limits;
  if (s == "verify") return Command::Verify;
  if (s == "report") return Command::Report;
  return std::nullopt;
}

struct RunConfig {
  Command command = Command::Simulate;
  std::map<std::string, std::string> raw;  // effective key -> value

  ModelSpec model;
  std::uint64_t seed = 42;
  std::size_t replicates = 2000;
  std::size_t generations = 40;
  std::size_t workers = 0;
  std::filesystem::path out = "out";
  std::vector<double> s_grid;
  SimSettings sim;
  std::int64_t fixed_env = -1;
  std::size_t classify_environments = 100;
  ClassifyConfig classify;
  AssumptionProbe probe;
  NormalizationScheme scheme;
  double atoms_s = 0.0;
  std::size_t atoms_replicates = 0;
  std::size_t atoms_generations = 0;
  double atoms_dead_band = 5.0;
  std::size_t fe_environments = 100;
  std::size_t fe_replicates = 2000;
  std::size_t fe_generations = 30;
  std::vector<std::string> criteria;
  std::string report_format = "json";

  /// The effective configuration in file syntax, keys sorted.
  std::string echo() const {
    std::string out = "# command: " + std::string(to_string(command)) + "\n";
    for (const auto& [k, v] : raw) out += k + " = " + v + "\n";
    return out;
  }
  /// Without execution details (workers, out) the result only depends on what
  /// determines the numbers.
  nlohmann::json to_json(bool with_execution = true) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : raw) {
      if (!with_execution && (k == "workers" || k == "out")) continue;
      j[k] = v;
    }
    return j;
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || v.empty()) throw ValidationError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || v.empty()) throw ValidationError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || v.empty()) {
    throw ValidationError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(to_double(key, part));
  return out;
}

inline std::size_t positive(const std::string& key, std::uint64_t v) {
  if (v < 1) throw ValidationError(key + ": must be >= 1");
  return static_cast<std::size_t>(v);
}

// "sibuya:0.5;pmf:0,0.5,0.5"
inline std::vector<LawSpec> parse_laws(const std::string& key, const std::string& v) {
  std::vector<LawSpec> laws;
  for (const auto& item : split(v, ';')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError(key + ": law '" + item + "' lacks a family prefix");
    const std::string family = trim(item.substr(0, colon));
    const std::string params = item.substr(colon + 1);
    if (family == "sibuya") {
      laws.push_back(LawSpec::sibuya(to_double(key, trim(params))));
    } else if (family == "pmf") {
      laws.push_back(LawSpec::pmf(to_doubles(key, params)));
    } else {
      throw ValidationError(key + ": unknown law family '" + family + "'");
    }
  }
  return laws;
}

inline const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_keys()) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

}  // namespace config_detail

/// Reads `key = value` lines; unknown or repeated keys are rejected with file and line.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config file not found: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string key = config_detail::trim(line.substr(0, eq));
    if (!config_detail::find_key(key)) throw ValidationError(where + ": unknown key '" + key + "'");
    if (out.count(key)) throw ValidationError(where + ": key '" + key + "' given twice");
    out[key] = config_detail::trim(line.substr(eq + 1));
  }
  return out;
}

/// Validates and converts the merged key set. `overrides` win over `file_values`.
inline RunConfig build_run_config(Command command, const std::map<std::string, std::string>& file_values,
                                  const std::map<std::string, std::string>& overrides) {
  using namespace config_detail;
  RunConfig cfg;
  cfg.command = command;
  for (const auto& k : config_keys()) cfg.raw[k.key] = k.default_value;
  for (const auto* src : {&file_values, &overrides}) {
    for (const auto& [k, v] : *src) {
      if (!find_key(k)) throw ValidationError("unknown key '" + k + "'");
      cfg.raw[k] = v;
    }
  }
  auto get = [&](const char* k) -> const std::string& { return cfg.raw.at(k); };

  std::string kind = get("model.kind");
  if (kind == "sibuya") kind = "sibuya_uniform";
  if (kind == "mixture") kind = "finite_mixture";
  cfg.raw["model.kind"] = kind;
  cfg.seed = to_uint("seed", get("seed"));
  cfg.model.base_seed = cfg.seed;
  cfg.model.policy = to_bool("model.relax_a1", get("model.relax_a1")) ? AssumptionPolicy::Relaxed
                                                                       : AssumptionPolicy::Enforce;
  if (kind == "sibuya_uniform") {
    cfg.model.kind = SibuyaUniformSpec{to_double("model.alpha_min", get("model.alpha_min")),
                                       to_double("model.alpha_max", get("model.alpha_max"))};
  } else if (kind == "finite_mixture") {
    FiniteMixtureSpec mix;
    mix.laws = parse_laws("model.laws", get("model.laws"));
    mix.probs = to_doubles("model.probs", get("model.probs"));
    cfg.model.kind = mix;
  } else {
    throw ValidationError("model.kind: expected sibuya_uniform or finite_mixture, got '" + kind + "'");
  }
  try {
    (void)build_model(cfg.model);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }

  cfg.replicates = positive("replicates", to_uint("replicates", get("replicates")));
  cfg.generations = static_cast<std::size_t>(to_uint("generations", get("generations")));
  cfg.workers = static_cast<std::size_t>(to_uint("workers", get("workers")));
  if (cfg.workers == 0) cfg.workers = default_workers();
  cfg.out = get("out");
  if (cfg.out.empty()) throw ValidationError("out: must not be empty");
  cfg.s_grid = to_doubles("s_grid", get("s_grid"));
  if (cfg.s_grid.empty()) throw ValidationError("s_grid: must not be empty");
  for (double s : cfg.s_grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("s_grid: entries must be > 0");
  }

  cfg.sim.step.exact_budget = positive("sim.exact_budget", to_uint("sim.exact_budget", get("sim.exact_budget")));
  cfg.sim.step.asymptotic_enabled = to_bool("sim.asymptotic", get("sim.asymptotic"));
  cfg.sim.rule.y_tol = to_double("sim.y_tol", get("sim.y_tol"));
  if (!(cfg.sim.rule.y_tol > 0.0)) throw ValidationError("sim.y_tol: must be > 0");
  cfg.sim.rule.n_max = positive("generations", cfg.generations);
  cfg.sim.workers = cfg.workers;
  cfg.fixed_env = to_int("sim.fixed_env", get("sim.fixed_env"));
  if (cfg.fixed_env < -1) throw ValidationError("sim.fixed_env: must be -1 or a replicate index");

  cfg.classify_environments =
      positive("classify.environments", to_uint("classify.environments", get("classify.environments")));
  cfg.classify.n_max = positive("classify.n_max", to_uint("classify.n_max", get("classify.n_max")));
  cfg.classify.regular_threshold = to_double("classify.regular_threshold", get("classify.regular_threshold"));
  if (!(cfg.classify.regular_threshold < 0.0)) throw ValidationError("classify.regular_threshold: must be < 0");
  cfg.classify.ratio_grid = to_doubles("classify.ratio_grid", get("classify.ratio_grid"));
  for (double f : cfg.classify.ratio_grid) {
    if (!(f > 0.0 && f < 1.0)) throw ValidationError("classify.ratio_grid: fractions must lie in (0,1)");
  }
  cfg.classify.slope_window = positive("classify.slope_window", to_uint("classify.slope_window", get("classify.slope_window")));
  if (cfg.classify.slope_window < 2) throw ValidationError("classify.slope_window: must be >= 2");
  cfg.classify.slope_tol = to_double("classify.slope_tol", get("classify.slope_tol"));
  if (!(cfg.classify.slope_tol > 0.0)) throw ValidationError("classify.slope_tol: must be > 0");

  cfg.probe.n_probe = positive("probe.n_probe", to_uint("probe.n_probe", get("probe.n_probe")));
  cfg.probe.replicates = positive("probe.replicates", to_uint("probe.replicates", get("probe.replicates")));
  cfg.probe.s_grid = to_doubles("probe.s_grid", get("probe.s_grid"));

  const std::string u = get("scheme.u");
  if (u == "log") {
    cfg.scheme.u = UKind::Log;
  } else if (u == "log1p") {
    cfg.scheme.u = UKind::Log1p;
  } else {
    throw ValidationError("scheme.u: expected log or log1p, got '" + u + "'");
  }
  const std::string c = get("scheme.c");
  if (c == "sibuya_product") {
    cfg.scheme.c = CRule::SibuyaProduct;
  } else if (c == "unit") {
    cfg.scheme.c = CRule::Unit;
  } else if (c == "linear") {
    cfg.scheme.c = CRule::Linear;
  } else if (c == "double_exponential") {
    cfg.scheme.c = CRule::DoubleExponential;
  } else if (c == "reciprocal_h") {
    cfg.scheme.c = CRule::ReciprocalH;
  } else {
    throw ValidationError("scheme.c: unknown rule '" + c + "'");
  }
  cfg.scheme.k = to_double("scheme.k", get("scheme.k"));
  cfg.scheme.s0 = to_double("scheme.s0", get("scheme.s0"));
  try {
    cfg.scheme.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("scheme: ") + e.what());
  }

  cfg.atoms_s = to_double("atoms.s", get("atoms.s"));
  if (!(cfg.atoms_s > 0.0)) throw ValidationError("atoms.s: must be > 0");
  cfg.atoms_replicates = positive("atoms.replicates", to_uint("atoms.replicates", get("atoms.replicates")));
  cfg.atoms_generations = static_cast<std::size_t>(to_uint("atoms.generations", get("atoms.generations")));
  cfg.atoms_dead_band = to_double("atoms.dead_band", get("atoms.dead_band"));
  if (!(cfg.atoms_dead_band >= 0.0)) throw ValidationError("atoms.dead_band: must be >= 0");

  cfg.fe_environments = positive("fe.environments", to_uint("fe.environments", get("fe.environments")));
  cfg.fe_replicates = positive("fe.replicates", to_uint("fe.replicates", get("fe.replicates")));
  cfg.fe_generations = static_cast<std::size_t>(to_uint("fe.generations", get("fe.generations")));

  for (const auto& id : split(get("verify.criteria"), ',')) {
    if (id.empty()) continue;
    const bool known = id == "all" || (id.size() >= 3 && id.compare(0, 2, "AC") == 0 &&
                                       id.find_first_not_of("0123456789", 2) == std::string::npos &&
                                       std::stoi(id.substr(2)) >= 1 && std::stoi(id.substr(2)) <= 10);
    if (!known) throw ValidationError("verify.criteria: unknown criterion '" + id + "' (expected all or AC1..AC10)");
    cfg.criteria.push_back(id);
  }
  cfg.report_format = get("report.format");
  if (cfg.report_format != "json" && cfg.report_format != "csv") {
    throw ValidationError("report.format: expected json or csv");
  }

  if ((command == Command::Limits) && cfg.replicates < 100) {
    throw ValidationError("replicates: limits needs at least 100");
  }
  return cfg;
}

}  // namespace hbre
