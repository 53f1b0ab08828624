#pragma once

// Command-line front end: hbre <simulate|classify|limits|verify|report> [flags]
//
// Exit codes: 0 success, 2 invalid configuration, 3 runtime failure,
// 4 acceptance failure (verify).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbre/acceptance.hpp"
#include "hbre/config.hpp"
#include "hbre/errors.hpp"
#include "hbre/pipelines.hpp"
#include "hbre/report.hpp"

namespace hbre {

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitRuntime = 3, kExitAcceptance = 4 };

struct ParsedArgs {
  Command command = Command::Simulate;
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

/// Parses argv. Throws ValidationError on bad usage; returns nullopt after --help.
inline std::optional<ParsedArgs> parse_args(int argc, const char* const* argv) {
  CLI::App app{"Heavy-tailed branching processes in random environments"};
  app.set_help_flag("-h,--help", "print help");
  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file");
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  for (const auto& k : config_keys()) {
    auto* opt = app.add_option(std::string(k.flag), values[k.key], std::string(k.help) + " [" + k.key + "]");
    opt->default_str(k.default_value);
    options.emplace_back(k.key, opt);
  }
  std::string command_name;
  for (const char* name : {"simulate", "classify", "limits", "verify", "report"}) {
    app.add_subcommand(name)->fallthrough()->callback([&command_name, name] { command_name = name; });
  }
  app.require_subcommand(1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ValidationError(std::string("usage: ") + e.what());
  }
  ParsedArgs out;
  out.command = *parse_command(command_name);
  out.config_file = config_file;
  for (const auto& [key, opt] : options) {
    if (opt->count() > 0) out.overrides[key] = values[key];
  }
  return out;
}

inline RunConfig resolve_config(const ParsedArgs& args) {
  std::map<std::string, std::string> file_values;
  if (!args.config_file.empty()) file_values = read_config_file(args.config_file);
  return build_run_config(args.command, file_values, args.overrides);
}

namespace cli_detail {

inline void flatten(const nlohmann::json& j, const std::string& prefix, std::string& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    std::string v;
    if (j.is_number_float()) {
      v = format_double(j.get<double>());
    } else if (j.is_string()) {
      v = j.get<std::string>();
    } else {
      v = j.dump();
    }
    if (v.find_first_of(",\"\n") != std::string::npos) v = nlohmann::json(v).dump();
    out += prefix + "," + v + "\n";
  }
}

}  // namespace cli_detail

/// Re-renders <out>/report.json: stable JSON in place, or a flat path,value CSV.
inline int run_report(const RunConfig& cfg, std::ostream& log) {
  const auto path = cfg.out / "report.json";
  std::ifstream f(path);
  if (!f) throw std::runtime_error("no report at " + path.string());
  const nlohmann::json j = nlohmann::json::parse(f);
  if (cfg.report_format == "csv") {
    std::string csv = "path,value\n";
    cli_detail::flatten(j, "", csv);
    write_text_file(cfg.out / "report.csv", csv);
    log << "wrote " << (cfg.out / "report.csv").string() << "\n";
  } else {
    write_json_file(path, j);
    log << "rewrote " << path.string() << "\n";
  }
  if (j.contains("complete")) log << "complete: " << j["complete"].dump() << "\n";
  return kExitOk;
}

inline int run_verify(const RunConfig& cfg, std::ostream& log) {
  AcceptanceOptions opt;
  opt.workers = cfg.workers;
  opt.seed = cfg.seed;
  opt.scratch = cfg.out / "scratch";
  AcceptanceSuite suite(opt);
  std::vector<std::string> ids = cfg.criteria;
  if (ids.empty() || (ids.size() == 1 && ids[0] == "all")) ids = AcceptanceSuite::all_ids();
  nlohmann::json results = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::object();
  bool all = true;
  for (const auto& id : ids) {
    const auto r = suite.run(id);
    log << r.line() << "\n";
    results.push_back(r.to_json());
    timings[id] = r.seconds;
    all = all && r.passed;
  }
  PipelineOutput po;
  po.report = {{"command", "verify"}, {"criteria", results}, {"all_passed", all}};
  po.rng = rng_scheme();
  std::filesystem::create_directories(cfg.out);
  write_outputs(cfg, po, 0.0);
  // timings only in the run record
  const auto record_path = cfg.out / "run_record.json";
  std::ifstream rf(record_path);
  nlohmann::json record = nlohmann::json::parse(rf);
  record["criterion_seconds"] = timings;
  write_json_file(record_path, record);
  return all ? kExitOk : kExitAcceptance;
}

/// Runs one command end to end and returns its exit code.
inline int dispatch(const RunConfig& cfg, std::ostream& log = std::cout) {
  if (cfg.command == Command::Report) return run_report(cfg, log);
  if (cfg.command == Command::Verify) return run_verify(cfg, log);
  std::filesystem::create_directories(cfg.out);
  // mark the directory incomplete until the run finishes
  write_json_file(cfg.out / "run_record.json",
                  {{"tool", "hbre"}, {"command", to_string(cfg.command)}, {"complete", false}, {"config", cfg.to_json()}});
  const auto t0 = std::chrono::steady_clock::now();
  PipelineOutput po;
  switch (cfg.command) {
    case Command::Simulate: po = run_simulate(cfg); break;
    case Command::Classify: po = run_classify(cfg); break;
    case Command::Limits: po = run_limits(cfg); break;
    default: break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs(cfg, po, seconds);
  log << to_string(cfg.command) << ": wrote " << cfg.out.string() << " in " << seconds << " s"
      << (po.complete ? "" : " (incomplete)") << "\n";
  return kExitOk;
}

/// main() body: parses, dispatches and maps exceptions to exit codes.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    const auto args = parse_args(argc, argv);
    if (!args) return kExitOk;
    const RunConfig cfg = resolve_config(*args);
    return dispatch(cfg, log);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace hbre
