#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "hbre/cli.hpp"
#include "hbre/config.hpp"
#include "hbre/report.hpp"

using namespace hbre;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "hbre-tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run(std::vector<std::string> args, std::string* err_out = nullptr) {
  args.insert(args.begin(), "hbre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), log, err);
  if (err_out) *err_out = err.str();
  return rc;
}

}  // namespace

TEST(ParseConfig, MinimalFlags) {
  const char* argv[] = {"hbre", "simulate", "--model", "sibuya", "--alpha-min", "0.2", "--alpha-max", "0.7",
                        "--seed", "42", "--replicates", "100"};
  const auto args = parse_args(12, argv);
  ASSERT_TRUE(args.has_value());
  const auto cfg = resolve_config(*args);
  EXPECT_EQ(cfg.command, Command::Simulate);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.replicates, 100u);
  EXPECT_EQ(cfg.generations, 40u);
  EXPECT_EQ(cfg.s_grid, (std::vector<double>{0.25, 0.5, 1, 2, 4}));
  EXPECT_TRUE(std::holds_alternative<SibuyaUniformSpec>(cfg.model.kind));
}

TEST(ParseConfig, AlphaMaxOneRejected) {
  std::string err;
  EXPECT_EQ(run({"simulate", "--alpha-max", "1.0"}, &err), kExitValidation);
  EXPECT_NE(err.find("alpha must be < 1"), std::string::npos) << err;
}

TEST(ParseConfig, UnknownFileKeyRejectedWithLocation) {
  const auto dir = scratch("unknown-key");
  const auto file = dir / "run.cfg";
  std::ofstream(file) << "# comment\nseed = 3\nmodel.alpha_mux = 0.5\n";
  std::string err;
  EXPECT_EQ(run({"simulate", "--config", file.string()}, &err), kExitValidation);
  EXPECT_NE(err.find("run.cfg:3"), std::string::npos) << err;
  EXPECT_NE(err.find("model.alpha_mux"), std::string::npos) << err;
}

TEST(ParseConfig, FlagsOverrideFile) {
  const auto dir = scratch("override");
  const auto file = dir / "run.cfg";
  std::ofstream(file) << "seed = 3\nreplicates = 150\n";
  const std::string path = file.string();
  const char* argv[] = {"hbre", "limits", "--config", path.c_str(), "--seed", "9"};
  const auto cfg = resolve_config(*parse_args(6, argv));
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.replicates, 150u);
}

TEST(ParseConfig, RangeErrors) {
  EXPECT_EQ(run({"limits", "--replicates", "50"}), kExitValidation);
  EXPECT_EQ(run({"simulate", "--replicates", "abc"}), kExitValidation);
  EXPECT_EQ(run({"simulate", "--exact-budget", "0"}), kExitValidation);
  EXPECT_EQ(run({"simulate", "--s-grid", "1,-2"}), kExitValidation);
  EXPECT_EQ(run({"simulate", "--no-such-flag", "1"}), kExitValidation);
  EXPECT_EQ(run({}), kExitValidation);
  EXPECT_EQ(run({"simulate", "--model", "mixture", "--laws", "pmf:0.1,0.9", "--probs", "1"}), kExitValidation);
}

TEST(ParseConfig, EveryKeyHasOneFlag) {
  std::set<std::string> flags, keys;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(flags.insert(k.flag).second) << k.flag;
    EXPECT_TRUE(keys.insert(k.key).second) << k.key;
  }
}

TEST(Dispatch, SimulateArtifactsAndDeterminism) {
  const auto a = scratch("sim-a"), b = scratch("sim-b");
  const std::vector<std::string> common = {"simulate", "--replicates", "30", "--generations", "8", "--seed", "5"};
  auto with = [&](const fs::path& out, const std::string& workers) {
    auto v = common;
    v.insert(v.end(), {"--out", out.string(), "--workers", workers});
    return v;
  };
  ASSERT_EQ(run(with(a, "1")), kExitOk);
  ASSERT_EQ(run(with(b, "4")), kExitOk);
  for (const char* f : {"report.json", "samples.csv", "environments.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(report["complete"], true);
  EXPECT_EQ(report["config"]["seed"], "5");
  const auto record = nlohmann::json::parse(slurp(a / "run_record.json"));
  EXPECT_EQ(record["complete"], true);
  EXPECT_TRUE(record.contains("wall_clock_seconds"));
  EXPECT_TRUE(record["rng"].contains("draws"));
  const auto csv = slurp(a / "samples.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "replicate,n,mode,count_or_log_count,Y_n,log_X_n@0.25,log_X_n@0.5,log_X_n@1,log_X_n@2,log_X_n@4");
  EXPECT_TRUE(fs::exists(a / "config.echo"));
  const auto envs = nlohmann::json::parse(slurp(a / "environments.json"));
  EXPECT_EQ(envs["records"].size(), 30u);
}

TEST(Dispatch, PartialRunIsMarkedIncomplete) {
  const auto out = scratch("partial");
  ASSERT_EQ(run({"simulate", "--replicates", "10", "--generations", "10", "--exact-budget", "10", "--asymptotic",
                 "false", "--out", out.string()}),
            kExitOk);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["complete"], false);
  EXPECT_GT(report["truncated"].get<int>(), 0);
}

TEST(Dispatch, ClassifyExampleAllRegular) {
  const auto out = scratch("classify");
  ASSERT_EQ(run({"classify", "--environments", "20", "--out", out.string()}), kExitOk);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["point_counts"]["regular"], 100);
  EXPECT_EQ(report["process_counts"]["regular"], 20);
  EXPECT_EQ(report["assumptions"]["a1"], "pass");
  EXPECT_EQ(report["assumptions"]["a2"], "consistent");
  EXPECT_EQ(report["sufficient_criterion"]["holds"], true);
}

TEST(Dispatch, LimitsPopulatesKsAndReportCsv) {
  const auto out = scratch("limits");
  ASSERT_EQ(run({"limits", "--replicates", "150", "--atoms-replicates", "300", "--fe-replicates", "200",
                 "--fe-environments", "5", "--out", out.string()}),
            kExitOk);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(report["y"]["ks_uniform"].contains("D"));
  EXPECT_TRUE(report["y"]["ks_exponential"].contains("D"));
  EXPECT_TRUE(report["normalized"]["ks_exponential"].contains("D"));
  EXPECT_EQ(report["taxonomy"]["case"], "b");
  const auto csv = slurp(out / "samples.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "replicate,seed,final_n,mode,stabilized,Y,T,U_over_c");

  const auto before = slurp(out / "report.json");
  ASSERT_EQ(run({"report", "--out", out.string()}), kExitOk);
  EXPECT_EQ(slurp(out / "report.json"), before);
  ASSERT_EQ(run({"report", "--out", out.string(), "--format", "csv"}), kExitOk);
  const auto flat = slurp(out / "report.csv");
  EXPECT_EQ(flat.substr(0, flat.find('\n')), "path,value");
  EXPECT_NE(flat.find("\ny.ks_uniform.D,"), std::string::npos);
}

TEST(Dispatch, ReportWithoutRunIsRuntimeError) {
  const auto out = scratch("empty");
  EXPECT_EQ(run({"report", "--out", out.string()}), kExitRuntime);
}

TEST(Dispatch, VerifySubset) {
  const auto out = scratch("verify");
  ASSERT_EQ(run({"verify", "--criteria", "AC4,AC8", "--out", out.string()}), kExitOk);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["all_passed"], true);
  EXPECT_EQ(report["criteria"].size(), 2u);
  EXPECT_EQ(run({"verify", "--criteria", "AC99", "--out", out.string()}), kExitValidation);
}

TEST(Report, StableJsonFormatting) {
  nlohmann::json j = {{"b", 0.1}, {"a", {1.0, 2.5}}, {"c", {{"z", INFINITY}, {"y", "t"}}}, {"n", 3}};
  EXPECT_EQ(to_stable_json(j),
            "{\n  \"a\": [1, 2.5],\n  \"b\": 0.10000000000000001,\n  \"c\": {\n    \"y\": \"t\",\n    \"z\": \"inf\"\n  },\n"
            "  \"n\": 3\n}\n");
  EXPECT_EQ(to_stable_json(j), to_stable_json(nlohmann::json::parse(to_stable_json(j).replace(0, 0, ""))));
  // 17 significant digits round-trip
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324}) EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
}
