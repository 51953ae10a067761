#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "photofab/cli.hpp"
#include "photofab/config.hpp"

namespace photofab {
namespace {

namespace fs = std::filesystem;

const std::string kData = PHOTOFAB_TEST_DATA;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "photofab");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("photofab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Config, DefaultsValidate) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.workload.distribution.size(), 4u);
  EXPECT_EQ(c.cluster.racks_count, 64);
}

TEST(Config, ReadsIniFile) {
  const ExperimentConfig c = load_config(kData + "/example.ini");
  EXPECT_EQ(c.cluster.racks_count, 4);
  EXPECT_EQ(c.cluster.placement, Placement::kChip);
  EXPECT_EQ(c.workload.trials, 2);
  EXPECT_EQ(c.workload.max_failures, 20);
  ASSERT_EQ(c.workload.distribution.size(), 2u);
  EXPECT_EQ(c.workload.distribution[1].shape, (Extent3{2, 2, 2}));
  EXPECT_DOUBLE_EQ(c.cost.compute_share, 0.5);
  EXPECT_EQ(c.cluster.ports_per_tpu, 6);
}

TEST(Config, JsonEchoRoundTrips) {
  ExperimentConfig c = load_config(kData + "/example.ini");
  c.cluster.loss_budget = 7.5;
  c.workload.shuffle_fill = false;
  const nlohmann::json doc = to_json(c);
  EXPECT_EQ(to_json(config_from_json(doc)), doc);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_ini_config("[cluster]\nracks = 4\n"), ConfigError);
  EXPECT_THROW(parse_ini_config("[cluster]\nracks_count = four\n"), ConfigError);
  EXPECT_THROW(parse_ini_config("[cluster]\nserver_dims = 3x2x1\n"), ConfigError);
  EXPECT_THROW(parse_ini_config("[workload]\ndistribution = 2x2x1:0.4\n"), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"cost", {{"grad", 1}}}}), ConfigError);
  EXPECT_THROW(load_config(kData + "/missing.ini"), ConfigError);
}

TEST(Config, ParsesDistribution) {
  const auto d = parse_distribution("2x2x1:0.25, 2x4x4:0.75");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[1].shape, (Extent3{2, 4, 4}));
  EXPECT_DOUBLE_EQ(d[1].probability, 0.75);
  EXPECT_EQ(parse_distribution(to_string(d)).size(), 2u);
  EXPECT_THROW(parse_distribution("2x2x1"), ConfigError);
}

TEST(Cli, CostBreakdownForOneRingSlice) {
  const CliRun r = run_cli({"cost", "4x2x1", "baseline", "1e9"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string header, rs;
  std::getline(lines, header);
  std::getline(lines, rs);
  EXPECT_EQ(header, "slice,mode,collective,fraction,alpha_steps,beta_bytes,reconfigs,seconds");
  EXPECT_EQ(rs.rfind("4x2x1,baseline,reduce_scatter,0.333", 0), 0u) << rs;
  EXPECT_NE(r.out.find("all_reduce"), std::string::npos);
  EXPECT_EQ(r.out.find("setup"), std::string::npos);
}

TEST(Cli, CostAddsSetupRowForOptics) {
  const CliRun r = run_cli({"cost", "2x2x2", "morphlux", "1e9", "--format", "json"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["rows"].size(), 4u);
  EXPECT_EQ(doc["rows"][3][2], "setup");
  EXPECT_EQ(doc["rows"][3][6], 1);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"teleport"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"experiment", "e9"}).code, cli::kExitUsage);
  const CliRun bad = run_cli({"cost", "4x2", "baseline", "1"});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(run_cli({"--config", kData + "/nope.ini", "fill"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"solve", kData + "/nope.json"}).code, cli::kExitUsage);
}

TEST(Cli, SolveReportsOverCapacity) {
  const CliRun r = run_cli({"solve", kData + "/bridge.json"});
  EXPECT_EQ(r.code, cli::kExitInfeasible);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["status"], "over_capacity");
  EXPECT_EQ(doc["z"], 8);
  EXPECT_EQ(doc["over_capacity_edges"], nlohmann::json::array({3}));
}

TEST(Cli, SolveFeasibleLine) {
  const fs::path dir = scratch_dir("solve");
  const CliRun r = run_cli({"--out", dir.string(), "solve", kData + "/line.json"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir / "solution.json"));
  EXPECT_EQ(doc["status"], "ok");
  EXPECT_EQ(doc["routes"][0]["path"], nlohmann::json::array({0, 1, 2}));
  fs::remove_all(dir);
}

TEST(Cli, FillAndChurnUseConfig) {
  const CliRun fill = run_cli({"--config", kData + "/example.ini", "--seed", "3", "fill"});
  ASSERT_EQ(fill.code, cli::kExitOk) << fill.err;
  EXPECT_EQ(fill.out.rfind("slice,rack,shape,x,y,z,size\n", 0), 0u);
  const CliRun churn =
      run_cli({"--config", kData + "/example.ini", "churn", "--fraction", "0.5"});
  ASSERT_EQ(churn.code, cli::kExitOk) << churn.err;
  // Header plus one row per rack.
  EXPECT_EQ(std::count(churn.out.begin(), churn.out.end(), '\n'), 5);
}

TEST(Cli, ExperimentFilesAreReproducible) {
  const fs::path a = scratch_dir("e2a");
  const fs::path b = scratch_dir("e2b");
  for (const fs::path& dir : {a, b}) {
    const CliRun r = run_cli({"--config", kData + "/example.ini", "--seed", "7", "--out",
                           dir.string(), "experiment", "e2"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  }
  EXPECT_FALSE(slurp(a / "e2.csv").empty());
  EXPECT_EQ(slurp(a / "e2.csv"), slurp(b / "e2.csv"));
  EXPECT_EQ(slurp(a / "e2.summary.json"), slurp(b / "e2.summary.json"));
  const auto summary = nlohmann::json::parse(slurp(a / "e2.summary.json"));
  EXPECT_EQ(summary["seed"], 7);
  EXPECT_EQ(summary["config"]["cluster"]["racks_count"], 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // namespace
}  // namespace photofab
