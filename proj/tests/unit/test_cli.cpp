#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "fixtures.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace safeess;
using namespace safeess::cli;
using safeess::test::data_path;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAFEESS_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("safeess_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunConfig, ParsesBundledConfigs) {
  for (const char* name : {"net6.json", "net18.json", "net34.json", "net6_week.json", "benchmark_all.json"}) {
    const RunConfig cfg = load_run_config(data_path(std::string("configs/") + name));
    EXPECT_NO_THROW(validate(cfg)) << name;
  }
  const RunConfig cfg = load_run_config(data_path("configs/net6_week.json"));
  EXPECT_EQ(cfg.scenarios.kind, ScenarioSource::Kind::kFile);
  EXPECT_TRUE(cfg.network.is_absolute());
  EXPECT_EQ(cfg.train.updates, 2000);
  EXPECT_EQ(cfg.train.td3.hidden, (std::vector<int>{64, 64}));
  EXPECT_TRUE(cfg.safety);
}

TEST(RunConfig, RoundTripsThroughJson) {
  const RunConfig cfg = load_run_config(data_path("configs/net34.json"));
  const RunConfig back = parse_run_config(cfg.to_json(), {});
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

TEST(RunConfig, Errors) {
  nlohmann::json doc = load_run_config(data_path("configs/net6.json")).to_json();
  doc["algo"] = "ppo";
  EXPECT_THROW(parse_run_config(doc, {}), ConfigError);
  doc = load_run_config(data_path("configs/net6.json")).to_json();
  doc["schema"] = 2;
  EXPECT_THROW(parse_run_config(doc, {}), ConfigError);
  doc.erase("schema");
  doc.erase("network");
  EXPECT_THROW(parse_run_config(doc, {}), ConfigError);
  RunConfig cfg = load_run_config(data_path("configs/net6.json"));
  cfg.network = "/does/not/exist.json";
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Cli, CollectTrainEvaluatePowerflow) {
  const fs::path out = scratch("pipeline");
  const std::string base = "--config " + data_path("configs/net6_week.json") + " --out " + out.string();
  ASSERT_EQ(run_cli(base + " collect-expert"), 0);
  const ExpertDataset ds = read_dataset(out / "dataset.jsonl");
  EXPECT_EQ(ds.pairs.size(), 24 * ds.days.size());
  EXPECT_GE(ds.days.size(), 4u);

  const fs::path train_out = out / "bc";
  ASSERT_EQ(run_cli("--config " + data_path("configs/net6_week.json") + " --out " + train_out.string() +
                    " train --algo bc --updates 200 --dataset " + (out / "dataset.jsonl").string()),
            0);
  ASSERT_TRUE(fs::exists(train_out / "checkpoint.json"));
  ASSERT_TRUE(fs::exists(train_out / "curve.csv"));

  const fs::path eval_out = out / "eval";
  ASSERT_EQ(run_cli("--config " + data_path("configs/net6_week.json") + " --out " + eval_out.string() +
                    " evaluate --checkpoint " + (train_out / "checkpoint.json").string()),
            0);
  const auto report = nlohmann::json::parse(slurp(eval_out / "report.json"));
  EXPECT_EQ(report.at("safety"), true);
  EXPECT_TRUE(fs::exists(eval_out / "days.csv"));
  EXPECT_TRUE(fs::exists(eval_out / "manifest.json"));

  ASSERT_EQ(run_cli(base + " powerflow --day 0 --step 12 --storage 0.05 -0.05"), 0);
  const auto pf = nlohmann::json::parse(slurp(out / "powerflow.json"));
  EXPECT_TRUE(pf.contains("solution"));
  EXPECT_LE(pf.at("max_residual").get<double>(), 1e-8);
  fs::remove_all(out);
}

TEST(Cli, SameSeedSameBytes) {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  for (const fs::path& out : {a, b}) {
    const std::string base = "--config " + data_path("configs/net6_week.json") + " --seed 3 --out " + out.string();
    ASSERT_EQ(run_cli(base + " collect-expert"), 0);
    ASSERT_EQ(run_cli(base + " evaluate --policy zero"), 0);
  }
  for (const char* f : {"dataset.jsonl", "expert_summary.csv", "report.json", "days.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run_cli("collect-expert"), 0);
  EXPECT_NE(run_cli("--config /does/not/exist.json collect-expert"), 0);
  const fs::path out = scratch("usage");
  EXPECT_EQ(run_cli("--config " + data_path("configs/net6_week.json") + " --out " + out.string() +
                    " train --algo ppo"),
            2);
  EXPECT_EQ(run_cli("--config " + data_path("configs/net6_week.json") + " --out " + out.string() +
                    " train --algo bc"),
            2);
  fs::remove_all(out);
}
