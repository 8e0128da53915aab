#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"
#include "safeess/expert.hpp"
#include "safeess/network.hpp"
#include "safeess/scenarios.hpp"
#include "safeess/sensitivities.hpp"
#include "safeess/training.hpp"

namespace safeess::cli {

// Network, scenarios and env settings shared by every command.
struct Workspace {
  Network net;
  Sensitivities sens;
  ScenarioSet scenarios;
  EnvConfig env_cfg;
};

Workspace load_workspace(const RunConfig& cfg);

struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int cmd_collect_expert(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);

enum class PolicyKind { kCheckpoint, kZero, kExpert };
int cmd_evaluate(const RunConfig& cfg, PolicyKind policy);

struct PowerflowRequest {
  int day = 0;   // index into the scenario set
  int step = 0;
  std::vector<double> storage_mw;  // empty = idle storage
};
int cmd_powerflow(const RunConfig& cfg, const PowerflowRequest& req);

// One (network, algorithm, seed) evaluation.
struct BenchmarkRun {
  std::string network;
  std::string algo;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  long updates = 0;
  long best_update = 0;
  double val_reward = 0.0;  // mean per validation day, EUR terms
  double val_shaped_reward = 0.0;
  int val_violations = 0;
  double test_cost_error = 0.0;
  int test_violations = 0;
  double train_seconds = 0.0;
  double latency_seconds = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRun> runs;
  std::map<std::string, double> collect_seconds;  // per network
};

BenchmarkResult run_benchmark(const RunConfig& cfg);
int cmd_benchmark(const RunConfig& cfg);

/// Writes manifest.json into `dir`: command, resolved config, and SHA-256 of
/// every input and output file listed.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs);

}  // namespace safeess::cli
