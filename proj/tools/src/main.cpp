#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace safeess::cli;

int main(int argc, char** argv) {
  CLI::App app{"Storage dispatch with imitation learning and a voltage safety layer"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out, "Output directory");

  auto* collect = app.add_subcommand("collect-expert", "Solve the training days and write the expert dataset");

  auto* train = app.add_subcommand("train", "Train an agent");
  std::string algo;
  std::string dataset;
  std::optional<long> updates;
  train->add_option("--algo", algo, "td3, safe-td3, bc, td3bc or safe-td3bc");
  train->add_option("--dataset", dataset, "Expert dataset (bc, td3bc)")->check(CLI::ExistingFile);
  train->add_option("--updates", updates, "Number of gradient updates");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy on the test split");
  std::string checkpoint;
  std::string policy = "checkpoint";
  bool no_safety = false;
  bool safety = false;
  evaluate->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--policy", policy, "checkpoint, zero or expert")
      ->check(CLI::IsMember({"checkpoint", "zero", "expert"}));
  evaluate->add_flag("--no-safety", no_safety, "Disable the safety layer");
  evaluate->add_flag("--safety", safety, "Enable the safety layer");

  auto* bench = app.add_subcommand("benchmark", "Train and evaluate every algorithm over seeds and networks");
  std::optional<int> jobs;
  bench->add_option("--jobs", jobs, "Parallel training units");

  auto* pf = app.add_subcommand("powerflow", "One AC power-flow solve");
  PowerflowRequest req;
  pf->add_option("--day", req.day, "Day index in the scenario set");
  pf->add_option("--step", req.step, "Time step");
  pf->add_option("--storage", req.storage_mw, "Storage power per ESS (MW, charging positive)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (!algo.empty()) cfg.algo = algo;
    if (!dataset.empty()) cfg.dataset = dataset;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (updates) cfg.train.updates = *updates;
    if (no_safety) cfg.safety = false;
    if (safety) cfg.safety = true;
    if (jobs) cfg.benchmark.jobs = *jobs;
    if (!algo.empty()) cfg = parse_run_config(cfg.to_json(), {});  // re-validates the algo name

    if (*collect) return cmd_collect_expert(cfg);
    if (*train) return cmd_train(cfg);
    if (*evaluate) {
      const PolicyKind kind = policy == "zero"     ? PolicyKind::kZero
                              : policy == "expert" ? PolicyKind::kExpert
                                                   : PolicyKind::kCheckpoint;
      return cmd_evaluate(cfg, kind);
    }
    if (*bench) return cmd_benchmark(cfg);
    if (*pf) return cmd_powerflow(cfg, req);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
