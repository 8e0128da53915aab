#include <filesystem>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safeess/training.hpp"

using namespace safeess;
using safeess::test::data_path;

namespace {

// Small net3 workspace with its expert dataset, shared by the suite.
struct Net3 {
  Network net;
  Sensitivities sens;
  ScenarioSet set;
  EnvConfig env_cfg;
  CollectResult collect;
  std::map<std::string, double> expert_costs;

  Net3() {
    net = load_network(data_path("networks/net3.json"));
    sens = build_sensitivities(net);
    GeneratorConfig gen;
    gen.days = 20;
    gen.peak_load_mw = {0.05};
    set = generate_synthetic(net, gen, 3);
    env_cfg.norm = fit_normalization(net, set.in(Split::kTrain));
    collect = collect_dataset(net, sens, set.in(Split::kTrain), env_cfg);
    const CollectResult test = collect_dataset(net, sens, set.in(Split::kTest), env_cfg);
    for (const auto& s : test.summary) {
      if (s.status == "ok") expert_costs[s.date] = s.replay_cost_eur;
    }
  }
};

const Net3& net3() {
  static const Net3 w;
  return w;
}

TrainConfig quick(Algo algo, long updates) {
  TrainConfig cfg;
  cfg.algo = algo;
  cfg.updates = updates;
  cfg.eval_every = updates / 4;
  cfg.warmup_steps = 200;
  cfg.td3.hidden = {32, 32};
  cfg.td3.batch_size = 64;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST(Training, AlgoNames) {
  for (Algo a : {Algo::kTd3, Algo::kBc, Algo::kTd3Bc}) EXPECT_EQ(algo_from_string(to_string(a)), a);
  EXPECT_THROW(algo_from_string("ppo"), std::invalid_argument);
}

TEST(Training, ExpertReplayHasZeroCostError) {
  const Net3& w = net3();
  std::map<std::string, Eigen::MatrixXd> schedules;
  const CollectResult test = collect_dataset(w.net, w.sens, w.set.in(Split::kTest), w.env_cfg);
  for (std::size_t i = 0; i < test.summary.size(); ++i) {
    if (test.summary[i].status == "ok") schedules[test.summary[i].date] = test.trajectories[i].actions;
  }
  ASSERT_FALSE(schedules.empty());
  Env env(w.net, w.env_cfg);
  ExpertReplayPolicy policy(schedules);
  const EvalReport rep = evaluate(env, policy, w.set.in(Split::kTest), nullptr, &w.expert_costs);
  ASSERT_TRUE(rep.mean_cost_error().has_value());
  EXPECT_NEAR(*rep.mean_cost_error(), 0.0, 1e-12);
  EXPECT_EQ(rep.violations_total(), 0);
}

TEST(Training, ZeroPolicyReport) {
  const Net3& w = net3();
  Env env(w.net, w.env_cfg);
  ZeroPolicy zero;
  const EvalReport rep = evaluate(env, zero, w.set.in(Split::kVal), nullptr);
  ASSERT_EQ(rep.days.size(), w.set.in(Split::kVal).size());
  for (const auto& d : rep.days) {
    EXPECT_NEAR(d.reward, -d.cost_eur, 1e-9);
    EXPECT_NEAR(d.shaped_reward, d.reward - d.penalty, 1e-9);
  }
  EXPECT_FALSE(rep.to_json().contains("decision_seconds"));
}

TEST(Training, BcTracksExpert) {
  const Net3& w = net3();
  Env env(w.net, w.env_cfg);
  const TrainResult tr =
      train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), quick(Algo::kBc, 3000), &w.collect.dataset, nullptr);
  EXPECT_EQ(tr.curve.size(), 4u);
  AgentPolicy policy(tr.agent);
  const EvalReport rep = evaluate(env, policy, w.set.in(Split::kTest), nullptr, &w.expert_costs);
  ASSERT_TRUE(rep.mean_cost_error().has_value());
  EXPECT_LT(std::abs(*rep.mean_cost_error()), 0.10);
}

TEST(Training, DeterministicAndCheckpointRoundTrip) {
  const Net3& w = net3();
  Env env(w.net, w.env_cfg);
  const TrainConfig cfg = quick(Algo::kTd3Bc, 400);
  const TrainResult a = train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), cfg, &w.collect.dataset, nullptr);
  const TrainResult b = train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), cfg, &w.collect.dataset, nullptr);
  EXPECT_EQ(a.agent.actor.parameters(), b.agent.actor.parameters());
  EXPECT_EQ(a.best_val_reward, b.best_val_reward);

  Checkpoint ck{"td3bc", network_hash(w.net), w.env_cfg.norm, cfg, a.agent};
  const auto path = std::filesystem::temp_directory_path() / "safeess_ckpt_test.json";
  write_checkpoint(path, ck);
  const Checkpoint back = read_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.algo, "td3bc");
  EXPECT_EQ(back.network_hash, ck.network_hash);
  EXPECT_EQ(back.norm, ck.norm);
  EXPECT_EQ(back.agent.actor.parameters(), a.agent.actor.parameters());
  EXPECT_EQ(back.config.to_json(), cfg.to_json());
}

TEST(Training, OnlineTd3Runs) {
  const Net3& w = net3();
  Env env(w.net, w.env_cfg);
  const SafetyParams sp = make_safety_params(w.net, w.sens);
  TrainConfig cfg = quick(Algo::kTd3, 200);
  cfg.safety_in_training = true;
  const TrainResult tr = train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), cfg, nullptr, &sp);
  EXPECT_EQ(tr.env_steps, 200 + 199);
  EXPECT_EQ(tr.curve.back().val_violations, 0);
}

TEST(Training, RejectsMismatchedDataset) {
  const Net3& w = net3();
  Env env(w.net, w.env_cfg);
  ExpertDataset ds = w.collect.dataset;
  ds.network_hash = "elsewhere";
  EXPECT_THROW(train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), quick(Algo::kBc, 10), &ds, nullptr),
               std::invalid_argument);
  EXPECT_THROW(train(env, w.set.in(Split::kTrain), w.set.in(Split::kVal), quick(Algo::kBc, 10), nullptr, nullptr),
               std::invalid_argument);
}
