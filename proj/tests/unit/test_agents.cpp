#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "safeess/agents.hpp"

using namespace safeess;

namespace {

Td3Config small_config() {
  Td3Config cfg;
  cfg.hidden = {32, 32};
  cfg.batch_size = 64;
  cfg.policy_delay = 1;
  cfg.lr = 1e-3;
  return cfg;
}

Batch random_batch(int obs, int act, Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto fill = [&](Eigen::Index r) {
    Eigen::MatrixXd m(r, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  Batch b;
  b.s = fill(obs);
  b.a = fill(act);
  b.r = fill(1).row(0);
  b.s_next = fill(obs);
  b.done = Eigen::RowVectorXd::Zero(n);
  return b;
}

Agent unit_agent(int obs, int act, const Td3Config& cfg, std::uint64_t seed) {
  return make_agent(obs, Eigen::VectorXd::Constant(act, -1.0), Eigen::VectorXd::Constant(act, 1.0), cfg, seed);
}

bool same_networks(const Agent& a, const Agent& b) {
  return a.actor.parameters() == b.actor.parameters() && a.critic1.parameters() == b.critic1.parameters() &&
         a.critic2.parameters() == b.critic2.parameters() &&
         a.actor_target.parameters() == b.actor_target.parameters() &&
         a.critic1_target.parameters() == b.critic1_target.parameters() &&
         a.critic2_target.parameters() == b.critic2_target.parameters();
}

// One-step bandit: constant observation, reward -(a - 0.3)^2.
ReplayBuffer bandit_buffer(std::size_t n, std::mt19937_64& rng, double expert = std::nan("")) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ReplayBuffer buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.s = Eigen::VectorXd::Ones(1);
    const double a = std::isnan(expert) ? u(rng) : expert;
    t.a = Eigen::VectorXd::Constant(1, a);
    t.r = -(a - 0.3) * (a - 0.3);
    t.s_next = t.s;
    t.done = true;
    buf.push(t);
  }
  return buf;
}

}  // namespace

TEST(Agents, Td3BcWithoutBcIsTd3) {
  Td3Config cfg = small_config();
  cfg.policy_delay = 2;
  Td3Config mix = cfg;
  mix.lambda_td = 1.0;
  mix.lambda_bc = 0.0;
  Agent a = unit_agent(4, 2, cfg, 9);
  Agent b = unit_agent(4, 2, cfg, 9);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Batch batch = random_batch(4, 2, 32, rng);
    td3_update(a, batch, cfg);
    td3bc_update(b, batch, mix);
  }
  EXPECT_TRUE(same_networks(a, b));
  EXPECT_EQ(a.actor_updates, b.actor_updates);
}

TEST(Agents, Td3BcWithoutTdIsBc) {
  Td3Config cfg = small_config();
  Td3Config mix = cfg;
  mix.lambda_td = 0.0;
  mix.lambda_bc = 1.0;
  Agent a = unit_agent(4, 2, cfg, 10);
  Agent b = unit_agent(4, 2, cfg, 10);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const Batch batch = random_batch(4, 2, 32, rng);
    bc_update(a, batch, cfg);
    td3bc_update(b, batch, mix);
  }
  EXPECT_EQ(a.actor.parameters(), b.actor.parameters());
}

TEST(Agents, TerminalTargetIsReward) {
  Td3Config cfg = small_config();
  Agent a = unit_agent(3, 1, cfg, 3);
  std::mt19937_64 rng(3);
  Batch b = random_batch(3, 1, 16, rng);
  b.done.setOnes();
  EXPECT_EQ(critic_targets(a, b, cfg), b.r);
  b.done.setZero();
  cfg.gamma = 0.0;
  EXPECT_EQ(critic_targets(a, b, cfg), b.r);
}

TEST(Agents, TargetUsesSmallerCritic) {
  Td3Config cfg = small_config();
  cfg.target_noise_std = 0.0;
  cfg.gamma = 0.5;
  Agent a = unit_agent(3, 1, cfg, 4);
  std::mt19937_64 rng(4);
  Batch b = random_batch(3, 1, 8, rng);
  b.r.setZero();
  // Shift one target critic's output bias so it is always the larger one.
  a.critic1_target.biases().back()(0) += 100.0;
  const Eigen::MatrixXd x = [&] {
    Eigen::MatrixXd m(4, 8);
    m.topRows(3) = b.s_next;
    m.bottomRows(1) = a.actor_target.predict(b.s_next);
    return m;
  }();
  const Eigen::RowVectorXd q2 = a.critic2_target.predict(x).row(0);
  EXPECT_LT((critic_targets(a, b, cfg) - 0.5 * q2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Agents, CriticLossFallsOnFixedBatch) {
  Td3Config cfg = small_config();
  cfg.gamma = 0.0;
  Agent a = unit_agent(3, 1, cfg, 13);
  std::mt19937_64 rng(13);
  const Batch b = random_batch(3, 1, 32, rng);
  const double first = td3_update(a, b, cfg).critic_loss;
  double last = first;
  for (int k = 0; k < 1000; ++k) last = td3_update(a, b, cfg).critic_loss;
  EXPECT_LT(last, 0.1 * first);
}

TEST(Agents, BanditConverges) {
  Td3Config cfg = small_config();
  cfg.gamma = 0.0;
  Agent agent = unit_agent(1, 1, cfg, 5);
  std::mt19937_64 rng(5);
  const ReplayBuffer buf = bandit_buffer(4096, rng);
  for (int k = 0; k < 8000; ++k) td3_update(agent, buf, cfg);
  EXPECT_NEAR(agent.act(Eigen::VectorXd::Ones(1))(0), 0.3, 0.02);
}

TEST(Agents, BiasedExpertPullsTowardsIt) {
  Td3Config cfg = small_config();
  std::mt19937_64 rng(6);
  ReplayBuffer buf = bandit_buffer(4096, rng);
  // Expert data sits at -0.5; critic data covers the box.
  ReplayBuffer mixed(8192);
  const ReplayBuffer expert = bandit_buffer(4096, rng, -0.5);
  for (std::size_t i = 0; i < 4096; ++i) {
    mixed.push(buf.at(i));
    mixed.push(expert.at(i));
  }
  auto run = [&](double l_td, double l_bc) {
    Td3Config c = cfg;
    c.lambda_td = l_td;
    c.lambda_bc = l_bc;
    Agent agent = unit_agent(1, 1, c, 7);
    for (int k = 0; k < 8000; ++k) td3bc_update(agent, mixed, c);
    return agent.act(Eigen::VectorXd::Ones(1))(0);
  };
  const double pure_bc = run(0.0, 1.0);
  const double pure_td = run(1.0, 0.0);
  const double half = run(0.5, 0.5);
  EXPECT_NEAR(pure_bc, -0.25, 0.03);  // mean of the two action clouds
  EXPECT_NEAR(pure_td, 0.3, 0.05);
  EXPECT_LT(half, pure_td);
  EXPECT_GT(half, pure_bc);
}

TEST(Agents, BehaviorCloningFitsLinearExpert) {
  Td3Config cfg = small_config();
  Agent agent = unit_agent(3, 2, cfg, 8);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ReplayBuffer buf(2048);
  for (int i = 0; i < 2048; ++i) {
    Transition t;
    t.s = Eigen::Vector3d(u(rng), u(rng), u(rng));
    t.a = Eigen::Vector2d(0.4 * t.s(0) - 0.2 * t.s(1), 0.3 * t.s(2) + 0.1);
    t.s_next = t.s;
    buf.push(t);
  }
  double loss = 1.0;
  for (int k = 0; k < 4000; ++k) loss = bc_update(agent, buf, cfg);
  EXPECT_LT(loss, 2e-4);
}

TEST(Agents, ConstantExpertLossVanishes) {
  Td3Config cfg = small_config();
  Agent agent = unit_agent(2, 1, cfg, 11);
  std::mt19937_64 rng(11);
  Batch b = random_batch(2, 1, 64, rng);
  b.a.setConstant(0.25);
  double loss = 1.0;
  for (int k = 0; k < 2000; ++k) loss = bc_update(agent, b, cfg);
  EXPECT_LT(loss, 1e-6);
}

TEST(Agents, ActionScaling) {
  Td3Config cfg = small_config();
  Agent a = make_agent(2, Eigen::Vector2d(-0.1, -0.2), Eigen::Vector2d(0.3, 0.2), cfg, 1);
  EXPECT_TRUE(a.to_mw(Eigen::Vector2d(-1.0, 1.0)).isApprox(Eigen::Vector2d(-0.1, 0.2), 1e-15));
  EXPECT_LE(a.to_normalized(Eigen::Vector2d(0.1, 0.0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(a.to_normalized(Eigen::Vector2d(5.0, -5.0)), Eigen::Vector2d(1.0, -1.0));
}

TEST(Agents, JsonRoundTripAndDeterminism) {
  Td3Config cfg = small_config();
  Agent a = unit_agent(3, 2, cfg, 12);
  Agent b = unit_agent(3, 2, cfg, 12);
  EXPECT_TRUE(same_networks(a, b));
  std::mt19937_64 rng(12);
  const Batch batch = random_batch(3, 2, 16, rng);
  td3bc_update(a, batch, cfg);
  const Agent c = agent_from_json(nlohmann::json::parse(agent_to_json(a).dump()));
  EXPECT_TRUE(same_networks(a, c));
  EXPECT_EQ(c.action_center, a.action_center);
  EXPECT_EQ(c.critic_updates, a.critic_updates);
}

TEST(Agents, ConfigValidation) {
  Td3Config cfg;
  cfg.policy_delay = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = Td3Config{};
  cfg.lambda_bc = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = Td3Config{};
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.gamma = 0.0;
  EXPECT_NO_THROW(cfg.validate());
  const Td3Config back = Td3Config::from_json(Td3Config{}.to_json());
  EXPECT_EQ(back.to_json(), Td3Config{}.to_json());
}
