#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safeess/env.hpp"

using namespace safeess;
using safeess::test::chain;
using safeess::test::data_path;

namespace {

ScenarioDay flat_day(std::size_t buses, double load_mw, double price, int steps = 24) {
  ScenarioDay day;
  day.date = "2023-06-01";
  day.dt_hours = 24.0 / steps;
  day.price.assign(static_cast<std::size_t>(steps), price);
  day.p_load = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(buses), steps, load_mw);
  day.q_load = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(buses), steps);
  day.p_pv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(buses), steps);
  return day;
}

EssSpec paper_ess() {
  EssSpec e;
  e.p_min = -0.15;
  e.p_max = 0.15;
  e.e_cap = 1.0;
  e.soc_min = 0.2;
  e.soc_max = 0.8;
  e.eta_c = 0.98;
  e.eta_d = 0.98;
  return e;
}

}  // namespace

TEST(Env, SocUpdateArithmetic) {
  const EssSpec e = paper_ess();
  EXPECT_EQ(soc_update(e, 0.5, 0.0, 1.0), 0.5);
  EXPECT_NEAR(soc_update(e, 0.5, 0.15, 1.0), 0.647, 1e-12);
  EXPECT_NEAR(soc_update(e, 0.647, -0.15, 1.0), 0.647 - 0.15 / 0.98, 1e-12);
  EXPECT_LT(soc_update(e, soc_update(e, 0.5, 0.15, 1.0), -0.15 * 0.98 * 0.98, 1.0), 0.5 + 1e-12);
}

TEST(Env, ClipAtSocLimits) {
  const Network net = chain({0.01}, {0.01}, {{2, 0.15, 1.0, 0.98, 0.5}});
  Env env(net, EnvConfig{});
  const ScenarioDay day = flat_day(1, 0.01, 50.0);
  EnvState s = env.reset(day);
  s.soc(0) = 0.8;
  EXPECT_EQ(env.clip_action(s, Action{Eigen::VectorXd::Constant(1, 0.15)}).p_b(0), 0.0);
  s.soc(0) = 0.79;
  EXPECT_NEAR(env.clip_action(s, Action{Eigen::VectorXd::Constant(1, 0.15)}).p_b(0), 0.01 / 0.98, 1e-12);
  s.soc(0) = 0.5;
  EXPECT_EQ(env.clip_action(s, Action{Eigen::VectorXd::Constant(1, 0.1)}).p_b(0), 0.1);
  EXPECT_EQ(env.clip_action(s, Action{Eigen::VectorXd::Constant(1, 0.4)}).p_b(0), 0.15);
  EXPECT_EQ(env.clip_action(s, Action{Eigen::VectorXd::Constant(1, std::nan(""))}).p_b(0), 0.0);
}

TEST(Env, ResetState) {
  const Network net = load_network(data_path("networks/net6.json"));
  Env env(net, EnvConfig{});
  const ScenarioDay idle = flat_day(5, 0.0, 50.0);
  const EnvState s = env.reset(idle);
  EXPECT_EQ(s.t, 0);
  for (std::size_t b = 0; b < net.ess_count(); ++b) EXPECT_EQ(s.soc(static_cast<Eigen::Index>(b)), net.ess[b].soc_init);
  for (Eigen::Index i = 0; i < s.v_sq.size(); ++i) EXPECT_DOUBLE_EQ(s.v_sq(i), net.v0_sq);

  const ScenarioDay loaded = flat_day(5, 0.03, 50.0);
  const EnvState s2 = env.reset(loaded);
  const PowerFlowSolution sol = solve_ac(net, env.injections(0, Eigen::VectorXd::Zero(2)));
  EXPECT_LT((s2.v_sq - sol.v_sq).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Env, RewardIsNegativeCost) {
  const Network net = chain({0.01}, {0.01}, {{2}});
  Env env(net, EnvConfig{});
  const ScenarioDay day = flat_day(1, 1.0, 50.0);
  const EnvState s = env.reset(day);
  const StepResult r = env.step(s, Action{Eigen::VectorXd::Zero(1)});
  EXPECT_NEAR(r.reward, -50.0, 1e-12);
  EXPECT_NEAR(r.cost_eur, 50.0, 1e-12);

  const ScenarioDay idle = flat_day(1, 0.0, 50.0);
  const StepResult z = env.step(env.reset(idle), Action{Eigen::VectorXd::Zero(1)});
  EXPECT_EQ(z.reward, 0.0);
  EXPECT_EQ(z.penalty, 0.0);
  EXPECT_EQ(z.shaped_reward, z.reward);
}

TEST(Env, PenaltyTerm) {
  Bus bus;
  bus.v_min = 0.95;
  bus.v_max = 1.05;
  EXPECT_NEAR(voltage_penalty_term(bus, 0.93, 1.0), -0.02, 1e-12);
  EXPECT_NEAR(400.0 * std::abs(voltage_penalty_term(bus, 0.93, 1.0)), 8.0, 1e-9);
  EXPECT_EQ(voltage_penalty_term(bus, 0.97, 1.0), 0.0);
  EXPECT_NEAR(voltage_penalty_term(bus, 1.06, 1.0), -0.01, 1e-12);
}

TEST(Env, PenaltyMatchesFlow) {
  // Heavy load at the end of a weak feeder pushes the far buses below 0.95 pu.
  const Network net = chain({0.05, 0.05}, {0.02, 0.02}, {{3}});
  Env env(net, EnvConfig{});
  const ScenarioDay day = flat_day(2, 0.4, 50.0);
  const StepResult r = env.step(env.reset(day), Action{Eigen::VectorXd::Zero(1)});
  double expect = 0.0;
  for (const Bus& b : net.buses) expect += std::abs(voltage_penalty_term(b, std::sqrt(r.flow.v_sq(b.id - 1)), 1.0));
  EXPECT_GT(r.violation_count, 0);
  EXPECT_NEAR(r.penalty, 400.0 * expect, 1e-12);
  EXPECT_NEAR(r.shaped_reward, r.reward - r.penalty, 1e-12);
}

TEST(Env, EpisodeRunsToHorizon) {
  const Network net = load_network(data_path("networks/net6.json"));
  Env env(net, EnvConfig{});
  const ScenarioDay day = flat_day(5, 0.02, 40.0);
  EnvState s = env.reset(day);
  int steps = 0;
  for (;;) {
    const StepResult r = env.step(s, Action{Eigen::VectorXd::Constant(2, 0.05)});
    ++steps;
    s = r.next_state;
    if (r.done) break;
  }
  EXPECT_EQ(steps, 24);
  EXPECT_THROW(env.step(s, Action{Eigen::VectorXd::Zero(2)}), EnvError);
}

TEST(Env, ObservationLayout) {
  const Network net = load_network(data_path("networks/net6.json"));
  Env env(net, EnvConfig{});
  EXPECT_EQ(env.observation_size(), 14u);
  const ScenarioDay day = flat_day(5, 0.02, 40.0);
  EnvState s = env.reset(day);
  Eigen::VectorXd obs = env.encode_observation(s);
  ASSERT_EQ(obs.size(), 14);
  EXPECT_EQ(obs(11), net.ess[0].soc_init);
  EXPECT_EQ(obs(12), net.ess[1].soc_init);
  for (int t = 0; t < 24; ++t) {
    s.t = t;
    EXPECT_EQ(env.decode_time(env.encode_observation(s), 24), t);
  }
}

TEST(Env, NormalizationFitOnDays) {
  const Network net = load_network(data_path("networks/net6.json"));
  const ScenarioDay a = flat_day(5, 0.02, 40.0);
  const ScenarioDay b = flat_day(5, 0.04, 80.0);
  const ObsNormalization n = fit_normalization(net, {&a, &b});
  EXPECT_EQ(ObsNormalization::from_json(n.to_json()), n);
  EXPECT_GT(n.p_scale_pu, 0.0);
  EXPECT_GT(n.price_scale, 0.0);
}
