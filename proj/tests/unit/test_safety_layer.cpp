#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "../common/oracles.hpp"
#include "fixtures.hpp"
#include "safeess/safety_layer.hpp"

using namespace safeess;
using safeess::test::chain;
using safeess::test::data_path;

namespace {

struct OneBus {
  Network net;
  ScenarioDay day;
  SafetyParams params;
  EnvState state;
};

OneBus one_bus(double load_mw) {
  OneBus f;
  f.net = chain({0.1}, {0.05}, {{2}});
  f.day = oracle::flat_day(1, Eigen::VectorXd::Constant(1, load_mw));
  f.day.q_load.setZero();
  f.params = make_safety_params(f.net, build_sensitivities(f.net));
  Env env(f.net, EnvConfig{});
  f.state = env.reset(f.day);
  return f;
}

}  // namespace

TEST(SafetyLayer, ZeroActionNoLoadIsSafe) {
  OneBus f = one_bus(0.0);
  EXPECT_TRUE(is_safe(f.params, f.state, Action{Eigen::VectorXd::Zero(1)}));
}

TEST(SafetyLayer, SafeAndUnsafeCharging) {
  // Lower band at bus 2 allows charging up to 0.0775 MW with 0.4 MW of load.
  OneBus f = one_bus(0.4);
  EXPECT_TRUE(is_safe(f.params, f.state, Action{Eigen::VectorXd::Constant(1, 0.05)}));
  EXPECT_FALSE(is_safe(f.params, f.state, Action{Eigen::VectorXd::Constant(1, 0.10)}));
  EXPECT_TRUE(is_safe(f.params, f.state, Action{Eigen::VectorXd::Constant(1, -0.15)}));
}

TEST(SafetyLayer, ScalarClosedForm) {
  OneBus f = one_bus(0.4);
  // Lower band: 1 + 2 r (-load - a) >= v_min^2 + eps.
  const double bound = -0.4 + (1.0 - f.params.v_min_sq(0) - f.params.eps) / (2.0 * 0.1);
  ASSERT_LT(bound, 0.15);
  ASSERT_GT(bound, -0.15);
  const ProjectionResult r = project(f.params, f.state, Action{Eigen::VectorXd::Constant(1, 0.15)});
  EXPECT_TRUE(r.changed);
  EXPECT_FALSE(r.infeasible);
  EXPECT_NEAR(r.a_hat.p_b(0), bound, 1e-12);
  ASSERT_EQ(r.active_constraints.size(), 1u);
  EXPECT_EQ(r.active_constraints[0].bus, 2);
  EXPECT_FALSE(r.active_constraints[0].upper);
  EXPECT_LE(r.kkt_residual, 1e-9);
}

TEST(SafetyLayer, IdentityOnSafeActions) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = oracle::two_ess_toy(seed);
    if (!is_safe(inst.params, inst.state, inst.a)) continue;
    const ProjectionResult r = project(inst.params, inst.state, inst.a);
    EXPECT_FALSE(r.changed);
    EXPECT_EQ(r.a_hat.p_b, inst.a.p_b);
  }
}

TEST(SafetyLayer, MatchesGridSearch) {
  int changed = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto inst = oracle::two_ess_toy(seed);
    const ProjectionResult r = project(inst.params, inst.state, inst.a);
    const Eigen::VectorXd g = oracle::grid_projection(inst.params, inst.state, inst.a.p_b, 0.001);
    if (r.infeasible) {
      EXPECT_EQ(g.size(), 0);
      continue;
    }
    changed += r.changed;
    ASSERT_EQ(g.size(), 2);
    // The grid optimum can slide along a shallow face, so compare distances:
    // never beaten by the grid, and no more than one cell diagonal better.
    const double d_proj = (r.a_hat.p_b - inst.a.p_b).norm();
    const double d_grid = (g - inst.a.p_b).norm();
    EXPECT_LE(d_proj, d_grid + 1e-12) << "seed " << seed;
    EXPECT_LE(d_grid - d_proj, std::sqrt(2.0) * 0.001) << "seed " << seed;
  }
  EXPECT_GT(changed, 0);
}

TEST(SafetyLayer, IdempotentFeasibleOptimal) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    const auto inst = oracle::two_ess_toy(seed);
    const ProjectionResult r = project(inst.params, inst.state, inst.a);
    if (r.infeasible) continue;
    EXPECT_TRUE(oracle::linear_band_ok(inst.params, inst.state, r.a_hat.p_b, 1e-9));
    const ProjectionResult again = project(inst.params, inst.state, r.a_hat);
    EXPECT_LE((again.a_hat.p_b - r.a_hat.p_b).cwiseAbs().maxCoeff(), 1e-9);
    const double dist = (r.a_hat.p_b - inst.a.p_b).norm();
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    for (int k = 0; k < 10000; ++k) {
      const Eigen::Vector2d z(u(rng), u(rng));
      if (oracle::linear_band_ok(inst.params, inst.state, z, 0.0)) {
        EXPECT_LE(dist, (z - inst.a.p_b).norm() + 1e-12);
      }
    }
  }
}

TEST(SafetyLayer, InfeasibleFallback) {
  // Load so heavy that even full discharge cannot reach the band.
  OneBus f = one_bus(0.9);
  const ProjectionResult r = project(f.params, f.state, Action{Eigen::VectorXd::Constant(1, 0.1)});
  EXPECT_TRUE(r.infeasible);
  EXPECT_TRUE(r.changed);
  EXPECT_NEAR(r.a_hat.p_b(0), -0.15, 1e-9);
  EXPECT_GT(r.max_band_violation, 0.0);
}

TEST(SafetyLayer, NarrowerBox) {
  OneBus f = one_bus(0.4);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, -0.05);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(1, 0.02);
  const ProjectionResult r = project(f.params, f.state, Action{Eigen::VectorXd::Constant(1, 0.15)}, lo, hi);
  EXPECT_LE(r.a_hat.p_b(0), 0.02 + 1e-15);
  EXPECT_GE(r.a_hat.p_b(0), -0.05 - 1e-15);
  EXPECT_THROW(project(f.params, f.state, Action{Eigen::VectorXd::Zero(1)}, Eigen::VectorXd::Zero(2), hi),
               std::invalid_argument);
}

TEST(SafetyLayer, AuditRecord) {
  OneBus f = one_bus(0.4);
  const Action a{Eigen::VectorXd::Constant(1, 0.15)};
  const ProjectionResult r = project(f.params, f.state, a);
  const nlohmann::json rec = audit_record(f.net, 5, a, r);
  EXPECT_EQ(rec.at("t"), 5);
  EXPECT_EQ(rec.at("changed"), true);
}

TEST(SafetyLayer, AcFidelityOnBundledNetworks) {
  // With the default margin, projected actions rarely violate true AC limits.
  std::mt19937_64 rng(11);
  for (const char* name : {"net6", "net18", "net34"}) {
    const Network net = load_network(data_path(std::string("networks/") + name + ".json"));
    const SafetyParams sp = make_safety_params(net, build_sensitivities(net));
    Env env(net, EnvConfig{});
    std::uniform_real_distribution<double> load(0.0, 0.06);
    std::uniform_real_distribution<double> act(-0.15, 0.15);
    int bad = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd l(static_cast<Eigen::Index>(net.load_bus_count()));
      for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = load(rng);
      const ScenarioDay day = oracle::flat_day(net.load_bus_count(), l);
      const EnvState s = env.reset(day);
      Eigen::VectorXd a(static_cast<Eigen::Index>(net.ess_count()));
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = act(rng);
      const ProjectionResult r = project(sp, s, Action{a});
      if (r.infeasible) continue;
      const PowerFlowSolution sol = solve_ac(net, env.injections(0, r.a_hat.p_b));
      bad += violations(net, sol).voltage_count() > 0;
    }
    EXPECT_LE(bad, n / 200) << name;  // at most 0.5%
  }
}
