#include <random>

#include <benchmark/benchmark.h>

#include "safeess/expert.hpp"
#include "safeess/mlp.hpp"
#include "safeess/powerflow.hpp"
#include "safeess/safety_layer.hpp"

namespace {

using namespace safeess;

const Network& network(const std::string& name) {
  static std::map<std::string, Network> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    it = cache.emplace(name, load_network(std::string(SAFEESS_DATA_DIR) + "/networks/" + name + ".json")).first;
  }
  return it->second;
}

const char* kNets[] = {"net6", "net18", "net34"};

Injections random_injections(const Network& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.03, 0.01);
  Injections inj = Injections::zero(net);
  for (Eigen::Index i = 0; i < inj.p.size(); ++i) {
    inj.p(i) = u(rng) / net.base_mva;
    inj.q(i) = 0.3 * inj.p(i);
  }
  return inj;
}

void BM_SolveAc(benchmark::State& state) {
  const Network& net = network(kNets[state.range(0)]);
  std::mt19937_64 rng(1);
  const Injections inj = random_injections(net, rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ac(net, inj));
  state.SetLabel(kNets[state.range(0)]);
}
BENCHMARK(BM_SolveAc)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_Project(benchmark::State& state) {
  const Network& net = network(kNets[state.range(0)]);
  const Sensitivities sens = build_sensitivities(net);
  const SafetyParams sp = make_safety_params(net, sens);
  GeneratorConfig gc;
  gc.days = 1;
  const ScenarioSet set = generate_synthetic(net, gc, 3);
  Env env(net, EnvConfig{});
  const EnvState s = env.reset(set.days[0]);
  Action a{sp.action_max};
  for (auto _ : state) benchmark::DoNotOptimize(project(sp, s, a));
  state.SetLabel(kNets[state.range(0)]);
}
BENCHMARK(BM_Project)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_ExpertDay(benchmark::State& state) {
  const Network& net = network(kNets[state.range(0)]);
  const Sensitivities sens = build_sensitivities(net);
  GeneratorConfig gc;
  gc.days = 1;
  gc.peak_load_mw = {state.range(0) == 0 ? 0.04 : 0.015};
  const ScenarioSet set = generate_synthetic(net, gc, 3);
  const DispatchProblem prob = make_problem(net, sens, set.days[0]);
  for (auto _ : state) benchmark::DoNotOptimize(solve_day(prob));
  state.SetLabel(kNets[state.range(0)]);
}
BENCHMARK(BM_ExpertDay)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_ActorForward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  Mlp mlp({70, 64, 64, 5}, OutputActivation::kTanh, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(70, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mlp.predict(x));
}
BENCHMARK(BM_ActorForward)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
