#include "safeess/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "safeess/format.hpp"

namespace safeess {

namespace {

constexpr int kCheckpointSchema = 1;

}  // namespace

const char* to_string(Algo algo) {
  switch (algo) {
    case Algo::kTd3:
      return "td3";
    case Algo::kBc:
      return "bc";
    case Algo::kTd3Bc:
      return "td3bc";
  }
  return "?";
}

Algo algo_from_string(const std::string& name) {
  if (name == "td3") return Algo::kTd3;
  if (name == "bc") return Algo::kBc;
  if (name == "td3bc") return Algo::kTd3Bc;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected td3, bc or td3bc)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"algo", to_string(algo)},
          {"td3", td3.to_json()},
          {"updates", updates},
          {"eval_every", eval_every},
          {"warmup_steps", warmup_steps},
          {"reward_scale", reward_scale},
          {"safety_in_training", safety_in_training},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.algo = algo_from_string(doc.value("algo", std::string(to_string(c.algo))));
  if (doc.contains("td3")) c.td3 = Td3Config::from_json(doc.at("td3"));
  c.updates = doc.value("updates", c.updates);
  c.eval_every = doc.value("eval_every", c.eval_every);
  c.warmup_steps = doc.value("warmup_steps", c.warmup_steps);
  c.reward_scale = doc.value("reward_scale", c.reward_scale);
  c.safety_in_training = doc.value("safety_in_training", c.safety_in_training);
  c.seed = doc.value("seed", c.seed);
  if (c.updates < 0 || c.eval_every <= 0 || c.warmup_steps < 0) throw std::invalid_argument("bad training budget");
  return c;
}

Eigen::VectorXd AgentPolicy::act(const Env& env, const EnvState& state) {
  return agent_->act(env.encode_observation(state));
}

Eigen::VectorXd ZeroPolicy::act(const Env& env, const EnvState&) {
  return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(env.action_size()));
}

Eigen::VectorXd ExpertReplayPolicy::act(const Env& env, const EnvState& state) {
  const ScenarioDay* day = env.day();
  auto it = day ? schedules_.find(day->date) : schedules_.end();
  if (it == schedules_.end()) throw std::out_of_range("no expert schedule for this day");
  return it->second.col(state.t);
}

double EvalReport::total_cost() const {
  double s = 0.0;
  for (const DayReport& d : days) s += d.cost_eur;
  return s;
}

double EvalReport::total_shaped_reward() const {
  double s = 0.0;
  for (const DayReport& d : days) s += d.shaped_reward;
  return s;
}

double EvalReport::mean_shaped_reward() const {
  return days.empty() ? 0.0 : total_shaped_reward() / static_cast<double>(days.size());
}

int EvalReport::violations_total() const {
  int s = 0;
  for (const DayReport& d : days) s += d.voltage_violations;
  return s;
}

std::optional<double> EvalReport::mean_cost_error() const {
  double s = 0.0;
  int n = 0;
  for (const DayReport& d : days) {
    if (d.cost_error) {
      s += *d.cost_error;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

double EvalReport::mean_latency_seconds() const {
  double s = 0.0;
  for (const DayReport& d : days) s += d.decision_seconds;
  return days.empty() ? 0.0 : s / static_cast<double>(days.size());
}

std::map<int, int> EvalReport::bus_violations() const {
  std::map<int, int> out;
  for (const DayReport& d : days) {
    for (const auto& [bus, n] : d.bus_violations) out[bus] += n;
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  auto bus_map = [](const std::map<int, int>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [bus, n] : m) j[std::to_string(bus)] = n;
    return j;
  };
  nlohmann::json day_list = nlohmann::json::array();
  for (const DayReport& d : days) {
    nlohmann::json j = {{"date", d.date},
                        {"cost_eur", d.cost_eur},
                        {"reward", d.reward},
                        {"penalty", d.penalty},
                        {"shaped_reward", d.shaped_reward},
                        {"voltage_violations", d.voltage_violations},
                        {"current_violations", d.current_violations},
                        {"projections_changed", d.projections_changed},
                        {"projections_infeasible", d.projections_infeasible},
                        {"bus_violations", bus_map(d.bus_violations)}};
    j["expert_cost_eur"] = d.expert_cost_eur ? nlohmann::json(*d.expert_cost_eur) : nlohmann::json(nullptr);
    j["cost_error"] = d.cost_error ? nlohmann::json(*d.cost_error) : nlohmann::json(nullptr);
    day_list.push_back(std::move(j));
  }
  const auto mce = mean_cost_error();
  return {{"schema", 1},
          {"safety", safety},
          {"days", day_list},
          {"total_cost_eur", total_cost()},
          {"mean_shaped_reward", mean_shaped_reward()},
          {"violations_total", violations_total()},
          {"bus_violations", bus_map(bus_violations())},
          {"mean_cost_error", mce ? nlohmann::json(*mce) : nlohmann::json(nullptr)}};
}

EvalReport evaluate(Env& env, Policy& policy, const std::vector<const ScenarioDay*>& days, const SafetyParams* safety,
                    const std::map<std::string, double>* expert_costs, const EvalHooks& hooks) {
  using Clock = std::chrono::steady_clock;
  EvalReport report;
  report.safety = safety != nullptr;
  const Network& net = env.network();
  for (const ScenarioDay* day : days) {
    DayReport d;
    d.date = day->date;
    EnvState state = env.reset(*day);
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    for (int t = 0; t < state.horizon; ++t) {
      const auto t0 = Clock::now();
      const Action raw{policy.act(env, state)};
      Action executed = raw;
      if (safety) {
        env.action_bounds(state, lo, hi);
        const ProjectionResult pr = project(*safety, state, raw, lo, hi);
        executed = pr.a_hat;
        d.projections_changed += pr.changed ? 1 : 0;
        d.projections_infeasible += pr.infeasible ? 1 : 0;
        d.decision_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
        if (hooks.audit) hooks.audit(day->date, audit_record(net, t, raw, pr));
      } else {
        d.decision_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
      }
      const StepResult r = env.step(state, executed);
      d.cost_eur += r.cost_eur;
      d.reward += r.reward;
      d.penalty += r.penalty;
      d.shaped_reward += r.shaped_reward;
      d.voltage_violations += static_cast<int>(r.report.voltage_count());
      d.current_violations += static_cast<int>(r.report.current_count());
      for (const BusViolation& v : r.report.buses) d.bus_violations[net.external_id(v.bus)] += 1;
      if (hooks.trace) hooks.trace(day->date, trace_record(net, state, raw, r));
      state = r.next_state;
    }
    d.decision_seconds /= std::max(1, state.horizon);
    if (expert_costs) {
      auto it = expert_costs->find(day->date);
      if (it != expert_costs->end()) {
        d.expert_cost_eur = it->second;
        d.cost_error = (d.cost_eur - it->second) / std::max(std::abs(it->second), 1e-12);
      }
    }
    report.days.push_back(std::move(d));
  }
  return report;
}

ReplayBuffer dataset_buffer(const ExpertDataset& ds, const Agent& agent, double reward_scale) {
  if (ds.pairs.empty()) throw std::invalid_argument("expert dataset is empty");
  ReplayBuffer buf(ds.pairs.size());
  for (const ExpertPair& p : ds.pairs) {
    if (p.obs.size() != agent.obs_dim || p.action.size() != agent.act_dim) {
      throw std::invalid_argument("expert dataset dimensions do not match the agent");
    }
    buf.push(Transition{p.obs, agent.to_normalized(p.action), reward_scale * p.shaped_reward, p.next_obs, p.done});
  }
  return buf;
}

namespace {

struct LossAccumulator {
  double critic = 0.0;
  double actor = 0.0;
  double bc = 0.0;
  long n = 0;
  long n_actor = 0;

  void add(const UpdateInfo& info) {
    critic += info.critic_loss;
    ++n;
    if (info.actor_updated) {
      actor += info.actor_loss;
      bc += info.bc_loss;
      ++n_actor;
    }
  }
  CurveRow row(long update) const {
    CurveRow r;
    r.update = update;
    r.critic_loss = n ? critic / static_cast<double>(n) : 0.0;
    r.actor_loss = n_actor ? actor / static_cast<double>(n_actor) : 0.0;
    r.bc_loss = n_actor ? bc / static_cast<double>(n_actor) : 0.0;
    return r;
  }
};

}  // namespace

TrainResult train(Env& env, const std::vector<const ScenarioDay*>& train_days,
                  const std::vector<const ScenarioDay*>& val_days, const TrainConfig& cfg,
                  const ExpertDataset* dataset, const SafetyParams* safety) {
  cfg.td3.validate();
  if (val_days.empty()) throw std::invalid_argument("train: no validation days");
  const Network& net = env.network();
  Agent agent = make_agent(static_cast<int>(env.observation_size()), net, cfg.td3, cfg.seed);
  Env eval_env(net, env.config());
  const SafetyParams* val_safety = cfg.algo == Algo::kTd3 && cfg.safety_in_training ? safety : nullptr;

  TrainResult result;
  result.agent = agent;
  result.best_val_reward = -std::numeric_limits<double>::infinity();
  LossAccumulator acc;
  long updates = 0;

  auto validate = [&]() {
    AgentPolicy policy(agent);
    const EvalReport rep = evaluate(eval_env, policy, val_days, val_safety);
    CurveRow row = acc.row(updates);
    row.val_reward = rep.mean_shaped_reward();
    row.val_violations = rep.violations_total();
    result.curve.push_back(row);
    acc = {};
    if (row.val_reward > result.best_val_reward) {
      result.best_val_reward = row.val_reward;
      result.best_update = updates;
      result.agent = agent;
    }
  };

  if (cfg.algo == Algo::kTd3) {
    if (train_days.empty()) throw std::invalid_argument("train: no training days");
    if (cfg.safety_in_training && !safety) throw std::invalid_argument("train: safety requested without parameters");
    std::mt19937_64 explore(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    ReplayBuffer buffer(cfg.td3.buffer_capacity);
    std::vector<std::size_t> order(train_days.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    EnvState state;
    bool need_reset = true;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    while (updates < cfg.updates) {
      if (need_reset) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), explore);
          cursor = 0;
        }
        state = env.reset(*train_days[order[cursor++]]);
        need_reset = false;
      }
      const Eigen::VectorXd obs = env.encode_observation(state);
      Eigen::VectorXd u(agent.act_dim);
      if (result.env_steps < cfg.warmup_steps) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = uniform(explore);
      } else {
        u = agent.act_normalized(obs);
        for (Eigen::Index i = 0; i < u.size(); ++i) {
          u(i) = std::clamp(u(i) + cfg.td3.exploration_noise * gauss(explore), -1.0, 1.0);
        }
      }
      Action a{agent.to_mw(u)};
      if (cfg.safety_in_training) {
        env.action_bounds(state, lo, hi);
        a = project(*safety, state, a, lo, hi).a_hat;
      }
      const StepResult r = env.step(state, a);
      buffer.push(Transition{obs, agent.to_normalized(r.applied.p_b), cfg.reward_scale * r.shaped_reward,
                             env.encode_observation(r.next_state), r.done});
      ++result.env_steps;
      state = r.next_state;
      need_reset = r.done;
      if (result.env_steps >= cfg.warmup_steps && buffer.size() >= cfg.td3.batch_size) {
        acc.add(td3_update(agent, buffer, cfg.td3));
        ++updates;
        if (updates % cfg.eval_every == 0) validate();
      }
    }
  } else {
    if (!dataset) throw std::invalid_argument("train: bc and td3bc need an expert dataset");
    if (dataset->network_hash != network_hash(net)) {
      throw std::invalid_argument("train: expert dataset was collected on a different network");
    }
    if (!(dataset->norm == env.config().norm)) {
      throw std::invalid_argument("train: expert dataset uses a different observation normalization");
    }
    const ReplayBuffer buffer = dataset_buffer(*dataset, agent, cfg.reward_scale);
    while (updates < cfg.updates) {
      if (cfg.algo == Algo::kBc) {
        UpdateInfo info;
        info.bc_loss = bc_update(agent, buffer, cfg.td3);
        info.actor_updated = true;
        acc.add(info);
      } else {
        acc.add(td3bc_update(agent, buffer, cfg.td3));
      }
      ++updates;
      if (updates % cfg.eval_every == 0) validate();
    }
  }
  if (result.curve.empty() || result.curve.back().update != updates) validate();
  return result;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "update,critic_loss,actor_loss,bc_loss,val_reward,val_violations\n";
  for (const CurveRow& r : curve) {
    os << r.update << ',' << format_double(r.critic_loss) << ',' << format_double(r.actor_loss) << ','
       << format_double(r.bc_loss) << ',' << format_double(r.val_reward) << ',' << r.val_violations << "\n";
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const nlohmann::json doc = {{"schema", kCheckpointSchema},
                              {"algo", ckpt.algo},
                              {"network_hash", ckpt.network_hash},
                              {"normalization", ckpt.norm.to_json()},
                              {"config", ckpt.config.to_json()},
                              {"agent", agent_to_json(ckpt.agent)}};
  os << doc.dump() << "\n";
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (doc.value("schema", 0) != kCheckpointSchema) throw std::runtime_error(path.string() + ": unsupported checkpoint");
  Checkpoint c;
  c.algo = doc.at("algo").get<std::string>();
  c.network_hash = doc.at("network_hash").get<std::string>();
  c.norm = ObsNormalization::from_json(doc.at("normalization"));
  c.config = TrainConfig::from_json(doc.at("config"));
  c.agent = agent_from_json(doc.at("agent"));
  return c;
}

}  // namespace safeess
