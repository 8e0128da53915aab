#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/agents.hpp"
#include "safeess/env.hpp"
#include "safeess/expert.hpp"
#include "safeess/safety_layer.hpp"

namespace safeess {

enum class Algo { kTd3, kBc, kTd3Bc };

const char* to_string(Algo algo);
Algo algo_from_string(const std::string& name);

struct TrainConfig {
  Algo algo = Algo::kTd3Bc;
  Td3Config td3;
  long updates = 20000;
  long eval_every = 1000;
  long warmup_steps = 1000;  // td3: random-action steps before learning
  double reward_scale = 0.01;  // multiplies shaped rewards fed to the critics
  bool safety_in_training = false;  // td3: project every executed action
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

class Policy {
 public:
  virtual ~Policy() = default;
  /// Storage power in MW for the given state.
  virtual Eigen::VectorXd act(const Env& env, const EnvState& state) = 0;
};

class AgentPolicy : public Policy {
 public:
  explicit AgentPolicy(const Agent& agent) : agent_(&agent) {}
  Eigen::VectorXd act(const Env& env, const EnvState& state) override;

 private:
  const Agent* agent_;
};

class ZeroPolicy : public Policy {
 public:
  Eigen::VectorXd act(const Env& env, const EnvState& state) override;
};

/// Replays stored expert schedules, keyed by day date.
class ExpertReplayPolicy : public Policy {
 public:
  explicit ExpertReplayPolicy(std::map<std::string, Eigen::MatrixXd> schedules) : schedules_(std::move(schedules)) {}
  Eigen::VectorXd act(const Env& env, const EnvState& state) override;

 private:
  std::map<std::string, Eigen::MatrixXd> schedules_;
};

struct DayReport {
  std::string date;
  double cost_eur = 0.0;
  double reward = 0.0;
  double penalty = 0.0;
  double shaped_reward = 0.0;
  int voltage_violations = 0;
  int current_violations = 0;
  int projections_changed = 0;
  int projections_infeasible = 0;
  std::optional<double> expert_cost_eur;
  std::optional<double> cost_error;  // (cost - expert) / |expert|
  std::map<int, int> bus_violations;  // external bus id -> count
  double decision_seconds = 0.0;      // not part of the deterministic report
};

struct EvalReport {
  std::vector<DayReport> days;
  bool safety = false;

  double total_cost() const;
  double total_shaped_reward() const;
  double mean_shaped_reward() const;
  int violations_total() const;
  std::optional<double> mean_cost_error() const;
  double mean_latency_seconds() const;
  std::map<int, int> bus_violations() const;

  /// Deterministic content only (no timing).
  nlohmann::json to_json() const;
};

struct EvalHooks {
  std::function<void(const std::string& day, const nlohmann::json& record)> trace;
  std::function<void(const std::string& day, const nlohmann::json& record)> audit;
};

EvalReport evaluate(Env& env, Policy& policy, const std::vector<const ScenarioDay*>& days, const SafetyParams* safety,
                    const std::map<std::string, double>* expert_costs = nullptr, const EvalHooks& hooks = {});

struct CurveRow {
  long update = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double bc_loss = 0.0;
  double val_reward = 0.0;
  int val_violations = 0;
};

struct TrainResult {
  Agent agent;  // best on validation
  std::vector<CurveRow> curve;
  double best_val_reward = 0.0;
  long best_update = 0;
  long env_steps = 0;
};

/// td3 learns online on `train_days`; bc and td3bc learn offline from the
/// expert dataset. Validation (mean shaped reward per day) selects the agent.
TrainResult train(Env& env, const std::vector<const ScenarioDay*>& train_days,
                  const std::vector<const ScenarioDay*>& val_days, const TrainConfig& cfg,
                  const ExpertDataset* dataset, const SafetyParams* safety);

/// Buffer of expert transitions with actions normalized for `agent`.
ReplayBuffer dataset_buffer(const ExpertDataset& ds, const Agent& agent, double reward_scale);

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve);

struct Checkpoint {
  std::string algo;
  std::string network_hash;
  ObsNormalization norm;
  TrainConfig config;
  Agent agent;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace safeess
