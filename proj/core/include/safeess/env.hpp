#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/network.hpp"
#include "safeess/powerflow.hpp"
#include "safeess/scenarios.hpp"

namespace safeess {

enum class PenaltyBuses { kEss, kAll };

// Feature scaling for encode_observation. Fitted on the training split
// (see fit_normalization) and carried with datasets and checkpoints.
struct ObsNormalization {
  double p_scale_pu = 1.0;
  double price_scale = 100.0;
  double v_center = 1.0;
  double v_halfwidth = 0.1;

  nlohmann::json to_json() const;
  static ObsNormalization from_json(const nlohmann::json& doc);
  bool operator==(const ObsNormalization&) const = default;
};

struct EnvConfig {
  double sigma = 400.0;
  PenaltyBuses penalty_buses = PenaltyBuses::kAll;
  double v_nominal = 1.0;
  ObsNormalization norm;
};

struct EnvState {
  int t = 0;
  int horizon = 0;
  Eigen::VectorXd p_net;  // pu, demand minus PV, non-slack buses
  Eigen::VectorXd q_net;  // pu, non-slack buses
  Eigen::VectorXd v_sq;   // every bus, AC solve at this step with storage idle
  double price = 0.0;
  Eigen::VectorXd soc;
};

/// Storage powers in MW, one per ESS, charging positive.
struct Action {
  Eigen::VectorXd p_b;
};

struct StepResult {
  EnvState next_state;
  Action applied;
  double reward = 0.0;
  double penalty = 0.0;
  double shaped_reward = 0.0;
  int violation_count = 0;  // bus voltage violations after the action
  bool done = false;
  double cost_eur = 0.0;
  PowerFlowSolution flow;  // AC solution with the applied action
  ViolationReport report;
};

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SOC recursion with separate charge/discharge efficiencies, clamped to the
/// SOC band to absorb rounding.
double soc_update(const EssSpec& ess, double soc, double p_b, double dt_hours);

/// Voltage penalty term C for one bus: min{0, (v_max - v_min)/2 - |v_nominal - v|}.
double voltage_penalty_term(const Bus& bus, double v, double v_nominal);

ObsNormalization fit_normalization(const Network& net, const std::vector<const ScenarioDay*>& days);

class Env {
 public:
  Env(Network net, EnvConfig cfg);

  const Network& network() const { return net_; }
  const EnvConfig& config() const { return cfg_; }
  const ScenarioDay* day() const { return day_; }

  EnvState reset(const ScenarioDay& day);
  Action clip_action(const EnvState& state, const Action& a) const;
  /// Per-ESS power interval (MW) that clip_action leaves untouched: rated
  /// limits intersected with what the SOC band allows this step.
  void action_bounds(const EnvState& state, Eigen::VectorXd& lo, Eigen::VectorXd& hi) const;
  StepResult step(const EnvState& state, const Action& a) const;

  Eigen::VectorXd encode_observation(const EnvState& state) const;
  std::size_t observation_size() const;
  std::size_t action_size() const { return net_.ess_count(); }

  /// Nodal injections (pu) at step t of the current day with storage power p_b (MW).
  Injections injections(int t, const Eigen::VectorXd& p_b) const;

  /// Operation cost of step t in EUR: price x (demand + storage - PV) x dt.
  double step_cost(int t, const Eigen::VectorXd& p_b) const;

  /// Index of the t/T slot in the observation vector.
  std::size_t time_slot() const { return observation_size() - 1; }
  int decode_time(const Eigen::VectorXd& obs, int horizon) const;

 private:
  EnvState make_state(int t, const Eigen::VectorXd& soc) const;

  Network net_;
  EnvConfig cfg_;
  const ScenarioDay* day_ = nullptr;
};

/// JSON-lines record for episode traces.
nlohmann::json trace_record(const Network& net, const EnvState& state, const Action& raw, const StepResult& result);

}  // namespace safeess
