#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/env.hpp"
#include "safeess/network.hpp"
#include "safeess/sensitivities.hpp"

namespace safeess {

// Everything the projection needs, precomputed once per network. Voltage
// vectors cover the non-slack buses.
struct SafetyParams {
  double eps = 0.002;  // pu^2 margin inside each voltage limit
  double v0_sq = 1.0;
  double base_mva = 1.0;
  Sensitivities sens;
  Eigen::VectorXd v_min_sq;
  Eigen::VectorXd v_max_sq;
  Eigen::VectorXd action_min;  // MW
  Eigen::VectorXd action_max;  // MW
  Eigen::MatrixXd ess_gain;    // d v_sq / d p_b (pu^2 per MW), buses x ESS
};

SafetyParams make_safety_params(const Network& net, const Sensitivities& sens, double eps = 0.002);

struct ActiveConstraint {
  int bus = 0;  // internal id
  bool upper = false;
};

struct ProjectionResult {
  Action a_hat;
  bool changed = false;
  bool infeasible = false;
  std::vector<ActiveConstraint> active_constraints;
  int qp_iterations = 0;
  double kkt_residual = 0.0;
  double max_band_violation = 0.0;  // pu^2, nonzero only when infeasible
};

/// Linearized squared voltages at the non-slack buses for action a, with
/// demand and PV held at the state's values.
Eigen::VectorXd predicted_v_sq(const SafetyParams& params, const EnvState& state, const Eigen::VectorXd& a);

bool is_safe(const SafetyParams& params, const EnvState& state, const Action& a);

/// Closest action (Euclidean, MW) inside the action box whose linearized
/// voltages respect the eps-tightened band. When no such action exists the
/// result minimizes the largest band violation, then the distance to a.
ProjectionResult project(const SafetyParams& params, const EnvState& state, const Action& a);

/// Same, with a narrower action box (e.g. the SOC-dependent bounds from
/// Env::action_bounds) in place of the rated power limits.
ProjectionResult project(const SafetyParams& params, const EnvState& state, const Action& a,
                         const Eigen::VectorXd& box_min, const Eigen::VectorXd& box_max);

nlohmann::json audit_record(const Network& net, int t, const Action& input, const ProjectionResult& result);

}  // namespace safeess
