#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/admm_qp.hpp"
#include "safeess/env.hpp"
#include "safeess/network.hpp"
#include "safeess/scenarios.hpp"
#include "safeess/sensitivities.hpp"

namespace safeess {

class ExpertError : public std::runtime_error {
 public:
  enum class Kind { kNonConvergence, kInfeasible, kDataset };

  ExpertError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// One day-ahead dispatch instance. The decision tensor is the storage power
// of every ESS at every step (MW, charging positive).
struct DispatchProblem {
  const Network* net = nullptr;
  const Sensitivities* sens = nullptr;
  const ScenarioDay* day = nullptr;
  double dt_hours = 1.0;
  int horizon = 0;
};

DispatchProblem make_problem(const Network& net, const Sensitivities& sens, const ScenarioDay& day);

struct ExpertOptions {
  double eps = 0.002;  // pu^2, same default as the safety layer
  double eps_growth = 1.5;
  int max_rounds = 5;
  double lambda_reg = 1e-6;
  // Require every ESS to end the day at least as full as it started, so the
  // schedule does not sell off the initial charge.
  bool terminal_soc = true;
  AdmmSettings admm;
};

struct ExpertSolverStats {
  int rounds = 0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double eps_final = 0.0;
  bool polished = false;
  bool zero_fallback = false;
};

struct ExpertTrajectory {
  Eigen::MatrixXd actions;  // ESS x T, MW
  Eigen::MatrixXd socs;     // ESS x (T + 1)
  double cost_eur = 0.0;
  double zero_action_cost_eur = 0.0;
  bool ac_feasible = false;
  int ac_violations = 0;
  ExpertSolverStats stats;
};

/// Operation cost of an action schedule (EUR).
double schedule_cost(const DispatchProblem& prob, const Eigen::MatrixXd& actions);

/// Runs the schedule through the env's action clipping and SOC recursion.
/// Returns the applied actions; `socs` receives the SOC path.
Eigen::MatrixXd replay_schedule(const DispatchProblem& prob, const Eigen::MatrixXd& actions, Eigen::MatrixXd& socs);

/// Number of true-limit violations (voltage and current) over the day when
/// the schedule is applied to the AC model.
int count_ac_violations(const DispatchProblem& prob, const Eigen::MatrixXd& actions);

ExpertTrajectory solve_day(const DispatchProblem& prob, const ExpertOptions& opts = {});

// One expert transition, reconstructed by replaying the trajectory through
// the env. `obs` is the env observation at decision time.
struct ExpertPair {
  std::string day;
  int t = 0;
  Eigen::VectorXd obs;
  Eigen::VectorXd action;  // MW
  double reward = 0.0;
  double shaped_reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
};

struct ExpertDataset {
  std::string network_hash;
  ObsNormalization norm;
  std::vector<std::string> days;
  std::vector<ExpertPair> pairs;

  std::size_t obs_size() const { return pairs.empty() ? 0 : static_cast<std::size_t>(pairs.front().obs.size()); }
  std::size_t action_size() const {
    return pairs.empty() ? 0 : static_cast<std::size_t>(pairs.front().action.size());
  }
};

struct ExpertDaySummary {
  std::string date;
  std::string status;  // ok | ac_infeasible | infeasible | not_converged
  double cost_eur = 0.0;
  double zero_action_cost_eur = 0.0;
  double replay_cost_eur = 0.0;
  bool ac_feasible = false;
  int rounds = 0;
  int iterations = 0;
  double eps_final = 0.0;
};

struct CollectResult {
  ExpertDataset dataset;
  std::vector<ExpertDaySummary> summary;
  std::vector<ExpertTrajectory> trajectories;  // parallel to summary; empty for failed days
};

/// Solves and replays every day. Days that fail or stay AC-infeasible are
/// skipped (reported in the summary with a warning on stderr).
CollectResult collect_dataset(const Network& net, const Sensitivities& sens, const std::vector<const ScenarioDay*>& days,
                              const EnvConfig& env_cfg, const ExpertOptions& opts = {});

/// JSON lines: a header record, then one record per pair.
void write_dataset(const std::filesystem::path& path, const ExpertDataset& ds);
ExpertDataset read_dataset(const std::filesystem::path& path);

void write_summary_csv(const std::filesystem::path& path, const std::vector<ExpertDaySummary>& summary);

}  // namespace safeess
