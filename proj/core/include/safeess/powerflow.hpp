#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/network.hpp"
#include "safeess/sensitivities.hpp"

namespace safeess {

/// Net nodal injections in pu over the non-slack buses, positive into the grid.
struct Injections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  static Injections zero(const Network& net) {
    const auto m = static_cast<Eigen::Index>(net.load_bus_count());
    return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  }
};

// Branch-flow solution. Bus vectors are indexed by internal id - 1 (slack
// first); line vectors follow Network::lines.
struct PowerFlowSolution {
  Eigen::VectorXd v_sq;
  Eigen::VectorXd i_sq;
  Eigen::VectorXd p_line;  // sending end
  Eigen::VectorXd q_line;
  double p_slack = 0.0;
  double q_slack = 0.0;
  bool converged = false;
  int iterations = 0;
};

class VoltageCollapseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepOptions {
  double tolerance = 1e-12;
  int max_iterations = 100;
};

/// Backward/forward sweep on the DistFlow equations. Throws
/// VoltageCollapseError if a squared voltage drops to zero or below; returns
/// converged = false when the iteration budget runs out.
PowerFlowSolution solve_ac(const Network& net, const Injections& inj, const SweepOptions& opts = {});

/// LinDistFlow squared voltages for every bus (slack first).
Eigen::VectorXd linear_v_sq(const Network& net, const Sensitivities& sens, const Injections& inj);

/// Max absolute residual of each branch-flow equation family.
struct BranchFlowResiduals {
  double active_balance = 0.0;
  double reactive_balance = 0.0;
  double voltage_drop = 0.0;
  double current = 0.0;

  double max() const;
};

BranchFlowResiduals residuals(const Network& net, const Injections& inj, const PowerFlowSolution& sol);

struct BusViolation {
  int bus = 0;  // internal id
  bool upper = false;
  double magnitude = 0.0;  // pu^2 beyond the limit
};

struct LineViolation {
  int line = 0;  // index into Network::lines
  double magnitude = 0.0;  // pu^2 above i_max_sq
};

struct ViolationReport {
  std::vector<BusViolation> buses;
  std::vector<LineViolation> lines;

  std::size_t voltage_count() const { return buses.size(); }
  std::size_t current_count() const { return lines.size(); }
  bool empty() const { return buses.empty() && lines.empty(); }
};

ViolationReport violations(const Network& net, const PowerFlowSolution& sol);

nlohmann::json to_json(const Network& net, const ViolationReport& report);
nlohmann::json to_json(const Network& net, const PowerFlowSolution& sol);

}  // namespace safeess
