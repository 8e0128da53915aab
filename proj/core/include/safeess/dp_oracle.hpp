#pragma once

#include <Eigen/Dense>

#include "safeess/expert.hpp"

namespace safeess {

struct DpOptions {
  int soc_grid = 201;
  int action_grid = 41;
  bool terminal_soc = true;
};

struct DpResult {
  double cost_eur = 0.0;
  bool feasible = false;
  Eigen::MatrixXd actions;  // ESS x T, MW
  Eigen::MatrixXd socs;     // ESS x (T + 1)
};

/// Brute-force dynamic program over gridded SOC and gridded storage power.
/// Every (step, joint action) pair is screened with the full AC model against
/// the true voltage and current limits. At most two ESS.
DpResult dp_oracle(const DispatchProblem& prob, const DpOptions& opts = {});

}  // namespace safeess
