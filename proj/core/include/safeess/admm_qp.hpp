#pragma once

#include <Eigen/Dense>

namespace safeess {

// Convex QP
//   minimize 0.5 x'Px + q'x  subject to  l <= A x <= u
// solved with the operator-splitting iteration used by OSQP (Ruiz
// equilibration, over-relaxation, adaptive step size). Once the iterate is
// close, an active-set polish is tried and kept only if sign-constrained
// multipliers certify the KKT conditions to eps_abs. Sized for the day-ahead
// dispatch problems here: a few hundred variables, sparse constraint rows.
struct AdmmSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-6;
  double eps_rel = 0.0;
  double eps_prim_inf = 1e-7;
  int max_iterations = 200000;
  int check_every = 10;
  int adapt_every = 50;
  int scaling_iterations = 15;
  bool polish = true;
  int polish_every = 100;
  double polish_trigger = 1e-1;  // try polishing once both residuals are below this
};

enum class AdmmStatus { kSolved, kPrimalInfeasible, kMaxIterations };

struct AdmmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  AdmmStatus status = AdmmStatus::kMaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool polished = false;
};

AdmmResult solve_admm_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& l, const Eigen::VectorXd& u, const AdmmSettings& settings = {});

}  // namespace safeess
