#pragma once

#include <vector>

#include <Eigen/Dense>

namespace safeess {

// Euclidean projection onto a polyhedron,
//   minimize 0.5 ||x - target||^2  subject to  C x <= d,
// by the Goldfarb-Idnani dual active-set method. Meant for a handful of
// variables; rows are normalized internally and all-zero rows must be
// filtered out by the caller.
struct PolyhedronProjection {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per row of C, zero when inactive
  std::vector<int> active;      // rows in the final active set
  bool feasible = false;
  int iterations = 0;
};

struct DenseQpOptions {
  double violation_tol = 1e-12;
  int max_iterations = 1000;
};

PolyhedronProjection project_onto_polyhedron(const Eigen::VectorXd& target, const Eigen::MatrixXd& C,
                                             const Eigen::VectorXd& d, const DenseQpOptions& opts = {});

/// Largest violation among stationarity, primal feasibility, dual sign and
/// complementarity for a candidate (x, multipliers).
double projection_kkt_residual(const Eigen::VectorXd& target, const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers);

}  // namespace safeess
