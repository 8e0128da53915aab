#include "safeess/dense_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safeess {

PolyhedronProjection project_onto_polyhedron(const Eigen::VectorXd& target, const Eigen::MatrixXd& C,
                                             const Eigen::VectorXd& d, const DenseQpOptions& opts) {
  const Eigen::Index n = target.size();
  const Eigen::Index m = C.rows();
  if (C.cols() != n || d.size() != m) throw std::invalid_argument("project_onto_polyhedron: dimension mismatch");

  // Work with unit-norm rows: n_i^T x >= b_i where n_i = -c_i/|c_i|, b_i = -d_i/|c_i|.
  Eigen::VectorXd row_norm = C.rowwise().norm();
  if ((row_norm.array() <= 0.0).any()) throw std::invalid_argument("project_onto_polyhedron: zero constraint row");
  Eigen::MatrixXd normals = -(row_norm.cwiseInverse().asDiagonal() * C).transpose();  // n x m
  Eigen::VectorXd bounds = -d.cwiseQuotient(row_norm);

  PolyhedronProjection out;
  out.x = target;
  std::vector<int> active;
  std::vector<double> u;  // multipliers of active rows (normalized)
  const double inf = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    out.iterations = iter + 1;
    // Most violated row.
    Eigen::VectorXd slack = normals.transpose() * out.x - bounds;
    Eigen::Index p = -1;
    double worst = -opts.violation_tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (slack(i) < worst && std::find(active.begin(), active.end(), static_cast<int>(i)) == active.end()) {
        worst = slack(i);
        p = i;
      }
    }
    if (p < 0) {
      out.feasible = true;
      break;
    }

    double u_p = 0.0;
    bool added = false;
    while (!added) {
      const auto q = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd z = normals.col(p);
      Eigen::VectorXd r;
      if (q > 0) {
        Eigen::MatrixXd N(n, q);
        for (Eigen::Index j = 0; j < q; ++j) N.col(j) = normals.col(active[static_cast<std::size_t>(j)]);
        r = (N.transpose() * N).ldlt().solve(N.transpose() * normals.col(p));
        z -= N * r;
      }

      double t1 = inf;
      Eigen::Index k = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r(j) > 1e-14) {
          const double ratio = u[static_cast<std::size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            k = j;
          }
        }
      }
      const double zn = z.dot(normals.col(p));
      const bool z_zero = z.norm() <= 1e-12;
      const double s_p = normals.col(p).dot(out.x) - bounds(p);
      const double t2 = z_zero ? inf : -s_p / zn;

      if (z_zero && t1 == inf) {
        out.feasible = false;
        out.active = active;
        out.multipliers = Eigen::VectorXd::Zero(m);
        return out;
      }
      const double t = std::min(t1, t2);
      for (Eigen::Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
      u_p += t;
      if (!z_zero) out.x += t * z;

      if (t2 <= t1) {
        active.push_back(static_cast<int>(p));
        u.push_back(u_p);
        added = true;
      } else {
        active.erase(active.begin() + k);
        u.erase(u.begin() + k);
      }
    }
  }

  out.active = active;
  out.multipliers = Eigen::VectorXd::Zero(m);
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(active[j]);
    out.multipliers(i) = std::max(0.0, u[j]) / row_norm(i);
  }
  return out;
}

double projection_kkt_residual(const Eigen::VectorXd& target, const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers) {
  const Eigen::VectorXd stationarity = x - target + C.transpose() * multipliers;
  const Eigen::VectorXd slack = d - C * x;
  double res = stationarity.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    res = std::max(res, std::max(0.0, -slack(i)));
    res = std::max(res, std::max(0.0, -multipliers(i)));
    res = std::max(res, std::abs(multipliers(i) * slack(i)));
  }
  return res;
}

}  // namespace safeess
