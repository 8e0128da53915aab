#include "safeess/admm_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>

namespace safeess {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Residuals {
  double prim = 0.0;
  double dual = 0.0;
};

// Non-negative least squares min |M w - b|, w >= 0 (Lawson-Hanson), started
// from a guessed passive set.
Eigen::VectorXd nnls(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, std::vector<char> passive) {
  const Eigen::Index k = M.cols();
  const double tol = 1e-12 * (1.0 + inf_norm(b)) * (1.0 + M.cwiseAbs().maxCoeff());
  auto solve_passive = [&](const std::vector<char>& pas) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (pas[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
    if (idx.empty()) return z;
    Eigen::MatrixXd sub(M.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = M.col(idx[c]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zs(static_cast<Eigen::Index>(c));
    return z;
  };

  // Warm start: shrink the guess until its least-squares solution is positive.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  for (int guard = 0; guard < k + 1; ++guard) {
    const Eigen::VectorXd z = solve_passive(passive);
    bool dropped = false;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
        passive[static_cast<std::size_t>(j)] = 0;
        dropped = true;
      }
    }
    if (!dropped) {
      w = z;
      break;
    }
  }

  for (int outer = 0; outer < 3 * k + 10; ++outer) {
    const Eigen::VectorXd grad = M.transpose() * (b - M * w);
    Eigen::Index best = -1;
    double best_g = tol;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > best_g) {
        best_g = grad(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;
    for (int inner = 0; inner < k + 1; ++inner) {
      const Eigen::VectorXd z = solve_passive(passive);
      double alpha = kInf;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) alpha = std::min(alpha, w(j) / (w(j) - z(j)));
      }
      if (!std::isfinite(alpha)) {
        w = z;
        break;
      }
      w += alpha * (z - w);
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)] && w(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = 0;
          w(j) = 0.0;
        }
      }
    }
  }
  return w;
}

struct Certificate {
  Eigen::VectorXd y;
  double primal = kInf;
  double dual = kInf;
};

// KKT multipliers for a candidate point: sign-constrained least squares over
// the rows active at x. `y_hint` seeds the active-set guess.
Certificate certify(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const SpMat& A, const Eigen::MatrixXd& Ad,
                    const Eigen::VectorXd& l,
                    const Eigen::VectorXd& u, const Eigen::VectorXd& x, const Eigen::VectorXd& y_hint) {
  Certificate c;
  const Eigen::Index m = A.rows();
  const Eigen::VectorXd Ax = A * x;
  c.primal = std::max({0.0, (l - Ax).maxCoeff(), (Ax - u).maxCoeff()});
  std::vector<Eigen::Index> rows;
  std::vector<double> sign;
  std::vector<char> guess;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool at_u = std::isfinite(u(i)) && u(i) - Ax(i) <= 1e-9 * std::max(1.0, std::abs(u(i)));
    const bool at_l = std::isfinite(l(i)) && Ax(i) - l(i) <= 1e-9 * std::max(1.0, std::abs(l(i)));
    if (at_u) {
      rows.push_back(i);
      sign.push_back(1.0);
      guess.push_back(y_hint(i) > 0.0);
    }
    if (at_l) {
      rows.push_back(i);
      sign.push_back(-1.0);
      guess.push_back(y_hint(i) < 0.0);
    }
  }
  Eigen::MatrixXd M(x.size(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) M.col(static_cast<Eigen::Index>(j)) = sign[j] * Ad.row(rows[j]).transpose();
  const Eigen::VectorXd g = P * x + q;
  c.y = Eigen::VectorXd::Zero(m);
  if (!rows.empty()) {
    const Eigen::VectorXd w = nnls(M, -g, guess);
    for (std::size_t j = 0; j < rows.size(); ++j) c.y(rows[j]) += sign[j] * w(static_cast<Eigen::Index>(j));
  }
  c.dual = inf_norm(g + A.transpose() * c.y);
  return c;
}

// Equality-constrained solve on the active set guessed from (z, y), as in
// OSQP's solution polishing. Rows the solution violates join the active set
// and the solve is repeated. Returns an empty vector on failure.
Eigen::VectorXd polish_point(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& Ad,
                             const Eigen::VectorXd& l, const Eigen::VectorXd& u, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& y) {
  const Eigen::Index n = P.rows();
  const Eigen::Index m = Ad.rows();
  std::vector<int> side(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(l(i)) && z(i) - l(i) < -y(i)) side[static_cast<std::size_t>(i)] = -1;
    else if (std::isfinite(u(i)) && u(i) - z(i) < y(i)) side[static_cast<std::size_t>(i)] = 1;
  }
  const double delta = 1e-9;
  Eigen::VectorXd x;
  for (int round = 0; round < 10; ++round) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (side[static_cast<std::size_t>(i)] != 0) rows.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    K.topLeftCorner(n, n) = P;
    Eigen::VectorXd b(n + k);
    b.head(n) = -q;
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index i = rows[static_cast<std::size_t>(j)];
      K.block(n + j, 0, 1, n) = Ad.row(i);
      K.block(0, n + j, n, 1) = Ad.row(i).transpose();
      b(n + j) = side[static_cast<std::size_t>(i)] > 0 ? u(i) : l(i);
    }
    Eigen::MatrixXd K_reg = K;
    K_reg.topLeftCorner(n, n) += delta * Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index j = 0; j < k; ++j) K_reg(n + j, n + j) = -delta;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K_reg);
    Eigen::VectorXd sol = lu.solve(b);
    for (int it = 0; it < 5; ++it) sol += lu.solve(b - K * sol);
    if (!sol.allFinite()) return {};
    x = sol.head(n);

    const Eigen::VectorXd Ax = Ad * x;
    bool added = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (side[static_cast<std::size_t>(i)] != 0) continue;
      if (Ax(i) > u(i) + 1e-9 * std::max(1.0, std::abs(u(i)))) {
        side[static_cast<std::size_t>(i)] = 1;
        added = true;
      } else if (Ax(i) < l(i) - 1e-9 * std::max(1.0, std::abs(l(i)))) {
        side[static_cast<std::size_t>(i)] = -1;
        added = true;
      }
    }
    if (!added) break;
  }
  return x;
}

}  // namespace

AdmmResult solve_admm_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& l, const Eigen::VectorXd& u, const AdmmSettings& s) {
  const Eigen::Index n = P.rows();
  const Eigen::Index m = A.rows();
  if (P.cols() != n || q.size() != n || A.cols() != n || l.size() != m || u.size() != m) {
    throw std::invalid_argument("solve_admm_qp: dimension mismatch");
  }
  if ((l.array() > u.array()).any()) throw std::invalid_argument("solve_admm_qp: l > u");

  // Ruiz equilibration of [P A'; A 0], then cost scaling.
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd E = Eigen::VectorXd::Ones(m);
  Eigen::MatrixXd Ps = P;
  Eigen::MatrixXd Ad = A;
  for (int it = 0; it < s.scaling_iterations; ++it) {
    Eigen::VectorXd dcol(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double nrm = std::max(Ps.col(j).cwiseAbs().maxCoeff(), m ? Ad.col(j).cwiseAbs().maxCoeff() : 0.0);
      dcol(j) = nrm > 1e-8 ? 1.0 / std::sqrt(nrm) : 1.0;
    }
    Eigen::VectorXd erow(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nrm = Ad.row(i).cwiseAbs().maxCoeff();
      erow(i) = nrm > 1e-8 ? 1.0 / std::sqrt(nrm) : 1.0;
    }
    Ps = dcol.asDiagonal() * Ps * dcol.asDiagonal();
    Ad = erow.asDiagonal() * Ad * dcol.asDiagonal();
    D = D.cwiseProduct(dcol);
    E = E.cwiseProduct(erow);
  }
  Eigen::VectorXd qs = D.cwiseProduct(q);
  double c = 1.0;
  {
    const double scale = std::max(Ps.colwise().lpNorm<Eigen::Infinity>().mean(), inf_norm(qs));
    if (scale > 1e-8) c = 1.0 / scale;
  }
  Ps *= c;
  qs *= c;
  const Eigen::VectorXd ls = (E.array() * l.array()).matrix();
  const Eigen::VectorXd us = (E.array() * u.array()).matrix();
  const SpMat As = Ad.sparseView();
  const SpMat A_orig = A.sparseView();
  const SpMat Ps_sp = Ps.sparseView();
  const SpMat P_sp = P.sparseView();

  // Equality rows get a stiffer penalty, free rows a soft one.
  auto rho_vector = [&](double rho) {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!std::isfinite(l(i)) && !std::isfinite(u(i))) r(i) = 1e-6;
      else if (u(i) - l(i) < 1e-12) r(i) = 1e3 * rho;
      else r(i) = rho;
    }
    return r;
  };

  double rho = s.rho;
  Eigen::VectorXd rho_vec = rho_vector(rho);
  auto factor = [&](const Eigen::VectorXd& rv) {
    Eigen::MatrixXd K = Ps + s.sigma * Eigen::MatrixXd::Identity(n, n);
    K += Eigen::MatrixXd(As.transpose() * rv.asDiagonal() * As);
    return Eigen::LLT<Eigen::MatrixXd>(K);
  };
  Eigen::LLT<Eigen::MatrixXd> llt = factor(rho_vec);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m).cwiseMax(ls).cwiseMin(us);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y_prev = y;

  AdmmResult res;
  Eigen::VectorXd zu;
  auto unscale = [&]() {
    res.x = D.cwiseProduct(x);
    res.y = E.cwiseProduct(y) / c;
    zu = z.cwiseQuotient(E);
    Residuals r;
    r.prim = inf_norm(A_orig * res.x - zu);
    r.dual = inf_norm(P_sp * res.x + q + A_orig.transpose() * res.y);
    res.primal_residual = r.prim;
    res.dual_residual = r.dual;
    return r;
  };
  // Polished candidate accepted only with a KKT certificate at tolerance.
  auto try_polish = [&]() {
    const Eigen::VectorXd xp = polish_point(P, q, A, l, u, zu, res.y);
    if (xp.size() != n) return false;
    const Certificate cert = certify(P, q, A_orig, A, l, u, xp, res.y);
    if (cert.primal > s.eps_abs || cert.dual > s.eps_abs) return false;
    res.x = xp;
    res.y = cert.y;
    res.primal_residual = cert.primal;
    res.dual_residual = cert.dual;
    res.polished = true;
    res.status = AdmmStatus::kSolved;
    return true;
  };

  int polish_gap = s.polish_every;
  int next_polish = 0;
  for (int k = 1; k <= s.max_iterations; ++k) {
    res.iterations = k;
    const Eigen::VectorXd rhs = s.sigma * x - qs + As.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = As * x_tilde;
    const Eigen::VectorXd x_new = s.alpha * x_tilde + (1.0 - s.alpha) * x;
    const Eigen::VectorXd z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * z;
    const Eigen::VectorXd z_new = (z_relaxed + y.cwiseQuotient(rho_vec)).cwiseMax(ls).cwiseMin(us);
    y_prev = y;
    y = y + rho_vec.cwiseProduct(z_relaxed - z_new);
    x = x_new;
    z = z_new;

    if (k % s.check_every != 0 && k != s.max_iterations) continue;
    const Residuals r = unscale();
    if (r.prim <= s.eps_abs && r.dual <= s.eps_abs) {
      res.status = AdmmStatus::kSolved;
      break;
    }
    if (s.polish && k >= next_polish && std::max(r.prim, r.dual) <= s.polish_trigger) {
      if (try_polish()) break;
      polish_gap *= 2;
      next_polish = k + polish_gap;
    }

    // Primal infeasibility certificate on the change in y.
    const Eigen::VectorXd dy = y - y_prev;
    const double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-12) {
      const double at_dy = inf_norm(D.cwiseProduct(As.transpose() * dy));
      double support = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (dy(i) > 0.0) support += std::isfinite(us(i)) ? us(i) * dy(i) : kInf;
        else if (dy(i) < 0.0) support += std::isfinite(ls(i)) ? ls(i) * dy(i) : kInf;
      }
      if (at_dy <= s.eps_prim_inf * dy_norm && support <= -s.eps_prim_inf * dy_norm) {
        res.status = AdmmStatus::kPrimalInfeasible;
        break;
      }
    }
    if (k % s.adapt_every == 0) {
      const Eigen::VectorXd Ax = As * x;
      const Eigen::VectorXd Px = Ps_sp * x;
      const Eigen::VectorXd Aty = As.transpose() * y;
      const double prim_n = inf_norm(Ax - z) / std::max({inf_norm(Ax), inf_norm(z), 1e-12});
      const double dual_n = inf_norm(Px + qs + Aty) / std::max({inf_norm(Px), inf_norm(Aty), inf_norm(qs), 1e-12});
      const double rho_new = std::clamp(rho * std::sqrt(prim_n / std::max(dual_n, 1e-14)), 1e-6, 1e6);
      if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
        rho = rho_new;
        rho_vec = rho_vector(rho);
        llt = factor(rho_vec);
      }
    }
  }
  if (res.status == AdmmStatus::kMaxIterations && s.polish) {
    unscale();
    try_polish();
  }
  res.objective = 0.5 * res.x.dot(P * res.x) + q.dot(res.x);
  return res;
}

}  // namespace safeess
