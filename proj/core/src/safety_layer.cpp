#include "safeess/safety_layer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "safeess/dense_qp.hpp"

namespace safeess {

namespace {

// Stacked linear constraints in the action variables.
struct ConstraintSet {
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::vector<ActiveConstraint> tags;  // band rows only; box rows follow
  std::size_t band_rows = 0;
  double constant_violation = 0.0;  // rows that no action can influence
};

Eigen::VectorXd base_v_sq(const SafetyParams& p, const EnvState& s) {
  const auto nb = s.p_net.size();
  return Eigen::VectorXd::Constant(nb, p.v0_sq) - 2.0 * (p.sens.r_path * s.p_net + p.sens.x_path * s.q_net);
}

ConstraintSet build_constraints(const SafetyParams& p, const EnvState& s, double relax, const Eigen::VectorXd& box_min,
                                const Eigen::VectorXd& box_max) {
  const Eigen::VectorXd base = base_v_sq(p, s);
  const Eigen::Index nb = base.size();
  const Eigen::Index ne = box_min.size();
  const double gain_tol = 1e-14;

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  ConstraintSet cs;
  for (Eigen::Index k = 0; k < nb; ++k) {
    const Eigen::VectorXd g = p.ess_gain.row(k).transpose();
    const double upper = p.v_max_sq(k) - p.eps + relax - base(k);  // g.a <= upper
    const double lower = base(k) - p.v_min_sq(k) - p.eps + relax;  // -g.a <= lower
    if (g.cwiseAbs().maxCoeff() <= gain_tol) {
      cs.constant_violation = std::max({cs.constant_violation, -upper, -lower});
      continue;
    }
    rows.push_back(g);
    rhs.push_back(upper);
    cs.tags.push_back({static_cast<int>(k) + 2, true});
    rows.push_back(-g);
    rhs.push_back(lower);
    cs.tags.push_back({static_cast<int>(k) + 2, false});
  }
  cs.band_rows = rows.size();
  for (Eigen::Index b = 0; b < ne; ++b) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(ne, b);
    rows.push_back(e);
    rhs.push_back(box_max(b));
    rows.push_back(-e);
    rhs.push_back(-box_min(b));
  }
  cs.C.resize(static_cast<Eigen::Index>(rows.size()), ne);
  cs.d.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cs.C.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    cs.d(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  return cs;
}

}  // namespace

SafetyParams make_safety_params(const Network& net, const Sensitivities& sens, double eps) {
  SafetyParams p;
  p.eps = eps;
  p.v0_sq = net.v0_sq;
  p.base_mva = net.base_mva;
  p.sens = sens;
  const auto nb = static_cast<Eigen::Index>(net.load_bus_count());
  const auto ne = static_cast<Eigen::Index>(net.ess_count());
  p.v_min_sq.resize(nb);
  p.v_max_sq.resize(nb);
  double min_band = 1e9;
  for (Eigen::Index k = 0; k < nb; ++k) {
    const Bus& bus = net.bus(static_cast<int>(k) + 2);
    p.v_min_sq(k) = bus.v_min_sq;
    p.v_max_sq(k) = bus.v_max_sq;
    min_band = std::min(min_band, bus.v_max_sq - bus.v_min_sq);
  }
  if (eps < 0.0 || eps >= 0.5 * min_band) {
    throw std::invalid_argument("safety eps must satisfy 0 <= eps < (v_max_sq - v_min_sq)/2");
  }
  p.action_min.resize(ne);
  p.action_max.resize(ne);
  p.ess_gain.resize(nb, ne);
  for (Eigen::Index b = 0; b < ne; ++b) {
    const EssSpec& e = net.ess[static_cast<std::size_t>(b)];
    p.action_min(b) = e.p_min;
    p.action_max(b) = e.p_max;
    // Charging draws power at the ESS bus: injection falls by p_b / base.
    p.ess_gain.col(b) = -2.0 * sens.r_path.col(static_cast<Eigen::Index>(Network::pos(e.bus))) / net.base_mva;
  }
  return p;
}

Eigen::VectorXd predicted_v_sq(const SafetyParams& params, const EnvState& state, const Eigen::VectorXd& a) {
  return base_v_sq(params, state) + params.ess_gain * a;
}

bool is_safe(const SafetyParams& params, const EnvState& state, const Action& a) {
  const Eigen::VectorXd v = predicted_v_sq(params, state, a.p_b);
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v(k) < params.v_min_sq(k) + params.eps || v(k) > params.v_max_sq(k) - params.eps) return false;
  }
  return true;
}

ProjectionResult project(const SafetyParams& params, const EnvState& state, const Action& a) {
  return project(params, state, a, params.action_min, params.action_max);
}

ProjectionResult project(const SafetyParams& params, const EnvState& state, const Action& a,
                         const Eigen::VectorXd& box_min, const Eigen::VectorXd& box_max) {
  if (a.p_b.size() != params.action_min.size() || box_min.size() != a.p_b.size() || box_max.size() != a.p_b.size()) {
    throw std::invalid_argument("project: action has wrong dimension");
  }
  ProjectionResult res;
  const Eigen::VectorXd& target = a.p_b;
  const bool in_box = (target.array() >= box_min.array()).all() && (target.array() <= box_max.array()).all();
  if (in_box && is_safe(params, state, a)) {
    res.a_hat = a;
    return res;
  }

  ConstraintSet cs = build_constraints(params, state, 0.0, box_min, box_max);
  PolyhedronProjection qp;
  if (cs.constant_violation <= 0.0) qp = project_onto_polyhedron(target, cs.C, cs.d);

  if (cs.constant_violation > 0.0 || !qp.feasible) {
    // Chebyshev fallback: smallest uniform relaxation of the band that admits
    // a box-feasible action, then the closest action under that relaxation.
    res.infeasible = true;
    const Eigen::VectorXd clipped = target.cwiseMax(box_min).cwiseMin(box_max);
    double lo = std::max(0.0, cs.constant_violation);
    double hi = lo;
    {
      const ConstraintSet probe = build_constraints(params, state, 0.0, box_min, box_max);
      const Eigen::VectorXd slack = probe.C * clipped - probe.d;
      for (std::size_t i = 0; i < probe.band_rows; ++i) hi = std::max(hi, slack(static_cast<Eigen::Index>(i)));
    }
    for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      const ConstraintSet relaxed = build_constraints(params, state, mid, box_min, box_max);
      if (project_onto_polyhedron(target, relaxed.C, relaxed.d).feasible) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    res.max_band_violation = hi;
    cs = build_constraints(params, state, hi + 1e-12, box_min, box_max);
    qp = project_onto_polyhedron(target, cs.C, cs.d);
    if (!qp.feasible) {
      qp.x = clipped;
      qp.multipliers = Eigen::VectorXd::Zero(cs.C.rows());
    }
  }

  res.a_hat.p_b = qp.x;
  res.qp_iterations = qp.iterations;
  res.kkt_residual = projection_kkt_residual(target, cs.C, cs.d, qp.x, qp.multipliers);
  res.changed = (qp.x.array() != target.array()).any();
  for (int row : qp.active) {
    if (static_cast<std::size_t>(row) < cs.band_rows) res.active_constraints.push_back(cs.tags[static_cast<std::size_t>(row)]);
  }
  return res;
}

nlohmann::json audit_record(const Network& net, int t, const Action& input, const ProjectionResult& result) {
  auto vec = [](const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  nlohmann::json active = nlohmann::json::array();
  for (const auto& c : result.active_constraints) {
    active.push_back({{"bus", net.external_id(c.bus)}, {"side", c.upper ? "upper" : "lower"}});
  }
  return {{"t", t},
          {"input_mw", vec(input.p_b)},
          {"output_mw", vec(result.a_hat.p_b)},
          {"changed", result.changed},
          {"infeasible", result.infeasible},
          {"active_constraints", active}};
}

}  // namespace safeess
