#include "safeess/powerflow.hpp"

#include <algorithm>
#include <cmath>

namespace safeess {

namespace {

std::size_t idx(int id) { return static_cast<std::size_t>(id - 1); }
Eigen::Index ei(int id) { return static_cast<Eigen::Index>(id - 1); }
Eigen::Index line_of(int id) { return static_cast<Eigen::Index>(Network::pos(id)); }

}  // namespace

PowerFlowSolution solve_ac(const Network& net, const Injections& inj, const SweepOptions& opts) {
  const auto n = static_cast<Eigen::Index>(net.bus_count());
  const auto nl = static_cast<Eigen::Index>(net.lines.size());
  if (inj.p.size() != nl || inj.q.size() != nl) {
    throw std::invalid_argument("solve_ac: injection length must equal the number of non-slack buses");
  }

  PowerFlowSolution sol;
  sol.v_sq = Eigen::VectorXd::Constant(n, net.v0_sq);
  sol.i_sq = Eigen::VectorXd::Zero(nl);
  sol.p_line = Eigen::VectorXd::Zero(nl);
  sol.q_line = Eigen::VectorXd::Zero(nl);

  const auto& order = net.bfs_order;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    sol.iterations = it;

    // Backward: sending-end flow = own demand + downstream sending flows + own loss.
    for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
      const int id = *rit;
      if (id == 1) continue;
      const Eigen::Index k = line_of(id);
      const Line& line = net.lines[static_cast<std::size_t>(k)];
      double p = -inj.p(k) + line.r * sol.i_sq(k);
      double q = -inj.q(k) + line.x * sol.i_sq(k);
      for (int child : net.children[idx(id)]) {
        p += sol.p_line(line_of(child));
        q += sol.q_line(line_of(child));
      }
      sol.p_line(k) = p;
      sol.q_line(k) = q;
    }

    // Forward: voltage drop along each line, then current from the sending end.
    double change = 0.0;
    for (int id : order) {
      if (id == 1) continue;
      const Eigen::Index k = line_of(id);
      const Line& line = net.lines[static_cast<std::size_t>(k)];
      const double v_from = sol.v_sq(ei(line.from_bus));
      const double z_sq = line.r * line.r + line.x * line.x;
      const double v_to = v_from - 2.0 * (line.r * sol.p_line(k) + line.x * sol.q_line(k)) + z_sq * sol.i_sq(k);
      if (!(v_to > 0.0)) {
        throw VoltageCollapseError("voltage collapse at bus " + std::to_string(net.external_id(id)));
      }
      const double i_new = (sol.p_line(k) * sol.p_line(k) + sol.q_line(k) * sol.q_line(k)) / v_from;
      change = std::max({change, std::abs(v_to - sol.v_sq(ei(id))), std::abs(i_new - sol.i_sq(k))});
      sol.v_sq(ei(id)) = v_to;
      sol.i_sq(k) = i_new;
    }
    if (!std::isfinite(change)) {
      throw VoltageCollapseError("power flow diverged");
    }
    if (change < opts.tolerance) {
      sol.converged = true;
      break;
    }
  }

  // One final backward pass so that flows are consistent with the last currents.
  for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
    const int id = *rit;
    if (id == 1) continue;
    const Eigen::Index k = line_of(id);
    const Line& line = net.lines[static_cast<std::size_t>(k)];
    double p = -inj.p(k) + line.r * sol.i_sq(k);
    double q = -inj.q(k) + line.x * sol.i_sq(k);
    for (int child : net.children[idx(id)]) {
      p += sol.p_line(line_of(child));
      q += sol.q_line(line_of(child));
    }
    sol.p_line(k) = p;
    sol.q_line(k) = q;
  }
  sol.p_slack = 0.0;
  sol.q_slack = 0.0;
  for (int child : net.children[0]) {
    sol.p_slack += sol.p_line(line_of(child));
    sol.q_slack += sol.q_line(line_of(child));
  }
  return sol;
}

Eigen::VectorXd linear_v_sq(const Network& net, const Sensitivities& sens, const Injections& inj) {
  const auto n = static_cast<Eigen::Index>(net.bus_count());
  Eigen::VectorXd v(n);
  v(0) = net.v0_sq;
  v.tail(n - 1) = Eigen::VectorXd::Constant(n - 1, net.v0_sq) + 2.0 * (sens.r_path * inj.p + sens.x_path * inj.q);
  return v;
}

double BranchFlowResiduals::max() const {
  return std::max({active_balance, reactive_balance, voltage_drop, current});
}

BranchFlowResiduals residuals(const Network& net, const Injections& inj, const PowerFlowSolution& sol) {
  BranchFlowResiduals res;
  for (const Bus& bus : net.buses) {
    // Inflow net of loss on the feeder, minus outflow, plus injection (or slack import).
    double p = 0.0;
    double q = 0.0;
    if (bus.id == 1) {
      p = sol.p_slack;
      q = sol.q_slack;
    } else {
      const Eigen::Index k = line_of(bus.id);
      const Line& line = net.lines[static_cast<std::size_t>(k)];
      p = sol.p_line(k) - line.r * sol.i_sq(k) + inj.p(k);
      q = sol.q_line(k) - line.x * sol.i_sq(k) + inj.q(k);
    }
    for (int child : net.children[idx(bus.id)]) {
      p -= sol.p_line(line_of(child));
      q -= sol.q_line(line_of(child));
    }
    res.active_balance = std::max(res.active_balance, std::abs(p));
    res.reactive_balance = std::max(res.reactive_balance, std::abs(q));
  }
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const Line& line = net.lines[k];
    const auto kk = static_cast<Eigen::Index>(k);
    const double v_from = sol.v_sq(ei(line.from_bus));
    const double v_to = sol.v_sq(ei(line.to_bus));
    const double z_sq = line.r * line.r + line.x * line.x;
    const double drop = v_from - v_to - 2.0 * (line.r * sol.p_line(kk) + line.x * sol.q_line(kk)) + z_sq * sol.i_sq(kk);
    const double cur = v_from * sol.i_sq(kk) - (sol.p_line(kk) * sol.p_line(kk) + sol.q_line(kk) * sol.q_line(kk));
    res.voltage_drop = std::max(res.voltage_drop, std::abs(drop));
    res.current = std::max(res.current, std::abs(cur));
  }
  return res;
}

ViolationReport violations(const Network& net, const PowerFlowSolution& sol) {
  ViolationReport report;
  for (const Bus& bus : net.buses) {
    const double v = sol.v_sq(ei(bus.id));
    if (v < bus.v_min_sq) {
      report.buses.push_back({bus.id, false, bus.v_min_sq - v});
    } else if (v > bus.v_max_sq) {
      report.buses.push_back({bus.id, true, v - bus.v_max_sq});
    }
  }
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const double i = sol.i_sq(static_cast<Eigen::Index>(k));
    if (i > net.lines[k].i_max_sq) {
      report.lines.push_back({static_cast<int>(k), i - net.lines[k].i_max_sq});
    }
  }
  return report;
}

nlohmann::json to_json(const Network& net, const ViolationReport& report) {
  nlohmann::json out;
  out["voltage_count"] = report.voltage_count();
  out["current_count"] = report.current_count();
  out["buses"] = nlohmann::json::array();
  for (const auto& v : report.buses) {
    out["buses"].push_back({{"bus", net.external_id(v.bus)},
                            {"kind", v.upper ? "upper" : "lower"},
                            {"magnitude_pu2", v.magnitude}});
  }
  out["lines"] = nlohmann::json::array();
  for (const auto& v : report.lines) {
    const Line& line = net.lines[static_cast<std::size_t>(v.line)];
    out["lines"].push_back({{"from", net.external_id(line.from_bus)},
                            {"to", net.external_id(line.to_bus)},
                            {"magnitude_pu2", v.magnitude}});
  }
  return out;
}

nlohmann::json to_json(const Network& net, const PowerFlowSolution& sol) {
  nlohmann::json out;
  out["converged"] = sol.converged;
  out["iterations"] = sol.iterations;
  out["p_slack_pu"] = sol.p_slack;
  out["q_slack_pu"] = sol.q_slack;
  out["buses"] = nlohmann::json::array();
  for (const Bus& bus : net.buses) {
    out["buses"].push_back({{"id", net.external_id(bus.id)}, {"v_sq", sol.v_sq(ei(bus.id))},
                            {"v", std::sqrt(sol.v_sq(ei(bus.id)))}});
  }
  out["lines"] = nlohmann::json::array();
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out["lines"].push_back({{"from", net.external_id(net.lines[k].from_bus)},
                            {"to", net.external_id(net.lines[k].to_bus)},
                            {"p", sol.p_line(kk)},
                            {"q", sol.q_line(kk)},
                            {"i_sq", sol.i_sq(kk)}});
  }
  return out;
}

}  // namespace safeess
