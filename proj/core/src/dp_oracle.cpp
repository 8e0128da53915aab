#include "safeess/dp_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "safeess/powerflow.hpp"

namespace safeess {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSocTol = 1e-9;

struct Grid {
  double lo = 0.0;
  double step = 0.0;
  int size = 0;

  double at(int i) const { return lo + step * i; }
};

Grid make_grid(double lo, double hi, int size) {
  Grid g;
  g.lo = lo;
  g.size = size;
  g.step = size > 1 ? (hi - lo) / (size - 1) : 0.0;
  return g;
}

// Where a continuous SOC lands on the grid: lower index and weight of the
// upper neighbour. Weights within 1e-12 of a node snap to it.
struct Cell {
  int base = 0;
  double frac = 0.0;
  bool valid = false;
};

Cell locate(const Grid& g, double soc) {
  Cell c;
  double pos = g.step > 0.0 ? (soc - g.lo) / g.step : 0.0;
  pos = std::clamp(pos, 0.0, static_cast<double>(g.size - 1));
  int i = static_cast<int>(std::floor(pos));
  if (i >= g.size - 1) i = g.size - 2;
  c.base = i;
  c.frac = pos - i;
  if (c.frac < 1e-12) c.frac = 0.0;
  if (c.frac > 1.0 - 1e-12) {
    c.base = i + 1;
    c.frac = 0.0;
  }
  c.valid = true;
  return c;
}

double soc_after(const EssSpec& e, double soc, double p, double dt) {
  if (p > 0.0) return soc + e.eta_c * p * dt / e.e_cap;
  if (p < 0.0) return soc + p * dt / (e.eta_d * e.e_cap);
  return soc;
}

Cell transition_cell(const EssSpec& e, const Grid& g, double soc, double p, double dt) {
  const double s = soc_after(e, soc, p, dt);
  if (s < e.soc_min - kSocTol || s > e.soc_max + kSocTol) return {};
  return locate(g, std::clamp(s, e.soc_min, e.soc_max));
}

// Interpolated value; an infinite neighbour with nonzero weight gives infinity.
double lookup(const std::vector<double>& table, int stride, const Cell& c0, const Cell* c1) {
  auto at = [&](int i0, int i1) { return table[static_cast<std::size_t>(i0 + i1 * stride)]; };
  if (!c1) {
    double v = (1.0 - c0.frac) * at(c0.base, 0);
    if (c0.frac > 0.0) {
      const double hi = at(c0.base + 1, 0);
      if (!std::isfinite(hi)) return kInf;
      v += c0.frac * hi;
    }
    return std::isfinite(v) ? v : kInf;
  }
  double v = 0.0;
  for (int u1 = 0; u1 < 2; ++u1) {
    const double w1 = u1 ? c1->frac : 1.0 - c1->frac;
    if (w1 == 0.0) continue;
    for (int u0 = 0; u0 < 2; ++u0) {
      const double w0 = u0 ? c0.frac : 1.0 - c0.frac;
      if (w0 == 0.0) continue;
      const double x = at(c0.base + u0, c1->base + u1);
      if (!std::isfinite(x)) return kInf;
      v += w0 * w1 * x;
    }
  }
  return v;
}

}  // namespace

DpResult dp_oracle(const DispatchProblem& prob, const DpOptions& opts) {
  const Network& net = *prob.net;
  const ScenarioDay& day = *prob.day;
  const std::size_t B = net.ess_count();
  if (B == 0 || B > 2) throw std::invalid_argument("dp_oracle: needs one or two ESS (state space too large)");
  if (prob.horizon > 96) throw std::invalid_argument("dp_oracle: horizon too long");
  if (opts.soc_grid < 2 || opts.action_grid < 2) throw std::invalid_argument("dp_oracle: grids need two points");

  const int T = prob.horizon;
  const double dt = prob.dt_hours;
  const int G = opts.soc_grid;
  const int NAb = opts.action_grid;
  std::vector<Grid> soc_grids;
  std::vector<Grid> act_grids;
  for (const EssSpec& e : net.ess) {
    soc_grids.push_back(make_grid(e.soc_min, e.soc_max, G));
    act_grids.push_back(make_grid(e.p_min, e.p_max, NAb));
  }
  const int S = B == 1 ? G : G * G;
  const int NA = B == 1 ? NAb : NAb * NAb;
  auto action_index = [&](int ja, std::size_t b) { return b == 0 ? ja % NAb : ja / NAb; };
  auto joint_action = [&](int ja) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(B));
    for (std::size_t b = 0; b < B; ++b) a(static_cast<Eigen::Index>(b)) = act_grids[b].at(action_index(ja, b));
    return a;
  };

  // AC screening of every (step, joint action) against the true limits.
  std::vector<std::vector<char>> ac_ok(static_cast<std::size_t>(T), std::vector<char>(static_cast<std::size_t>(NA), 0));
  for (int t = 0; t < T; ++t) {
    for (int ja = 0; ja < NA; ++ja) {
      const Eigen::VectorXd a = joint_action(ja);
      Injections inj;
      inj.p = (day.p_pv.col(t) - day.p_load.col(t)) / net.base_mva;
      inj.q = -day.q_load.col(t) / net.base_mva;
      for (std::size_t b = 0; b < B; ++b) {
        inj.p(static_cast<Eigen::Index>(Network::pos(net.ess[b].bus))) -= a(static_cast<Eigen::Index>(b)) / net.base_mva;
      }
      try {
        const PowerFlowSolution sol = solve_ac(net, inj);
        ac_ok[static_cast<std::size_t>(t)][static_cast<std::size_t>(ja)] = sol.converged && violations(net, sol).empty();
      } catch (const VoltageCollapseError&) {
      }
    }
  }

  // Per-ESS transition tables on the grid: (soc index, action index) -> cell.
  std::vector<std::vector<Cell>> cells(B, std::vector<Cell>(static_cast<std::size_t>(G * NAb)));
  for (std::size_t b = 0; b < B; ++b) {
    for (int i = 0; i < G; ++i) {
      for (int j = 0; j < NAb; ++j) {
        cells[b][static_cast<std::size_t>(i * NAb + j)] =
            transition_cell(net.ess[b], soc_grids[b], soc_grids[b].at(i), act_grids[b].at(j), dt);
      }
    }
  }

  std::vector<std::vector<double>> value(static_cast<std::size_t>(T + 1),
                                         std::vector<double>(static_cast<std::size_t>(S), kInf));
  for (int s = 0; s < S; ++s) {
    bool ok = true;
    if (opts.terminal_soc) {
      ok = soc_grids[0].at(s % G) >= net.ess[0].soc_init - kSocTol;
      if (B == 2) ok = ok && soc_grids[1].at(s / G) >= net.ess[1].soc_init - kSocTol;
    }
    value[static_cast<std::size_t>(T)][static_cast<std::size_t>(s)] = ok ? 0.0 : kInf;
  }

  for (int t = T - 1; t >= 0; --t) {
    const double price = day.price[static_cast<std::size_t>(t)];
    const auto& next_value = value[static_cast<std::size_t>(t + 1)];
    const auto& ok = ac_ok[static_cast<std::size_t>(t)];
    auto& cur = value[static_cast<std::size_t>(t)];
    std::vector<double> stage(static_cast<std::size_t>(NA));
    for (int ja = 0; ja < NA; ++ja) stage[static_cast<std::size_t>(ja)] = price * joint_action(ja).sum() * dt;
    for (int s = 0; s < S; ++s) {
      const int i0 = s % G;
      const int i1 = B == 2 ? s / G : 0;
      double best = kInf;
      for (int ja = 0; ja < NA; ++ja) {
        if (!ok[static_cast<std::size_t>(ja)]) continue;
        const Cell& c0 = cells[0][static_cast<std::size_t>(i0 * NAb + action_index(ja, 0))];
        if (!c0.valid) continue;
        const Cell* c1 = nullptr;
        if (B == 2) {
          c1 = &cells[1][static_cast<std::size_t>(i1 * NAb + action_index(ja, 1))];
          if (!c1->valid) continue;
        }
        const double v = stage[static_cast<std::size_t>(ja)] + lookup(next_value, G, c0, c1);
        if (v < best) best = v;
      }
      cur[static_cast<std::size_t>(s)] = best;
    }
  }

  // Forward pass from the actual initial SOC, which need not sit on the grid.
  DpResult res;
  res.actions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(B), T);
  res.socs.resize(static_cast<Eigen::Index>(B), T + 1);
  std::array<double, 2> soc{0.0, 0.0};
  for (std::size_t b = 0; b < B; ++b) {
    soc[b] = net.ess[b].soc_init;
    res.socs(static_cast<Eigen::Index>(b), 0) = soc[b];
  }
  res.feasible = true;
  for (int t = 0; t < T; ++t) {
    const double price = day.price[static_cast<std::size_t>(t)];
    double best = kInf;
    int best_ja = -1;
    for (int ja = 0; ja < NA; ++ja) {
      if (!ac_ok[static_cast<std::size_t>(t)][static_cast<std::size_t>(ja)]) continue;
      const Eigen::VectorXd a = joint_action(ja);
      const Cell c0 = transition_cell(net.ess[0], soc_grids[0], soc[0], a(0), dt);
      if (!c0.valid) continue;
      Cell c1;
      if (B == 2) {
        c1 = transition_cell(net.ess[1], soc_grids[1], soc[1], a(1), dt);
        if (!c1.valid) continue;
      }
      const double v = price * a.sum() * dt + lookup(value[static_cast<std::size_t>(t + 1)], G, c0, B == 2 ? &c1 : nullptr);
      if (v < best) {
        best = v;
        best_ja = ja;
      }
    }
    if (best_ja < 0 || !std::isfinite(best)) {
      res.feasible = false;
      break;
    }
    const Eigen::VectorXd a = joint_action(best_ja);
    res.actions.col(t) = a;
    for (std::size_t b = 0; b < B; ++b) {
      const EssSpec& e = net.ess[b];
      soc[b] = std::clamp(soc_after(e, soc[b], a(static_cast<Eigen::Index>(b)), dt), e.soc_min, e.soc_max);
      res.socs(static_cast<Eigen::Index>(b), t + 1) = soc[b];
    }
  }
  res.cost_eur = res.feasible ? schedule_cost(prob, res.actions) : kInf;
  return res;
}

}  // namespace safeess
