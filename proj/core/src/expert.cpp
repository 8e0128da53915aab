#include "safeess/expert.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "safeess/format.hpp"
#include "safeess/powerflow.hpp"
#include "safeess/safety_layer.hpp"

namespace safeess {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDatasetSchema = 1;

Eigen::Index as_index(std::size_t i) { return static_cast<Eigen::Index>(i); }

Injections day_injections(const DispatchProblem& prob, int t, const Eigen::VectorXd& p_b) {
  const Network& net = *prob.net;
  const ScenarioDay& day = *prob.day;
  Injections inj;
  inj.p = (day.p_pv.col(t) - day.p_load.col(t)) / net.base_mva;
  inj.q = -day.q_load.col(t) / net.base_mva;
  for (std::size_t b = 0; b < net.ess.size(); ++b) {
    inj.p(as_index(Network::pos(net.ess[b].bus))) -= p_b(as_index(b)) / net.base_mva;
  }
  return inj;
}

struct QpData {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
  double p_scale = 1.0;
};

// Split-variable LinDistFlow QP. x = [P+ ; P-], each ESS-major (b * T + t),
// in units of p_scale MW.
QpData build_qp(const DispatchProblem& prob, const ExpertOptions& opts, double eps) {
  const Network& net = *prob.net;
  const ScenarioDay& day = *prob.day;
  const auto B = static_cast<Eigen::Index>(net.ess_count());
  const Eigen::Index T = prob.horizon;
  const Eigen::Index n = 2 * B * T;
  const double dt = prob.dt_hours;

  QpData qp;
  double p_scale = 0.0;
  for (const EssSpec& e : net.ess) p_scale = std::max({p_scale, e.p_max, -e.p_min});
  qp.p_scale = p_scale > 0.0 ? p_scale : 1.0;

  double price_max = 0.0;
  for (double p : day.price) price_max = std::max(price_max, std::abs(p));
  const double cost_scale = price_max > 0.0 ? price_max * dt * qp.p_scale : 1.0;

  qp.P = 2.0 * opts.lambda_reg * Eigen::MatrixXd::Identity(n, n);
  qp.q.resize(n);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const double c = day.price[static_cast<std::size_t>(t)] * dt * qp.p_scale / cost_scale;
      qp.q(b * T + t) = c;
      qp.q(B * T + b * T + t) = -c;
    }
  }

  const SafetyParams sp = make_safety_params(net, *prob.sens, eps);
  const auto nb = static_cast<Eigen::Index>(net.load_bus_count());

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> lo;
  std::vector<double> hi;
  auto add_row = [&](Eigen::RowVectorXd row, double l, double u) {
    rows.push_back(std::move(row));
    lo.push_back(l);
    hi.push_back(u);
  };

  // Power boxes.
  for (Eigen::Index b = 0; b < B; ++b) {
    const EssSpec& e = net.ess[static_cast<std::size_t>(b)];
    for (Eigen::Index t = 0; t < T; ++t) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      r(b * T + t) = 1.0;
      add_row(r, 0.0, std::max(0.0, e.p_max) / qp.p_scale);
      r.setZero();
      r(B * T + b * T + t) = 1.0;
      add_row(r, 0.0, std::max(0.0, -e.p_min) / qp.p_scale);
    }
  }

  // SOC after each step, as a running sum of the split powers.
  for (Eigen::Index b = 0; b < B; ++b) {
    const EssSpec& e = net.ess[static_cast<std::size_t>(b)];
    const double k = qp.p_scale * dt / e.e_cap;
    for (Eigen::Index t = 1; t <= T; ++t) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      for (Eigen::Index tau = 0; tau < t; ++tau) {
        r(b * T + tau) = e.eta_c * k;
        r(B * T + b * T + tau) = -k / e.eta_d;
      }
      double lower = e.soc_min - e.soc_init;
      if (t == T && opts.terminal_soc) lower = std::max(lower, 0.0);
      add_row(r, lower, e.soc_max - e.soc_init);
    }
  }

  // Linearized voltage band, dropping sides no action in the box can reach.
  for (Eigen::Index t = 0; t < T; ++t) {
    const Injections inj = day_injections(prob, static_cast<int>(t), Eigen::VectorXd::Zero(B));
    const Eigen::VectorXd base =
        (sp.v0_sq + 2.0 * (sp.sens.r_path * inj.p + sp.sens.x_path * inj.q).array()).matrix();
    for (Eigen::Index k = 0; k < nb; ++k) {
      const double lower = sp.v_min_sq(k) + eps - base(k);
      const double upper = sp.v_max_sq(k) - eps - base(k);
      double reach_lo = 0.0;
      double reach_hi = 0.0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const double g = sp.ess_gain(k, b);
        reach_lo += std::min(g * sp.action_min(b), g * sp.action_max(b));
        reach_hi += std::max(g * sp.action_min(b), g * sp.action_max(b));
      }
      if (reach_lo > upper + 1e-15 || reach_hi < lower - 1e-15) {
        throw ExpertError(ExpertError::Kind::kInfeasible,
                          "day " + day.date + ": bus " + std::to_string(net.external_id(static_cast<int>(k) + 2)) +
                              " cannot meet the voltage band at step " + std::to_string(t));
      }
      const double l = reach_lo >= lower ? -kInf : lower;
      const double u = reach_hi <= upper ? kInf : upper;
      if (!std::isfinite(l) && !std::isfinite(u)) continue;
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      for (Eigen::Index b = 0; b < B; ++b) {
        const double g = sp.ess_gain(k, b) * qp.p_scale;
        r(b * T + t) = g;
        r(B * T + b * T + t) = -g;
      }
      add_row(r, l, u);
    }
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  qp.A.resize(m, n);
  qp.l.resize(m);
  qp.u.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    qp.A.row(i) = rows[static_cast<std::size_t>(i)];
    qp.l(i) = lo[static_cast<std::size_t>(i)];
    qp.u(i) = hi[static_cast<std::size_t>(i)];
  }
  return qp;
}

// Net powers from the split solution with simultaneous charge/discharge removed.
Eigen::MatrixXd net_actions(const DispatchProblem& prob, const Eigen::VectorXd& x, double p_scale) {
  const auto B = static_cast<Eigen::Index>(prob.net->ess_count());
  const Eigen::Index T = prob.horizon;
  Eigen::MatrixXd a(B, T);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < T; ++t) {
      double plus = std::max(0.0, x(b * T + t));
      double minus = std::max(0.0, x(B * T + b * T + t));
      const double overlap = std::min(plus, minus);
      plus -= overlap;
      minus -= overlap;
      double p = (plus - minus) * p_scale;
      if (std::abs(p) < 1e-9) p = 0.0;
      a(b, t) = p;
    }
  }
  return a;
}

}  // namespace

DispatchProblem make_problem(const Network& net, const Sensitivities& sens, const ScenarioDay& day) {
  validate_day(day, net.load_bus_count());
  DispatchProblem prob;
  prob.net = &net;
  prob.sens = &sens;
  prob.day = &day;
  prob.dt_hours = day.dt_hours;
  prob.horizon = day.steps();
  return prob;
}

double schedule_cost(const DispatchProblem& prob, const Eigen::MatrixXd& actions) {
  const ScenarioDay& day = *prob.day;
  double cost = 0.0;
  for (int t = 0; t < prob.horizon; ++t) {
    const double net_mw = day.p_load.col(t).sum() + actions.col(t).sum() - day.p_pv.col(t).sum();
    cost += day.price[static_cast<std::size_t>(t)] * net_mw * prob.dt_hours;
  }
  return cost;
}

Eigen::MatrixXd replay_schedule(const DispatchProblem& prob, const Eigen::MatrixXd& actions, Eigen::MatrixXd& socs) {
  const Network& net = *prob.net;
  const auto B = static_cast<Eigen::Index>(net.ess_count());
  Env env(net, EnvConfig{});
  EnvState state = env.reset(*prob.day);
  Eigen::MatrixXd applied(B, prob.horizon);
  socs.resize(B, prob.horizon + 1);
  socs.col(0) = state.soc;
  for (int t = 0; t < prob.horizon; ++t) {
    const Action a = env.clip_action(state, Action{actions.col(t)});
    applied.col(t) = a.p_b;
    for (Eigen::Index b = 0; b < B; ++b) {
      state.soc(b) = soc_update(net.ess[static_cast<std::size_t>(b)], state.soc(b), a.p_b(b), prob.dt_hours);
    }
    socs.col(t + 1) = state.soc;
  }
  return applied;
}

int count_ac_violations(const DispatchProblem& prob, const Eigen::MatrixXd& actions) {
  int count = 0;
  for (int t = 0; t < prob.horizon; ++t) {
    const PowerFlowSolution sol = solve_ac(*prob.net, day_injections(prob, t, actions.col(t)));
    if (!sol.converged) return std::numeric_limits<int>::max();
    const ViolationReport rep = violations(*prob.net, sol);
    count += static_cast<int>(rep.voltage_count() + rep.current_count());
  }
  return count;
}

ExpertTrajectory solve_day(const DispatchProblem& prob, const ExpertOptions& opts) {
  if (!prob.net || !prob.sens || !prob.day || prob.horizon <= 0) {
    throw ExpertError(ExpertError::Kind::kInfeasible, "solve_day: incomplete problem");
  }
  const Network& net = *prob.net;
  const auto B = static_cast<Eigen::Index>(net.ess_count());

  ExpertTrajectory traj;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(B, prob.horizon);
  traj.zero_action_cost_eur = schedule_cost(prob, zero);
  if (B == 0) {
    traj.actions = zero;
    traj.socs.resize(0, prob.horizon + 1);
    traj.cost_eur = traj.zero_action_cost_eur;
    traj.ac_violations = count_ac_violations(prob, zero);
    traj.ac_feasible = traj.ac_violations == 0;
    return traj;
  }

  double half_band = kInf;
  for (const Bus& bus : net.buses) half_band = std::min(half_band, 0.5 * (bus.v_max_sq - bus.v_min_sq));

  double eps = opts.eps;
  for (int round = 0; round < opts.max_rounds; ++round) {
    if (eps >= half_band) break;
    const QpData qp = build_qp(prob, opts, eps);
    const AdmmResult res = solve_admm_qp(qp.P, qp.q, qp.A, qp.l, qp.u, opts.admm);
    if (res.status == AdmmStatus::kPrimalInfeasible) {
      throw ExpertError(ExpertError::Kind::kInfeasible, "day " + prob.day->date + ": dispatch problem is infeasible");
    }
    if (res.status != AdmmStatus::kSolved) {
      throw ExpertError(ExpertError::Kind::kNonConvergence,
                        "day " + prob.day->date + ": QP did not converge (primal " +
                            std::to_string(res.primal_residual) + ", dual " + std::to_string(res.dual_residual) + ")");
    }
    traj.stats.rounds = round + 1;
    traj.stats.iterations += res.iterations;
    traj.stats.primal_residual = res.primal_residual;
    traj.stats.dual_residual = res.dual_residual;
    traj.stats.polished = res.polished;
    traj.stats.eps_final = eps;

    traj.actions = replay_schedule(prob, net_actions(prob, res.x, qp.p_scale), traj.socs);
    traj.ac_violations = count_ac_violations(prob, traj.actions);
    traj.ac_feasible = traj.ac_violations == 0;
    if (traj.ac_feasible) break;
    eps *= opts.eps_growth;
  }
  if (traj.stats.rounds == 0) {
    throw ExpertError(ExpertError::Kind::kInfeasible, "solve_day: eps leaves no room inside the voltage band");
  }
  traj.cost_eur = schedule_cost(prob, traj.actions);

  // Idle storage is always a candidate; keep it if the schedule is no better.
  if (traj.cost_eur > traj.zero_action_cost_eur || !traj.ac_feasible) {
    const int zero_violations = count_ac_violations(prob, zero);
    if (zero_violations == 0) {
      traj.actions = replay_schedule(prob, zero, traj.socs);
      traj.cost_eur = traj.zero_action_cost_eur;
      traj.ac_violations = 0;
      traj.ac_feasible = true;
      traj.stats.zero_fallback = true;
    }
  }
  return traj;
}

CollectResult collect_dataset(const Network& net, const Sensitivities& sens, const std::vector<const ScenarioDay*>& days,
                              const EnvConfig& env_cfg, const ExpertOptions& opts) {
  CollectResult out;
  out.dataset.network_hash = network_hash(net);
  out.dataset.norm = env_cfg.norm;
  Env env(net, env_cfg);
  for (const ScenarioDay* day : days) {
    ExpertDaySummary s;
    s.date = day->date;
    const DispatchProblem prob = make_problem(net, sens, *day);
    s.zero_action_cost_eur = schedule_cost(prob, Eigen::MatrixXd::Zero(as_index(net.ess_count()), prob.horizon));
    ExpertTrajectory traj;
    try {
      traj = solve_day(prob, opts);
    } catch (const ExpertError& e) {
      s.status = e.kind() == ExpertError::Kind::kNonConvergence ? "not_converged" : "infeasible";
      std::cerr << "warning: skipping " << day->date << ": " << e.what() << "\n";
      out.summary.push_back(s);
      out.trajectories.emplace_back();
      continue;
    }
    s.cost_eur = traj.cost_eur;
    s.ac_feasible = traj.ac_feasible;
    s.rounds = traj.stats.rounds;
    s.iterations = traj.stats.iterations;
    s.eps_final = traj.stats.eps_final;
    if (!traj.ac_feasible) {
      s.status = "ac_infeasible";
      std::cerr << "warning: skipping " << day->date << ": " << traj.ac_violations
                << " AC limit violations after tightening\n";
      out.summary.push_back(s);
      out.trajectories.push_back(std::move(traj));
      continue;
    }
    s.status = "ok";

    EnvState state = env.reset(*day);
    double replay_cost = 0.0;
    for (int t = 0; t < prob.horizon; ++t) {
      const StepResult r = env.step(state, Action{traj.actions.col(t)});
      ExpertPair pair;
      pair.day = day->date;
      pair.t = t;
      pair.obs = env.encode_observation(state);
      pair.action = r.applied.p_b;
      pair.reward = r.reward;
      pair.shaped_reward = r.shaped_reward;
      pair.next_obs = env.encode_observation(r.next_state);
      pair.done = r.done;
      replay_cost += r.cost_eur;
      out.dataset.pairs.push_back(std::move(pair));
      state = r.next_state;
    }
    s.replay_cost_eur = replay_cost;
    out.dataset.days.push_back(day->date);
    out.summary.push_back(s);
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd from_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const ExpertDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ExpertError(ExpertError::Kind::kDataset, "cannot write " + path.string());
  nlohmann::json header = {{"type", "header"},
                           {"schema", kDatasetSchema},
                           {"network_hash", ds.network_hash},
                           {"normalization", ds.norm.to_json()},
                           {"obs_size", ds.obs_size()},
                           {"action_size", ds.action_size()},
                           {"days", ds.days},
                           {"pairs", ds.pairs.size()}};
  os << header.dump() << "\n";
  for (const ExpertPair& p : ds.pairs) {
    nlohmann::json rec = {{"day", p.day},
                          {"t", p.t},
                          {"obs", to_vec(p.obs)},
                          {"action", to_vec(p.action)},
                          {"reward", p.reward},
                          {"shaped_reward", p.shaped_reward},
                          {"next_obs", to_vec(p.next_obs)},
                          {"done", p.done}};
    os << rec.dump() << "\n";
  }
}

ExpertDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ExpertError(ExpertError::Kind::kDataset, "cannot read " + path.string());
  ExpertDataset ds;
  std::string line;
  if (!std::getline(is, line)) throw ExpertError(ExpertError::Kind::kDataset, path.string() + ": empty dataset file");
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header" || header.at("schema").get<int>() != kDatasetSchema) {
      throw ExpertError(ExpertError::Kind::kDataset, path.string() + ": missing or unsupported header");
    }
    ds.network_hash = header.at("network_hash").get<std::string>();
    ds.norm = ObsNormalization::from_json(header.at("normalization"));
    ds.days = header.at("days").get<std::vector<std::string>>();
    const auto obs_size = header.at("obs_size").get<std::size_t>();
    const auto action_size = header.at("action_size").get<std::size_t>();
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      ExpertPair p;
      p.day = rec.at("day").get<std::string>();
      p.t = rec.at("t").get<int>();
      p.obs = from_vec(rec.at("obs"));
      p.action = from_vec(rec.at("action"));
      p.reward = rec.at("reward").get<double>();
      p.shaped_reward = rec.at("shaped_reward").get<double>();
      p.next_obs = from_vec(rec.at("next_obs"));
      p.done = rec.at("done").get<bool>();
      if (static_cast<std::size_t>(p.obs.size()) != obs_size ||
          static_cast<std::size_t>(p.next_obs.size()) != obs_size ||
          static_cast<std::size_t>(p.action.size()) != action_size) {
        throw ExpertError(ExpertError::Kind::kDataset, path.string() + ": record size does not match header");
      }
      ds.pairs.push_back(std::move(p));
    }
    if (ds.pairs.size() != header.at("pairs").get<std::size_t>()) {
      throw ExpertError(ExpertError::Kind::kDataset, path.string() + ": truncated dataset");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ExpertError(ExpertError::Kind::kDataset, path.string() + ": " + e.what());
  }
  return ds;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<ExpertDaySummary>& summary) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ExpertError(ExpertError::Kind::kDataset, "cannot write " + path.string());
  os << "date,status,cost_eur,zero_action_cost_eur,replay_cost_eur,ac_feasible,rounds,iterations,eps_final\n";
  for (const ExpertDaySummary& s : summary) {
    os << s.date << ',' << s.status << ',' << format_double(s.cost_eur) << ',' << format_double(s.zero_action_cost_eur)
       << ',' << format_double(s.replay_cost_eur) << ',' << (s.ac_feasible ? 1 : 0) << ',' << s.rounds << ','
       << s.iterations << ',' << format_double(s.eps_final) << "\n";
  }
}

}  // namespace safeess
