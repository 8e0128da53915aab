#include "safeess/env.hpp"

#include <algorithm>
#include <cmath>

namespace safeess {

nlohmann::json ObsNormalization::to_json() const {
  return {{"p_scale_pu", p_scale_pu}, {"price_scale", price_scale}, {"v_center", v_center}, {"v_halfwidth", v_halfwidth}};
}

ObsNormalization ObsNormalization::from_json(const nlohmann::json& doc) {
  ObsNormalization n;
  n.p_scale_pu = doc.at("p_scale_pu").get<double>();
  n.price_scale = doc.at("price_scale").get<double>();
  n.v_center = doc.at("v_center").get<double>();
  n.v_halfwidth = doc.at("v_halfwidth").get<double>();
  return n;
}

double soc_update(const EssSpec& ess, double soc, double p_b, double dt_hours) {
  double next = soc;
  if (p_b > 0.0) {
    next = soc + ess.eta_c * p_b * dt_hours / ess.e_cap;
  } else if (p_b < 0.0) {
    next = soc + p_b * dt_hours / (ess.eta_d * ess.e_cap);
  }
  return std::clamp(next, ess.soc_min, ess.soc_max);
}

double voltage_penalty_term(const Bus& bus, double v, double v_nominal) {
  return std::min(0.0, 0.5 * (bus.v_max - bus.v_min) - std::abs(v_nominal - v));
}

ObsNormalization fit_normalization(const Network& net, const std::vector<const ScenarioDay*>& days) {
  ObsNormalization norm;
  double p_max = 0.0;
  double price_max = 0.0;
  for (const ScenarioDay* day : days) {
    p_max = std::max(p_max, ((day->p_load - day->p_pv) / net.base_mva).cwiseAbs().maxCoeff());
    for (double p : day->price) price_max = std::max(price_max, std::abs(p));
  }
  norm.p_scale_pu = p_max > 1e-9 ? p_max : 1.0;
  norm.price_scale = price_max > 1e-9 ? price_max : 1.0;
  return norm;
}

Env::Env(Network net, EnvConfig cfg) : net_(std::move(net)), cfg_(cfg) {}

Injections Env::injections(int t, const Eigen::VectorXd& p_b) const {
  const ScenarioDay& day = *day_;
  Injections inj;
  inj.p = (day.p_pv.col(t) - day.p_load.col(t)) / net_.base_mva;
  inj.q = -day.q_load.col(t) / net_.base_mva;
  for (std::size_t b = 0; b < net_.ess.size(); ++b) {
    inj.p(static_cast<Eigen::Index>(Network::pos(net_.ess[b].bus))) -= p_b(static_cast<Eigen::Index>(b)) / net_.base_mva;
  }
  return inj;
}

double Env::step_cost(int t, const Eigen::VectorXd& p_b) const {
  const ScenarioDay& day = *day_;
  const double net_mw = day.p_load.col(t).sum() + p_b.sum() - day.p_pv.col(t).sum();
  return day.price[static_cast<std::size_t>(t)] * net_mw * day.dt_hours;
}

EnvState Env::make_state(int t, const Eigen::VectorXd& soc) const {
  const ScenarioDay& day = *day_;
  EnvState s;
  s.t = t;
  s.horizon = day.steps();
  s.soc = soc;
  const int col = std::min(t, s.horizon - 1);
  s.p_net = (day.p_load.col(col) - day.p_pv.col(col)) / net_.base_mva;
  s.q_net = day.q_load.col(col) / net_.base_mva;
  s.price = day.price[static_cast<std::size_t>(col)];
  auto sol = solve_ac(net_, injections(col, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net_.ess_count()))));
  if (!sol.converged) throw EnvError("AC power flow did not converge at step " + std::to_string(col));
  s.v_sq = std::move(sol.v_sq);
  return s;
}

EnvState Env::reset(const ScenarioDay& day) {
  validate_day(day, net_.load_bus_count());
  day_ = &day;
  Eigen::VectorXd soc(static_cast<Eigen::Index>(net_.ess_count()));
  for (std::size_t b = 0; b < net_.ess.size(); ++b) soc(static_cast<Eigen::Index>(b)) = net_.ess[b].soc_init;
  return make_state(0, soc);
}

void Env::action_bounds(const EnvState& state, Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
  const double dt = day_ ? day_->dt_hours : 1.0;
  const auto ne = static_cast<Eigen::Index>(net_.ess_count());
  lo.resize(ne);
  hi.resize(ne);
  for (std::size_t b = 0; b < net_.ess.size(); ++b) {
    const EssSpec& e = net_.ess[b];
    const auto i = static_cast<Eigen::Index>(b);
    const double soc = state.soc(i);
    const double charge_cap = (e.soc_max - soc) * e.e_cap / (e.eta_c * dt);
    const double discharge_cap = -(soc - e.soc_min) * e.e_cap * e.eta_d / dt;
    lo(i) = std::clamp(std::min(0.0, discharge_cap), e.p_min, e.p_max);
    hi(i) = std::clamp(std::max(0.0, charge_cap), e.p_min, e.p_max);
  }
}

Action Env::clip_action(const EnvState& state, const Action& a) const {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  action_bounds(state, lo, hi);
  Action out{a.p_b};
  for (Eigen::Index i = 0; i < out.p_b.size(); ++i) {
    const double p = std::isfinite(out.p_b(i)) ? out.p_b(i) : 0.0;
    out.p_b(i) = std::clamp(p, lo(i), hi(i));
  }
  return out;
}

StepResult Env::step(const EnvState& state, const Action& a) const {
  if (!day_) throw EnvError("step before reset");
  if (state.t >= state.horizon) throw EnvError("step past the end of the episode");
  if (a.p_b.size() != static_cast<Eigen::Index>(net_.ess_count())) throw EnvError("action has wrong dimension");

  const ScenarioDay& day = *day_;
  const int t = state.t;
  StepResult r;
  r.applied = clip_action(state, a);

  Eigen::VectorXd soc = state.soc;
  for (std::size_t b = 0; b < net_.ess.size(); ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    soc(i) = soc_update(net_.ess[b], state.soc(i), r.applied.p_b(i), day.dt_hours);
  }

  r.flow = solve_ac(net_, injections(t, r.applied.p_b));
  if (!r.flow.converged) throw EnvError("AC power flow did not converge at step " + std::to_string(t));
  r.report = violations(net_, r.flow);
  r.violation_count = static_cast<int>(r.report.voltage_count());

  r.cost_eur = step_cost(t, r.applied.p_b);
  r.reward = -r.cost_eur;
  double c_sum = 0.0;
  for (const Bus& bus : net_.buses) {
    if (cfg_.penalty_buses == PenaltyBuses::kEss && !bus.has_ess) continue;
    c_sum += std::abs(voltage_penalty_term(bus, std::sqrt(r.flow.v_sq(bus.id - 1)), cfg_.v_nominal));
  }
  r.penalty = cfg_.sigma * c_sum;
  r.shaped_reward = r.reward - r.penalty;

  r.done = t + 1 >= state.horizon;
  if (r.done) {
    r.next_state = state;
    r.next_state.t = t + 1;
    r.next_state.soc = soc;
    r.next_state.v_sq = r.flow.v_sq;
  } else {
    r.next_state = make_state(t + 1, soc);
  }
  return r;
}

std::size_t Env::observation_size() const { return 2 * net_.load_bus_count() + net_.ess_count() + 2; }

Eigen::VectorXd Env::encode_observation(const EnvState& s) const {
  // [p_net | v | price | soc | t/T]
  const auto nb = static_cast<Eigen::Index>(net_.load_bus_count());
  const auto ne = static_cast<Eigen::Index>(net_.ess_count());
  const ObsNormalization& n = cfg_.norm;
  Eigen::VectorXd obs(static_cast<Eigen::Index>(observation_size()));
  obs.segment(0, nb) = s.p_net / n.p_scale_pu;
  obs.segment(nb, nb) = (s.v_sq.tail(nb).array().sqrt() - n.v_center) / n.v_halfwidth;
  obs(2 * nb) = s.price / n.price_scale;
  obs.segment(2 * nb + 1, ne) = s.soc;
  obs(2 * nb + 1 + ne) = s.horizon > 0 ? static_cast<double>(s.t) / s.horizon : 0.0;
  return obs;
}

int Env::decode_time(const Eigen::VectorXd& obs, int horizon) const {
  return static_cast<int>(std::lround(obs(static_cast<Eigen::Index>(time_slot())) * horizon));
}

nlohmann::json trace_record(const Network& net, const EnvState& state, const Action& raw, const StepResult& result) {
  std::vector<double> v(static_cast<std::size_t>(state.v_sq.size()));
  for (Eigen::Index i = 0; i < state.v_sq.size(); ++i) v[static_cast<std::size_t>(i)] = std::sqrt(state.v_sq(i));
  std::vector<double> v_after(static_cast<std::size_t>(result.flow.v_sq.size()));
  for (Eigen::Index i = 0; i < result.flow.v_sq.size(); ++i) {
    v_after[static_cast<std::size_t>(i)] = std::sqrt(result.flow.v_sq(i));
  }
  auto vec = [](const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  return {{"t", state.t},
          {"price", state.price},
          {"soc", vec(state.soc)},
          {"v", v},
          {"raw_action_mw", vec(raw.p_b)},
          {"clipped_action_mw", vec(result.applied.p_b)},
          {"v_after", v_after},
          {"reward", result.reward},
          {"penalty", result.penalty},
          {"shaped_reward", result.shaped_reward},
          {"cost_eur", result.cost_eur},
          {"violations", to_json(net, result.report)}};
}

}  // namespace safeess
