#include "safeess/agents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace safeess {

namespace {

std::vector<int> layer_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd x(s.rows() + a.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(a.rows()) = a;
  return x;
}

AdamConfig adam(const Td3Config& cfg) {
  AdamConfig a;
  a.lr = cfg.lr;
  return a;
}

void check_batch(const Agent& agent, const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.s.rows() != agent.obs_dim || batch.a.rows() != agent.act_dim) {
    throw std::invalid_argument("batch dimensions do not match the agent");
  }
}

double critic_step(Agent& agent, const Batch& batch, const Td3Config& cfg) {
  const Eigen::RowVectorXd y = critic_targets(agent, batch, cfg);
  const auto n = static_cast<double>(batch.size());
  const Eigen::MatrixXd x = stack(batch.s, batch.a);
  double loss = 0.0;
  for (Mlp* q : {&agent.critic1, &agent.critic2}) {
    const Eigen::RowVectorXd diff = q->forward(x).row(0) - y;
    loss += diff.squaredNorm() / n;
    q->backward((2.0 / n) * diff);
    q->adam_step(adam(cfg));
  }
  ++agent.critic_updates;
  return loss;
}

// Gradient of -mean_j min(Q1, Q2)(s_j, a_j) with respect to the actions.
Eigen::MatrixXd td_action_gradient(Agent& agent, const Eigen::MatrixXd& s, const Eigen::MatrixXd& a,
                                   const Td3Config& cfg, double& loss) {
  const auto n = static_cast<double>(s.cols());
  const Eigen::MatrixXd x = stack(s, a);
  const Eigen::RowVectorXd q1 = agent.critic1.forward(x).row(0);
  const Eigen::RowVectorXd q2 = agent.critic2.forward(x).row(0);
  const Eigen::RowVectorXd q = q1.cwiseMin(q2);
  loss = -q.mean();
  double scale = 1.0 / n;
  if (cfg.normalize_q) scale /= std::max(q.cwiseAbs().mean(), 1e-8);
  Eigen::RowVectorXd g1 = Eigen::RowVectorXd::Zero(q.size());
  Eigen::RowVectorXd g2 = Eigen::RowVectorXd::Zero(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q1(j) <= q2(j)) g1(j) = -scale;
    else g2(j) = -scale;
  }
  // Critic parameter gradients from these passes are discarded: the next
  // critic step recomputes them from its own forward pass.
  const Eigen::MatrixXd dx = agent.critic1.backward(g1) + agent.critic2.backward(g2);
  return dx.bottomRows(agent.act_dim);
}

void soft_update_targets(Agent& agent, const Td3Config& cfg) {
  agent.actor_target.soft_update(agent.actor, cfg.tau);
  agent.critic1_target.soft_update(agent.critic1, cfg.tau);
  agent.critic2_target.soft_update(agent.critic2, cfg.tau);
}

}  // namespace

void Td3Config::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (batch_size == 0 || buffer_capacity == 0) throw std::invalid_argument("batch and buffer sizes must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (policy_delay < 1) throw std::invalid_argument("policy_delay must be at least 1");
  if (lambda_td < 0.0 || lambda_bc < 0.0) throw std::invalid_argument("lambda weights must be non-negative");
  if (target_noise_std < 0.0 || target_noise_clip < 0.0 || exploration_noise < 0.0) {
    throw std::invalid_argument("noise settings must be non-negative");
  }
}

nlohmann::json Td3Config::to_json() const {
  return {{"gamma", gamma},
          {"lr", lr},
          {"batch_size", batch_size},
          {"buffer_capacity", buffer_capacity},
          {"tau", tau},
          {"policy_delay", policy_delay},
          {"target_noise_std", target_noise_std},
          {"target_noise_clip", target_noise_clip},
          {"exploration_noise", exploration_noise},
          {"lambda_td", lambda_td},
          {"lambda_bc", lambda_bc},
          {"normalize_q", normalize_q},
          {"hidden", hidden}};
}

Td3Config Td3Config::from_json(const nlohmann::json& doc) {
  Td3Config c;
  c.gamma = doc.value("gamma", c.gamma);
  c.lr = doc.value("lr", c.lr);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.buffer_capacity = doc.value("buffer_capacity", c.buffer_capacity);
  c.tau = doc.value("tau", c.tau);
  c.policy_delay = doc.value("policy_delay", c.policy_delay);
  c.target_noise_std = doc.value("target_noise_std", c.target_noise_std);
  c.target_noise_clip = doc.value("target_noise_clip", c.target_noise_clip);
  c.exploration_noise = doc.value("exploration_noise", c.exploration_noise);
  c.lambda_td = doc.value("lambda_td", c.lambda_td);
  c.lambda_bc = doc.value("lambda_bc", c.lambda_bc);
  c.normalize_q = doc.value("normalize_q", c.normalize_q);
  c.hidden = doc.value("hidden", c.hidden);
  c.validate();
  return c;
}

Eigen::VectorXd Agent::act_normalized(const Eigen::VectorXd& obs) const { return actor.predict(obs).col(0); }

Eigen::VectorXd Agent::act(const Eigen::VectorXd& obs) const { return to_mw(act_normalized(obs)); }

Eigen::VectorXd Agent::to_normalized(const Eigen::VectorXd& p_mw) const {
  return ((p_mw - action_center).array() / action_halfwidth.array()).cwiseMax(-1.0).cwiseMin(1.0).matrix();
}

Eigen::VectorXd Agent::to_mw(const Eigen::VectorXd& u) const {
  return action_center + action_halfwidth.cwiseProduct(u);
}

Agent make_agent(int obs_dim, const Eigen::VectorXd& action_min, const Eigen::VectorXd& action_max,
                 const Td3Config& cfg, std::uint64_t seed) {
  cfg.validate();
  if (obs_dim <= 0 || action_min.size() == 0 || action_min.size() != action_max.size()) {
    throw std::invalid_argument("make_agent: bad dimensions");
  }
  if ((action_max.array() <= action_min.array()).any()) throw std::invalid_argument("make_agent: empty action box");
  Agent a;
  a.obs_dim = obs_dim;
  a.act_dim = static_cast<int>(action_min.size());
  a.action_center = 0.5 * (action_max + action_min);
  a.action_halfwidth = 0.5 * (action_max - action_min);
  a.rng.seed(seed);
  a.actor = Mlp(layer_dims(obs_dim, cfg.hidden, a.act_dim), OutputActivation::kTanh, a.rng);
  a.critic1 = Mlp(layer_dims(obs_dim + a.act_dim, cfg.hidden, 1), OutputActivation::kLinear, a.rng);
  a.critic2 = Mlp(layer_dims(obs_dim + a.act_dim, cfg.hidden, 1), OutputActivation::kLinear, a.rng);
  a.actor_target = a.actor;
  a.critic1_target = a.critic1;
  a.critic2_target = a.critic2;
  return a;
}

Agent make_agent(int obs_dim, const Network& net, const Td3Config& cfg, std::uint64_t seed) {
  const auto ne = static_cast<Eigen::Index>(net.ess_count());
  Eigen::VectorXd lo(ne);
  Eigen::VectorXd hi(ne);
  for (Eigen::Index b = 0; b < ne; ++b) {
    lo(b) = net.ess[static_cast<std::size_t>(b)].p_min;
    hi(b) = net.ess[static_cast<std::size_t>(b)].p_max;
  }
  return make_agent(obs_dim, lo, hi, cfg, seed);
}

Eigen::RowVectorXd critic_targets(Agent& agent, const Batch& batch, const Td3Config& cfg) {
  Eigen::MatrixXd a_next = agent.actor_target.predict(batch.s_next);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index j = 0; j < a_next.cols(); ++j) {
    for (Eigen::Index i = 0; i < a_next.rows(); ++i) {
      const double e = std::clamp(cfg.target_noise_std * noise(agent.rng), -cfg.target_noise_clip, cfg.target_noise_clip);
      a_next(i, j) = std::clamp(a_next(i, j) + e, -1.0, 1.0);
    }
  }
  const Eigen::MatrixXd x = stack(batch.s_next, a_next);
  const Eigen::RowVectorXd q1 = agent.critic1_target.predict(x).row(0);
  const Eigen::RowVectorXd q2 = agent.critic2_target.predict(x).row(0);
  const Eigen::RowVectorXd not_done = (1.0 - batch.done.array()).matrix();
  return batch.r + cfg.gamma * not_done.cwiseProduct(q1.cwiseMin(q2));
}

UpdateInfo td3_update(Agent& agent, const Batch& batch, const Td3Config& cfg) {
  check_batch(agent, batch);
  UpdateInfo info;
  info.critic_loss = critic_step(agent, batch, cfg);
  if (agent.critic_updates % cfg.policy_delay == 0) {
    const Eigen::MatrixXd a = agent.actor.forward(batch.s);
    const Eigen::MatrixXd g = td_action_gradient(agent, batch.s, a, cfg, info.actor_loss);
    agent.actor.backward(g);
    agent.actor.adam_step(adam(cfg));
    ++agent.actor_updates;
    soft_update_targets(agent, cfg);
    info.actor_updated = true;
  }
  return info;
}

double bc_update(Agent& agent, const Batch& batch, const Td3Config& cfg) {
  check_batch(agent, batch);
  const auto n = static_cast<double>(batch.size());
  const Eigen::MatrixXd diff = agent.actor.forward(batch.s) - batch.a;
  const double loss = diff.squaredNorm() / n;
  agent.actor.backward((2.0 / n) * diff);
  agent.actor.adam_step(adam(cfg));
  ++agent.actor_updates;
  return loss;
}

UpdateInfo td3bc_update(Agent& agent, const Batch& batch, const Td3Config& cfg) {
  check_batch(agent, batch);
  UpdateInfo info;
  info.critic_loss = critic_step(agent, batch, cfg);
  if (agent.critic_updates % cfg.policy_delay == 0) {
    const auto n = static_cast<double>(batch.size());
    const Eigen::MatrixXd a = agent.actor.forward(batch.s);
    const Eigen::MatrixXd g_td = td_action_gradient(agent, batch.s, a, cfg, info.actor_loss);
    const Eigen::MatrixXd diff = a - batch.a;
    info.bc_loss = diff.squaredNorm() / n;
    const Eigen::MatrixXd g_bc = (2.0 / n) * diff;
    agent.actor.backward(cfg.lambda_td * g_td + cfg.lambda_bc * g_bc);
    agent.actor.adam_step(adam(cfg));
    ++agent.actor_updates;
    soft_update_targets(agent, cfg);
    info.actor_updated = true;
  }
  return info;
}

UpdateInfo td3_update(Agent& agent, const ReplayBuffer& buffer, const Td3Config& cfg) {
  if (buffer.size() < cfg.batch_size) throw std::logic_error("td3_update: buffer smaller than one batch");
  return td3_update(agent, buffer.sample(cfg.batch_size, agent.rng), cfg);
}

double bc_update(Agent& agent, const ReplayBuffer& dataset, const Td3Config& cfg) {
  if (dataset.empty()) throw std::logic_error("bc_update: empty dataset");
  return bc_update(agent, dataset.sample(cfg.batch_size, agent.rng), cfg);
}

UpdateInfo td3bc_update(Agent& agent, const ReplayBuffer& dataset, const Td3Config& cfg) {
  if (dataset.empty()) throw std::logic_error("td3bc_update: empty dataset");
  return td3bc_update(agent, dataset.sample(cfg.batch_size, agent.rng), cfg);
}

namespace {

std::vector<double> vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd unvec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json agent_to_json(const Agent& agent) {
  std::ostringstream rng_state;
  rng_state << agent.rng;
  return {{"obs_dim", agent.obs_dim},
          {"act_dim", agent.act_dim},
          {"action_center", vec(agent.action_center)},
          {"action_halfwidth", vec(agent.action_halfwidth)},
          {"critic_updates", agent.critic_updates},
          {"actor_updates", agent.actor_updates},
          {"rng", rng_state.str()},
          {"actor", agent.actor.to_json()},
          {"actor_target", agent.actor_target.to_json()},
          {"critic1", agent.critic1.to_json()},
          {"critic2", agent.critic2.to_json()},
          {"critic1_target", agent.critic1_target.to_json()},
          {"critic2_target", agent.critic2_target.to_json()}};
}

Agent agent_from_json(const nlohmann::json& doc) {
  Agent a;
  a.obs_dim = doc.at("obs_dim").get<int>();
  a.act_dim = doc.at("act_dim").get<int>();
  a.action_center = unvec(doc.at("action_center"));
  a.action_halfwidth = unvec(doc.at("action_halfwidth"));
  a.critic_updates = doc.at("critic_updates").get<long>();
  a.actor_updates = doc.at("actor_updates").get<long>();
  std::istringstream rng_state(doc.at("rng").get<std::string>());
  rng_state >> a.rng;
  a.actor = Mlp::from_json(doc.at("actor"));
  a.actor_target = Mlp::from_json(doc.at("actor_target"));
  a.critic1 = Mlp::from_json(doc.at("critic1"));
  a.critic2 = Mlp::from_json(doc.at("critic2"));
  a.critic1_target = Mlp::from_json(doc.at("critic1_target"));
  a.critic2_target = Mlp::from_json(doc.at("critic2_target"));
  if (a.actor.input_size() != a.obs_dim || a.actor.output_size() != a.act_dim ||
      a.critic1.input_size() != a.obs_dim + a.act_dim) {
    throw MlpError("checkpoint network shapes do not match the recorded dimensions");
  }
  return a;
}

}  // namespace safeess
