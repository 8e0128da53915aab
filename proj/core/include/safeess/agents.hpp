#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "safeess/mlp.hpp"
#include "safeess/network.hpp"
#include "safeess/replay_buffer.hpp"

namespace safeess {

struct Td3Config {
  double gamma = 0.995;
  double lr = 6e-4;
  std::size_t batch_size = 512;
  std::size_t buffer_capacity = 400000;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise_std = 0.2;  // in normalized action units
  double target_noise_clip = 0.5;
  double exploration_noise = 0.1;
  double lambda_td = 0.5;
  double lambda_bc = 0.5;
  // Divide the TD actor term by the batch-mean |Q| (off: raw weighting).
  bool normalize_q = false;
  std::vector<int> hidden{256, 256};

  void validate() const;
  nlohmann::json to_json() const;
  static Td3Config from_json(const nlohmann::json& doc);
};

// Actor, twin critics and their target copies. The actor works in
// normalized action units u in (-1, 1); act() maps to MW.
struct Agent {
  int obs_dim = 0;
  int act_dim = 0;
  Eigen::VectorXd action_center;     // MW
  Eigen::VectorXd action_halfwidth;  // MW
  Mlp actor, actor_target;
  Mlp critic1, critic2, critic1_target, critic2_target;
  long critic_updates = 0;
  long actor_updates = 0;
  std::mt19937_64 rng;

  Eigen::VectorXd act_normalized(const Eigen::VectorXd& obs) const;
  Eigen::VectorXd act(const Eigen::VectorXd& obs) const;
  Eigen::VectorXd to_normalized(const Eigen::VectorXd& p_mw) const;
  Eigen::VectorXd to_mw(const Eigen::VectorXd& u) const;
};

Agent make_agent(int obs_dim, const Eigen::VectorXd& action_min, const Eigen::VectorXd& action_max,
                 const Td3Config& cfg, std::uint64_t seed);
Agent make_agent(int obs_dim, const Network& net, const Td3Config& cfg, std::uint64_t seed);

struct UpdateInfo {
  double critic_loss = 0.0;
  double actor_loss = 0.0;  // TD actor term, -mean min Q
  double bc_loss = 0.0;
  bool actor_updated = false;
};

/// Bootstrapped target r + gamma (1 - done) min(Q1', Q2') with target-policy
/// smoothing noise drawn from agent.rng.
Eigen::RowVectorXd critic_targets(Agent& agent, const Batch& batch, const Td3Config& cfg);

UpdateInfo td3_update(Agent& agent, const Batch& batch, const Td3Config& cfg);
UpdateInfo td3_update(Agent& agent, const ReplayBuffer& buffer, const Td3Config& cfg);

/// One actor step on mean squared error to the batch actions.
double bc_update(Agent& agent, const Batch& batch, const Td3Config& cfg);
double bc_update(Agent& agent, const ReplayBuffer& dataset, const Td3Config& cfg);

/// Critic step as td3_update; actor gradient lambda_td * grad(TD term) +
/// lambda_bc * grad(BC term), with the batch actions as expert actions.
UpdateInfo td3bc_update(Agent& agent, const Batch& batch, const Td3Config& cfg);
UpdateInfo td3bc_update(Agent& agent, const ReplayBuffer& dataset, const Td3Config& cfg);

nlohmann::json agent_to_json(const Agent& agent);
Agent agent_from_json(const nlohmann::json& doc);

}  // namespace safeess
