#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace safeess {

enum class OutputActivation { kLinear, kTanh };

struct AdamConfig {
  double lr = 6e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class MlpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fully connected network with ReLU hidden layers. Batches are column-major:
// each column of the input matrix is one sample.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, OutputActivation out, std::mt19937_64& rng);

  const std::vector<int>& dims() const { return dims_; }
  int input_size() const { return dims_.front(); }
  int output_size() const { return dims_.back(); }
  OutputActivation output_activation() const { return out_; }
  std::size_t layer_count() const { return weights_.size(); }

  /// Forward pass that caches activations for backward().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  /// Forward pass without touching the cache.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;

  /// Reverse pass for upstream gradient dL/dy (same shape as the last
  /// forward output). Overwrites the parameter gradients and returns dL/dx.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out);

  void adam_step(const AdamConfig& cfg);
  /// this = (1 - tau) this + tau src, parameters only.
  void soft_update(const Mlp& src, double tau);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  const std::vector<Eigen::MatrixXd>& weight_grads() const { return grad_w_; }
  const std::vector<Eigen::VectorXd>& bias_grads() const { return grad_b_; }

  std::size_t parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  Eigen::VectorXd gradient() const;
  long adam_steps() const { return adam_t_; }
  bool all_finite() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& doc);

 private:
  void check_input(const Eigen::MatrixXd& x) const;
  void reset_state();

  std::vector<int> dims_;
  OutputActivation out_ = OutputActivation::kLinear;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  std::vector<Eigen::MatrixXd> grad_w_;
  std::vector<Eigen::VectorXd> grad_b_;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  long adam_t_ = 0;
  // Cached layer inputs and pre-activations from the last forward().
  std::vector<Eigen::MatrixXd> inputs_;
  std::vector<Eigen::MatrixXd> pre_;
  Eigen::MatrixXd output_;
  bool cached_ = false;
};

}  // namespace safeess
