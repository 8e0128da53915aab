#include "safeess/mlp.hpp"

#include <cmath>

namespace safeess {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::MatrixXd>(data.data(), m.rows(), m.cols()) = m;
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw MlpError("matrix size mismatch in checkpoint");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, OutputActivation out, std::mt19937_64& rng) : dims_(std::move(dims)), out_(out) {
  if (dims_.size() < 2) throw MlpError("an MLP needs at least an input and an output size");
  for (int d : dims_) {
    if (d <= 0) throw MlpError("layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int fan_in = dims_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(dims_[l + 1], fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
    Eigen::VectorXd b(dims_[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = dist(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
  reset_state();
}

void Mlp::reset_state() {
  grad_w_.clear();
  grad_b_.clear();
  m_w_.clear();
  v_w_.clear();
  m_b_.clear();
  v_b_.clear();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    grad_w_.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    grad_b_.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    m_w_.push_back(grad_w_.back());
    v_w_.push_back(grad_w_.back());
    m_b_.push_back(grad_b_.back());
    v_b_.push_back(grad_b_.back());
  }
  adam_t_ = 0;
  cached_ = false;
}

void Mlp::check_input(const Eigen::MatrixXd& x) const {
  if (weights_.empty()) throw MlpError("MLP has no layers");
  if (x.rows() != dims_.front()) {
    throw MlpError("input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(dims_.front()));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) {
  check_input(x);
  inputs_.assign(weights_.size(), {});
  pre_.assign(weights_.size(), {});
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    inputs_[l] = h;
    pre_[l] = (weights_[l] * h).colwise() + biases_[l];
    if (l + 1 < weights_.size()) {
      h = pre_[l].cwiseMax(0.0);
    } else {
      h = out_ == OutputActivation::kTanh ? Eigen::MatrixXd(pre_[l].array().tanh()) : pre_[l];
    }
  }
  output_ = h;
  cached_ = true;
  return h;
}

Eigen::MatrixXd Mlp::predict(const Eigen::MatrixXd& x) const {
  check_input(x);
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * h).colwise() + biases_[l];
    if (l + 1 < weights_.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = out_ == OutputActivation::kTanh ? Eigen::MatrixXd(z.array().tanh()) : z;
    }
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Eigen::MatrixXd& grad_out) {
  if (!cached_) throw MlpError("backward() without a cached forward pass");
  if (grad_out.rows() != output_.rows() || grad_out.cols() != output_.cols()) {
    throw MlpError("upstream gradient shape does not match the last forward output");
  }
  Eigen::MatrixXd dz = grad_out;
  if (out_ == OutputActivation::kTanh) dz.array() *= 1.0 - output_.array().square();
  for (std::size_t l = weights_.size(); l-- > 0;) {
    grad_w_[l] = dz * inputs_[l].transpose();
    grad_b_[l] = dz.rowwise().sum();
    Eigen::MatrixXd dh = weights_[l].transpose() * dz;
    if (l == 0) return dh;
    dz = (pre_[l - 1].array() > 0.0).select(dh, 0.0);
  }
  return {};
}

void Mlp::adam_step(const AdamConfig& cfg) {
  ++adam_t_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    m_w_[l] = cfg.beta1 * m_w_[l] + (1.0 - cfg.beta1) * grad_w_[l];
    v_w_[l] = cfg.beta2 * v_w_[l] + (1.0 - cfg.beta2) * grad_w_[l].cwiseAbs2();
    weights_[l].array() -= cfg.lr * (m_w_[l].array() / c1) / ((v_w_[l].array() / c2).sqrt() + cfg.eps);
    m_b_[l] = cfg.beta1 * m_b_[l] + (1.0 - cfg.beta1) * grad_b_[l];
    v_b_[l] = cfg.beta2 * v_b_[l] + (1.0 - cfg.beta2) * grad_b_[l].cwiseAbs2();
    biases_[l].array() -= cfg.lr * (m_b_[l].array() / c1) / ((v_b_[l].array() / c2).sqrt() + cfg.eps);
  }
}

void Mlp::soft_update(const Mlp& src, double tau) {
  if (src.dims_ != dims_) throw MlpError("soft_update between differently shaped networks");
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] = (1.0 - tau) * weights_[l] + tau * src.weights_[l];
    biases_[l] = (1.0 - tau) * biases_[l] + tau * src.biases_[l];
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.segment(k, weights_[l].size()) = weights_[l].reshaped();
    k += weights_[l].size();
    theta.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return theta;
}

void Mlp::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != static_cast<Eigen::Index>(parameter_count())) throw MlpError("parameter vector has wrong size");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = theta.segment(k, weights_[l].size());
    k += weights_[l].size();
    biases_[l] = theta.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
  cached_ = false;
}

Eigen::VectorXd Mlp::gradient() const {
  Eigen::VectorXd g(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.segment(k, grad_w_[l].size()) = grad_w_[l].reshaped();
    k += grad_w_[l].size();
    g.segment(k, grad_b_[l].size()) = grad_b_[l];
    k += grad_b_[l].size();
  }
  return g;
}

bool Mlp::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    layers.push_back({{"w", matrix_to_json(weights_[l])},
                      {"b", matrix_to_json(biases_[l])},
                      {"m_w", matrix_to_json(m_w_[l])},
                      {"v_w", matrix_to_json(v_w_[l])},
                      {"m_b", matrix_to_json(m_b_[l])},
                      {"v_b", matrix_to_json(v_b_[l])}});
  }
  return {{"dims", dims_},
          {"output", out_ == OutputActivation::kTanh ? "tanh" : "linear"},
          {"adam_steps", adam_t_},
          {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& doc) {
  Mlp net;
  net.dims_ = doc.at("dims").get<std::vector<int>>();
  const auto out = doc.at("output").get<std::string>();
  if (out != "tanh" && out != "linear") throw MlpError("unknown output activation '" + out + "'");
  net.out_ = out == "tanh" ? OutputActivation::kTanh : OutputActivation::kLinear;
  const auto& layers = doc.at("layers");
  if (layers.size() + 1 != net.dims_.size()) throw MlpError("layer count does not match dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    net.weights_.push_back(matrix_from_json(layers[l].at("w")));
    net.biases_.push_back(matrix_from_json(layers[l].at("b")));
    if (net.weights_[l].rows() != net.dims_[l + 1] || net.weights_[l].cols() != net.dims_[l] ||
        net.biases_[l].size() != net.dims_[l + 1]) {
      throw MlpError("layer shape does not match dims");
    }
  }
  net.reset_state();
  net.adam_t_ = doc.at("adam_steps").get<long>();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    net.m_w_[l] = matrix_from_json(layers[l].at("m_w"));
    net.v_w_[l] = matrix_from_json(layers[l].at("v_w"));
    net.m_b_[l] = matrix_from_json(layers[l].at("m_b"));
    net.v_b_[l] = matrix_from_json(layers[l].at("v_b"));
  }
  return net;
}

}  // namespace safeess
