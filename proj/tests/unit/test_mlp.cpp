#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "safeess/mlp.hpp"

using namespace safeess;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Loss L = sum(W .* y) so that dL/dy = W.
double probe_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  return net.predict(x).cwiseProduct(w).sum();
}

}  // namespace

TEST(Mlp, ParameterGradientMatchesFiniteDifferences) {
  for (OutputActivation act : {OutputActivation::kLinear, OutputActivation::kTanh}) {
    std::mt19937_64 rng(7);
    Mlp net({5, 8, 6, 3}, act, rng);
    const Eigen::MatrixXd x = random_matrix(5, 4, rng);
    const Eigen::MatrixXd w = random_matrix(3, 4, rng);
    net.forward(x);
    net.backward(w);
    const Eigen::VectorXd g = net.gradient();
    Eigen::VectorXd theta = net.parameters();
    ASSERT_EQ(g.size(), theta.size());
    const double h = 1e-6;
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double keep = theta(i);
      theta(i) = keep + h;
      net.set_parameters(theta);
      const double up = probe_loss(net, x, w);
      theta(i) = keep - h;
      net.set_parameters(theta);
      const double down = probe_loss(net, x, w);
      theta(i) = keep;
      fd(i) = (up - down) / (2.0 * h);
    }
    net.set_parameters(theta);
    const double rel = (g - fd).norm() / std::max(g.norm() + fd.norm(), 1e-12);
    EXPECT_LT(rel, 1e-4);
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  Mlp net({4, 16, 2}, OutputActivation::kTanh, rng);
  Eigen::MatrixXd x = random_matrix(4, 3, rng);
  const Eigen::MatrixXd w = random_matrix(2, 3, rng);
  net.forward(x);
  const Eigen::MatrixXd gx = net.backward(w);
  const double h = 1e-6;
  Eigen::MatrixXd fd(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = probe_loss(net, x, w);
    x.data()[i] = keep - h;
    const double down = probe_loss(net, x, w);
    x.data()[i] = keep;
    fd.data()[i] = (up - down) / (2.0 * h);
  }
  EXPECT_LT((gx - fd).norm() / (gx.norm() + fd.norm()), 1e-4);
}

TEST(Mlp, HandComputedForward) {
  std::mt19937_64 rng(1);
  Mlp net({2, 2, 1}, OutputActivation::kTanh, rng);
  net.weights()[0] << 1.0, -1.0, 0.5, 2.0;
  net.biases()[0] << 0.0, -1.0;
  net.weights()[1] << 1.0, 0.5;
  net.biases()[1] << 0.1;
  Eigen::Vector2d x(1.0, 2.0);
  // hidden: relu(1 - 2) = 0, relu(0.5 + 4 - 1) = 3.5; out: tanh(0 + 1.75 + 0.1)
  EXPECT_NEAR(net.predict(x)(0, 0), std::tanh(1.85), 1e-15);
  EXPECT_EQ(net.forward(x), net.predict(x));
}

TEST(Mlp, AdamDescendsQuadratic) {
  std::mt19937_64 rng(2);
  Mlp net({3, 1}, OutputActivation::kLinear, rng);
  const Eigen::MatrixXd x = random_matrix(3, 32, rng);
  const Eigen::RowVectorXd y = (Eigen::RowVector3d(0.5, -1.0, 2.0) * x).array() + 0.3;
  AdamConfig cfg;
  cfg.lr = 0.05;
  double loss = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const Eigen::MatrixXd diff = net.forward(x) - y;
    loss = diff.squaredNorm() / 32.0;
    net.backward(2.0 * diff / 32.0);
    net.adam_step(cfg);
  }
  EXPECT_LT(loss, 1e-8);
  EXPECT_EQ(net.adam_steps(), 2000);
  EXPECT_NEAR(net.biases()[0](0), 0.3, 1e-4);
}

TEST(Mlp, SoftUpdate) {
  std::mt19937_64 rng(3);
  Mlp a({2, 3, 1}, OutputActivation::kLinear, rng);
  Mlp b({2, 3, 1}, OutputActivation::kLinear, rng);
  const Eigen::VectorXd ta = a.parameters();
  const Eigen::VectorXd tb = b.parameters();
  a.soft_update(b, 0.25);
  EXPECT_LT((a.parameters() - (0.75 * ta + 0.25 * tb)).cwiseAbs().maxCoeff(), 1e-15);
  a.soft_update(b, 1.0);
  EXPECT_EQ(a.parameters(), tb);
}

TEST(Mlp, JsonRoundTripIsExact) {
  std::mt19937_64 rng(4);
  Mlp net({6, 5, 2}, OutputActivation::kTanh, rng);
  const Eigen::MatrixXd x = random_matrix(6, 3, rng);
  net.forward(x);
  net.backward(Eigen::MatrixXd::Ones(2, 3));
  net.adam_step({});
  const Mlp back = Mlp::from_json(nlohmann::json::parse(net.to_json().dump()));
  EXPECT_EQ(back.dims(), net.dims());
  EXPECT_EQ(back.output_activation(), net.output_activation());
  EXPECT_EQ(back.parameters(), net.parameters());
  EXPECT_EQ(back.predict(x), net.predict(x));
}

TEST(Mlp, Errors) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(Mlp({3}, OutputActivation::kLinear, rng), MlpError);
  EXPECT_THROW(Mlp({3, 0, 1}, OutputActivation::kLinear, rng), MlpError);
  Mlp net({3, 4, 1}, OutputActivation::kLinear, rng);
  EXPECT_THROW(net.predict(Eigen::MatrixXd::Zero(2, 1)), MlpError);
  EXPECT_THROW(net.backward(Eigen::MatrixXd::Zero(1, 1)), MlpError);
  net.forward(Eigen::MatrixXd::Zero(3, 2));
  EXPECT_THROW(net.backward(Eigen::MatrixXd::Zero(1, 3)), MlpError);
  nlohmann::json bad = net.to_json();
  bad["layers"][0]["w"]["data"] = std::vector<double>{1.0};
  EXPECT_THROW(Mlp::from_json(bad), std::exception);
}
