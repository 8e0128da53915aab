#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace safeess {

// Actions are stored normalized to [-1, 1] per ESS.
struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;
};

// Column-major minibatch: one sample per column.
struct Batch {
  Eigen::MatrixXd s;
  Eigen::MatrixXd a;
  Eigen::RowVectorXd r;
  Eigen::MatrixXd s_next;
  Eigen::RowVectorXd done;

  Eigen::Index size() const { return s.cols(); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  /// Oldest-first access.
  const Transition& at(std::size_t i) const;

  /// Uniform sampling with replacement; also returns the storage slots drawn.
  Batch sample(std::size_t batch_size, std::mt19937_64& rng, std::vector<std::size_t>* slots = nullptr) const;

  Batch gather(const std::vector<std::size_t>& slots) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // next slot to overwrite once full
};

}  // namespace safeess
