#include "safeess/replay_buffer.hpp"

#include <stdexcept>

namespace safeess {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index");
  return items_[(head_ + i) % items_.size()];
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& slots) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  const Transition& first = items_.front();
  const auto n = static_cast<Eigen::Index>(slots.size());
  Batch b;
  b.s.resize(first.s.size(), n);
  b.a.resize(first.a.size(), n);
  b.r.resize(n);
  b.s_next.resize(first.s_next.size(), n);
  b.done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = items_.at(slots[static_cast<std::size_t>(j)]);
    b.s.col(j) = t.s;
    b.a.col(j) = t.a;
    b.r(j) = t.r;
    b.s_next.col(j) = t.s_next;
    b.done(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng, std::vector<std::size_t>* slots) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> drawn(batch_size);
  for (auto& s : drawn) s = pick(rng);
  Batch b = gather(drawn);
  if (slots) *slots = std::move(drawn);
  return b;
}

}  // namespace safeess
