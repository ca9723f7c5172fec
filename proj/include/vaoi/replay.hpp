#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vaoi/error.hpp"

namespace vaoi {

struct Transition {
  std::vector<int> state;
  int action = 0;
  std::vector<int> next_state;
  double reward = 0.0;    // Lagrangian-shaped at collection time
  double vaoi_sum = 0.0;  // raw parts, kept for optional re-shaping at sample time
  int cost = 0;
};

/// Fixed-capacity FIFO store with uniform, with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ArgumentError("replay capacity must be positive");
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Item i in insertion order (0 is the oldest still stored).
  const Transition& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const {
    if (items_.empty()) throw StateError("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  std::vector<Transition> sample(std::size_t batch, std::mt19937_64& rng) const {
    std::vector<Transition> out;
    out.reserve(batch);
    for (std::size_t i : sample_indices(batch, rng)) out.push_back(items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

}  // namespace vaoi
