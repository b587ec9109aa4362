#pragma once

#include <cstdint>
#include <vector>

#include "dearfed/rng.hpp"

namespace dearfed {

/// Binary sum tree over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return tree_[base_ + leaf]; }
  double total() const { return tree_[1]; }
  /// Sum of leaves [0, leaf).
  double prefix(std::size_t leaf) const;
  /// Smallest leaf whose inclusive prefix sum exceeds mass; mass in [0, total).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> tree_;
};

struct Transition {
  std::vector<double> s;
  std::vector<double> u;  // squashed pre-softmax action the critics consume
  double r = 0.0;
  std::vector<double> s2;
};

struct ReplayConfig {
  std::size_t capacity = 100000;
  double alpha = 0.6;   // priority exponent
  double beta = 0.4;    // importance-sampling exponent
  double eps = 1e-6;    // priority floor added to |td|
  double eta = 0.996;   // recent-experience decay
  std::size_t c_min = 5000;
};

struct SampledBatch {
  std::vector<std::size_t> ids;
  std::vector<double> weights;  // importance weights, max-normalized
  std::vector<const Transition*> items;
};

/// Prioritized replay restricted to the emphasized recent range.
///
/// Leaves hold priority^alpha. New transitions enter with the largest
/// priority seen so far. sample() draws with probability proportional to
/// priority^alpha among the c_k most recent transitions, where
/// c_k = max(size * eta^(k * 1000 / K), c_min, batch) clamped to size.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(const ReplayConfig& cfg);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return cfg_.capacity; }
  const ReplayConfig& config() const { return cfg_; }

  void push(Transition t);
  /// k in [1, K] is the update index within a block of K updates.
  std::size_t recent_range(std::size_t batch, std::size_t k, std::size_t K) const;
  SampledBatch sample(std::size_t batch, std::size_t k, std::size_t K, Rng& rng) const;
  /// Full-range sampling (no emphasis).
  SampledBatch sample(std::size_t batch, Rng& rng) const;
  void update_priorities(const std::vector<std::size_t>& ids, const std::vector<double>& td_errors);
  /// Sets a raw priority (before the alpha exponent).
  void set_priority(std::size_t id, double priority);
  double priority(std::size_t id) const;
  const Transition& at(std::size_t id) const { return data_[id]; }

 private:
  SampledBatch sample_range(std::size_t batch, std::size_t range, Rng& rng) const;

  ReplayConfig cfg_;
  SumTree tree_;
  std::vector<Transition> data_;
  std::vector<double> raw_priority_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace dearfed
