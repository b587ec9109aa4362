#include "dearfed/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dearfed {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("SumTree capacity must be >= 1");
  base_ = 1;
  while (base_ < capacity) base_ <<= 1;
  tree_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= capacity_) throw std::out_of_range("SumTree leaf out of range");
  std::size_t i = base_ + leaf;
  tree_[i] = value;
  // Recompute parents from children so rounding never accumulates.
  for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

double SumTree::prefix(std::size_t leaf) const {
  if (leaf >= capacity_) return total();
  double s = 0.0;
  std::size_t i = base_ + leaf;
  while (i > 1) {
    if (i & 1) s += tree_[i - 1];
    i >>= 1;
  }
  return s;
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = tree_[2 * i];
    if (mass < left || tree_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(const ReplayConfig& cfg)
    : cfg_(cfg), tree_(cfg.capacity), raw_priority_(cfg.capacity, 0.0) {
  if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw std::invalid_argument("PER exponents must be >= 0");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("PER epsilon must be > 0");
  data_.resize(cfg.capacity);
}

void ReplayBuffer::push(Transition t) {
  data_[next_] = std::move(t);
  set_priority(next_, max_priority_);
  next_ = (next_ + 1) % cfg_.capacity;
  size_ = std::min(size_ + 1, cfg_.capacity);
}

void ReplayBuffer::set_priority(std::size_t id, double priority) {
  if (!(priority > 0.0) || !std::isfinite(priority)) {
    throw std::invalid_argument("priority must be finite and positive");
  }
  raw_priority_[id] = priority;
  max_priority_ = std::max(max_priority_, priority);
  tree_.set(id, std::pow(priority, cfg_.alpha));
}

double ReplayBuffer::priority(std::size_t id) const { return raw_priority_[id]; }

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& ids, const std::vector<double>& td) {
  if (ids.size() != td.size()) throw std::invalid_argument("update_priorities: length mismatch");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double p = std::isfinite(td[i]) ? std::abs(td[i]) + cfg_.eps : max_priority_;
    set_priority(ids[i], p);
  }
}

std::size_t ReplayBuffer::recent_range(std::size_t batch, std::size_t k, std::size_t K) const {
  const double n = static_cast<double>(size_);
  const double shrink = K > 0 ? std::pow(cfg_.eta, static_cast<double>(k) * 1000.0 / static_cast<double>(K)) : 1.0;
  const auto c = static_cast<std::size_t>(std::max({n * shrink, static_cast<double>(cfg_.c_min),
                                                    static_cast<double>(batch)}));
  return std::min(c, size_);
}

SampledBatch ReplayBuffer::sample(std::size_t batch, std::size_t k, std::size_t K, Rng& rng) const {
  return sample_range(batch, recent_range(batch, k, K), rng);
}

SampledBatch ReplayBuffer::sample(std::size_t batch, Rng& rng) const { return sample_range(batch, size_, rng); }

SampledBatch ReplayBuffer::sample_range(std::size_t batch, std::size_t range, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  range = std::clamp<std::size_t>(range, 1, size_);
  // The newest `range` items end at next_ (exclusive) and may wrap.
  const std::size_t end = next_ == 0 ? cfg_.capacity : next_;
  std::size_t start;
  double mass_a, mass_b = 0.0, offset_a;
  bool wrapped = range > end;
  if (!wrapped) {
    start = end - range;
    offset_a = tree_.prefix(start);
    mass_a = tree_.prefix(end) - offset_a;
  } else {
    start = cfg_.capacity - (range - end);
    offset_a = tree_.prefix(start);
    mass_a = tree_.total() - offset_a;
    mass_b = tree_.prefix(end);
  }
  const double mass = mass_a + mass_b;
  if (!(mass > 0.0)) throw std::logic_error("replay buffer has zero total priority");

  SampledBatch out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double max_w = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double m = u(rng) * mass;
    std::size_t id;
    if (m < mass_a) {
      id = tree_.find(offset_a + m);
      if (id < start) id = start;  // guard against rounding at the segment edge
    } else {
      id = tree_.find(m - mass_a);
      if (id >= end) id = end - 1;
    }
    const double p = tree_.get(id) / mass;
    const double w = std::pow(static_cast<double>(range) * p, -cfg_.beta);
    out.ids.push_back(id);
    out.weights.push_back(w);
    out.items.push_back(&data_[id]);
    max_w = std::max(max_w, w);
  }
  for (double& w : out.weights) w /= max_w;
  return out;
}

}  // namespace dearfed
