#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dearfed/tensor.hpp"

namespace dearfed {

/// Raised by adam_step when a gradient entry is NaN or infinite.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t index, double value);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Bias-corrected Adam moments for one flat parameter vector.
struct AdamState {
  explicit AdamState(std::size_t n = 0, double learning_rate = 1e-3)
      : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One Adam update, in place. Throws NonFiniteGradient (and leaves params and
/// moments untouched) if any gradient is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Same update applied across a parameter list in order, reading each
/// Parameter::grad.
void adam_step(AdamState& state, const ParamList& params);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

}  // namespace dearfed
