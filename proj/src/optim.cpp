#include "dearfed/optim.hpp"

#include <cmath>

namespace dearfed {

NonFiniteGradient::NonFiniteGradient(std::size_t index, double value)
    : std::runtime_error("non-finite gradient " + std::to_string(value) + " at index " +
                         std::to_string(index)),
      index_(index) {}

namespace {

void check_finite(std::span<const double> grads, std::size_t base) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NonFiniteGradient(base + i, grads[i]);
  }
}

void apply(AdamState& s, double* params, const double* grads, std::size_t n, std::size_t off,
           double c1, double c2) {
  double* m = s.m.data() + off;
  double* v = s.v.data() + off;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: length mismatch (params " + std::to_string(params.size()) +
                     ", grads " + std::to_string(grads.size()) + ", state " +
                     std::to_string(state.m.size()) + ")");
  }
  check_finite(grads, 0);
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  apply(state, params.data(), grads.data(), params.size(), 0, c1, c2);
}

void adam_step(AdamState& state, const ParamList& params) {
  const std::size_t n = total_size(params);
  if (n != state.m.size()) {
    throw ShapeError("adam_step: state sized " + std::to_string(state.m.size()) +
                     " for " + std::to_string(n) + " parameters");
  }
  std::size_t off = 0;
  for (const Parameter* p : params) {
    check_finite(p->grad.values(), off);
    off += p->grad.size();
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  off = 0;
  for (Parameter* p : params) {
    apply(state, p->value.data(), p->grad.data(), p->value.size(), off, c1, c2);
    off += p->value.size();
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

}  // namespace dearfed
