#include "dearfed/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dearfed {

namespace {

#if defined(__GLIBC__)
// Graph buffers of a few hundred KB are allocated and freed many times per
// step; glibc's default mmap threshold turns each into an mmap/munmap pair.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {
  if (rank() > 2) {
    throw ShapeError("tensor rank " + std::to_string(rank()) + " unsupported (max 2)");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (rank() > 2) {
    throw ShapeError("tensor rank " + std::to_string(rank()) + " unsupported (max 2)");
  }
  if (product(shape_) != values_.size()) {
    throw ShapeError("shape " + shape_str() + " needs " + std::to_string(product(shape_)) +
                     " values, got " + std::to_string(values_.size()));
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  switch (rank()) {
    case 0: return 1;
    case 1: return shape_[0];
    default: return shape_[1];
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_str() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out << 'x';
    out << shape_[i];
  }
  out << ']';
  return out.str();
}

Parameter::Parameter(std::string n, Tensor init)
    : name(std::move(n)), value(std::move(init)), grad(value.shape(), 0.0) {}

std::size_t total_size(const ParamList& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

std::vector<double> flatten_values(const ParamList& params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const auto* p : params) {
    flat.insert(flat.end(), p->value.storage().begin(), p->value.storage().end());
  }
  return flat;
}

std::vector<double> flatten_grads(const ParamList& params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const auto* p : params) {
    flat.insert(flat.end(), p->grad.storage().begin(), p->grad.storage().end());
  }
  return flat;
}

void unflatten_values(const ParamList& params, std::span<const double> flat) {
  if (flat.size() != total_size(params)) {
    throw ShapeError("flat vector has " + std::to_string(flat.size()) + " values, parameters need " +
                     std::to_string(total_size(params)));
  }
  std::size_t off = 0;
  for (auto* p : params) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p->value.size(), p->value.data());
    off += p->value.size();
  }
}

}  // namespace dearfed
