#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dearfed {

/// Thrown when operand shapes do not conform to an operation's arity rules.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor of 64-bit floats.
///
/// Rank 0/1/2 are supported. Every operation in the autodiff graph views a
/// tensor as a matrix: rank-2 shapes map directly, a rank-1 shape {n} is a
/// 1 x n row and a rank-0 shape is 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
  static Tensor row(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool same_shape(const Tensor& other) const { return rows() == other.rows() && cols() == other.cols(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  void fill(double v);
  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// A trainable leaf: value plus a same-shape gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor init);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

using ParamList = std::vector<Parameter*>;

std::size_t total_size(const ParamList& params);
void zero_grads(const ParamList& params);

/// Copies all parameter values, in list order, into one flat vector.
std::vector<double> flatten_values(const ParamList& params);
std::vector<double> flatten_grads(const ParamList& params);
/// Inverse of flatten_values; throws ShapeError on length mismatch.
void unflatten_values(const ParamList& params, std::span<const double> flat);

}  // namespace dearfed
