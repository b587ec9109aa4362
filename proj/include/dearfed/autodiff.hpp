#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dearfed/tensor.hpp"

namespace dearfed {

/// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
};

/// Dynamic reverse-mode autodiff tape.
///
/// A Graph is built fresh for each forward pass. Nodes are appended in
/// evaluation order, so the node index is a topological order and backward()
/// simply walks it in reverse. Parameter leaves read their value from the
/// bound Parameter and backward() accumulates into Parameter::grad; constant
/// leaves receive no gradient and prune the backward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (r x c) plus a 1 x c row broadcast over every row.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softplus(Var a);
  Var square(Var a);
  /// Gradient passes only where lo <= a <= hi.
  Var clamp(Var a, double lo, double hi);
  Var minimum(Var a, Var b);
  Var sum(Var a);
  Var mean(Var a);
  /// r x c -> r x 1.
  Var row_sum(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  /// mean((pred - target)^2) as a 1 x 1 tensor.
  Var mse(Var pred, Var target);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  /// Gradient of the last backward() output w.r.t. v (zeros if unreached).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. The loss must be 1 x 1.
  void backward(Var loss);

 private:
  enum class Op : std::uint8_t {
    Constant, Param, MatMul, Add, AddRow, Sub, Mul, Scale, AddScalar, Sigmoid, Tanh, Relu,
    Exp, Log, Softplus, Square, Clamp, Minimum, Sum, Mean, RowSum, Concat, Slice, Mse
  };

  struct Node {
    Op op = Op::Constant;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::vector<std::uint32_t> parts;
    double c0 = 0.0;
    double c1 = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    Parameter* param = nullptr;
    bool needs_grad = false;
    Tensor value;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  Var unary(Op op, Var a, Tensor out);
  Tensor& grad_slot(std::vector<Tensor>& grads, std::uint32_t id) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

/// Builds a scalar loss on a fresh graph. Used by grad_check.
using LossBuilder = std::function<Var(Graph&)>;

/// Maximum relative error between analytic and central-difference gradients
/// over every entry of every parameter. Relative error is
/// |g_a - g_n| / max(|g_a|, |g_n|, floor).
double grad_check(const LossBuilder& build, const ParamList& params, double h = 1e-5,
                  double floor = 1e-8);

}  // namespace dearfed
