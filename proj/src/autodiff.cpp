#include "dearfed/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dearfed/kernels.hpp"

namespace dearfed {

namespace {

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

Tensor like(const Tensor& t) { return Tensor::zeros(t.rows(), t.cols()); }

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out = like(a);
  const double* x = a.data();
  double* y = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(x[i]);
  return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out = like(a);
  const double* x = a.data();
  const double* z = b.data();
  double* y = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(x[i], z[i]);
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("graph: invalid variable");
  return nodes_[v.id];
}

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::unary(Op op, Var a, Tensor out) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.op == Op::Param ? n.param->value : n.value;
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw ShapeError("scalar(): tensor is " + dims(t));
  return t[0];
}

Var Graph::constant(Tensor t) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(t);
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  Node n;
  n.op = Op::Param;
  n.param = &p;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + dims(x) + " * " + dims(y));
  }
  Tensor out = Tensor::zeros(x.rows(), y.cols());
  kernels::gemm(x.data(), y.data(), out.data(), x.rows(), x.cols(), y.cols(), false);
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  require_same(value(a), value(b), "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = zip(value(a), value(b), [](double x, double y) { return x + y; });
  return push(std::move(n));
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& x = value(a);
  const Tensor& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ShapeError("add_row: row " + dims(r) + " does not broadcast over " + dims(x));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* o = out.data() + i * x.cols();
    for (std::size_t j = 0; j < x.cols(); ++j) o[j] += r[j];
  }
  Node n;
  n.op = Op::AddRow;
  n.a = a.id;
  n.b = row.id;
  n.needs_grad = node(a).needs_grad || node(row).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  require_same(value(a), value(b), "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = zip(value(a), value(b), [](double x, double y) { return x - y; });
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  require_same(value(a), value(b), "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = zip(value(a), value(b), [](double x, double y) { return x * y; });
  return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
  Var v = unary(Op::Scale, a, map(value(a), [c](double x) { return c * x; }));
  nodes_[v.id].c0 = c;
  return v;
}

Var Graph::add_scalar(Var a, double c) {
  return unary(Op::AddScalar, a, map(value(a), [c](double x) { return x + c; }));
}

Var Graph::sigmoid(Var a) { return unary(Op::Sigmoid, a, map(value(a), sigmoid_scalar)); }

Var Graph::tanh(Var a) {
  return unary(Op::Tanh, a, map(value(a), [](double x) { return std::tanh(x); }));
}

Var Graph::relu(Var a) {
  return unary(Op::Relu, a, map(value(a), [](double x) { return x > 0.0 ? x : 0.0; }));
}

Var Graph::exp(Var a) {
  return unary(Op::Exp, a, map(value(a), [](double x) { return std::exp(x); }));
}

Var Graph::log(Var a) {
  return unary(Op::Log, a, map(value(a), [](double x) { return std::log(x); }));
}

Var Graph::softplus(Var a) { return unary(Op::Softplus, a, map(value(a), softplus_scalar)); }

Var Graph::square(Var a) {
  return unary(Op::Square, a, map(value(a), [](double x) { return x * x; }));
}

Var Graph::clamp(Var a, double lo, double hi) {
  Var v = unary(Op::Clamp, a, map(value(a), [lo, hi](double x) { return std::clamp(x, lo, hi); }));
  nodes_[v.id].c0 = lo;
  nodes_[v.id].c1 = hi;
  return v;
}

Var Graph::minimum(Var a, Var b) {
  require_same(value(a), value(b), "minimum");
  Node n;
  n.op = Op::Minimum;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = zip(value(a), value(b), [](double x, double y) { return std::min(x, y); });
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  double acc = 0.0;
  for (double x : value(a).values()) acc += x;
  return unary(Op::Sum, a, Tensor::scalar(acc));
}

Var Graph::mean(Var a) {
  const Tensor& x = value(a);
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return unary(Op::Mean, a, Tensor::scalar(acc / static_cast<double>(x.size())));
}

Var Graph::row_sum(Var a) {
  const Tensor& x = value(a);
  Tensor out = Tensor::zeros(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j);
    out[i] = acc;
  }
  return unary(Op::RowSum, a, std::move(out));
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  Node n;
  n.op = Op::Concat;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rows() != rows) {
      throw ShapeError("concat_cols: row count " + std::to_string(t.rows()) + " != " +
                       std::to_string(rows));
    }
    cols += t.cols();
    n.parts.push_back(p.id);
    n.needs_grad = n.needs_grad || node(p).needs_grad;
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(t.data() + i * t.cols(), t.cols(), out.data() + i * cols + off);
    }
    off += t.cols();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = value(a);
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + dims(x));
  }
  const std::size_t w = end - begin;
  Tensor out = Tensor::zeros(x.rows(), w);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy_n(x.data() + i * x.cols() + begin, w, out.data() + i * w);
  }
  Var v = unary(Op::Slice, a, std::move(out));
  nodes_[v.id].begin = begin;
  nodes_[v.id].end = end;
  return v;
}

Var Graph::mse(Var pred, Var target) {
  const Tensor& p = value(pred);
  const Tensor& t = value(target);
  require_same(p, t, "mse");
  if (p.size() == 0) throw ShapeError("mse: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  Node n;
  n.op = Op::Mse;
  n.a = pred.id;
  n.b = target.id;
  n.needs_grad = node(pred).needs_grad || node(target).needs_grad;
  n.value = Tensor::scalar(acc / static_cast<double>(p.size()));
  return push(std::move(n));
}

Tensor& Graph::grad_slot(std::vector<Tensor>& grads, std::uint32_t id) const {
  Tensor& g = grads[id];
  if (g.size() == 0 && (nodes_[id].op == Op::Param ? nodes_[id].param->value.size()
                                                   : nodes_[id].value.size()) != 0) {
    const Tensor& v = value(Var{id});
    g = Tensor::zeros(v.rows(), v.cols());
  }
  return g;
}

Tensor Graph::grad(Var v) const {
  const Tensor& val = value(v);
  if (v.id < grads_.size() && grads_[v.id].size() == val.size() && val.size() != 0) {
    return grads_[v.id];
  }
  return Tensor::zeros(val.rows(), val.cols());
}

void Graph::backward(Var loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("backward: output must be scalar, got " + dims(lv));
  }
  grads_.assign(nodes_.size(), Tensor());
  grads_[loss.id] = Tensor::scalar(1.0);

  for (std::int64_t idx = loss.id; idx >= 0; --idx) {
    const auto id = static_cast<std::uint32_t>(idx);
    Node& n = nodes_[id];
    if (!n.needs_grad || grads_[id].size() == 0) continue;
    const Tensor& g = grads_[id];
    const double* gd = g.data();
    const std::size_t len = g.size();

    auto accumulate = [&](std::uint32_t target, auto&& f) {
      if (!nodes_[target].needs_grad) return;
      Tensor& dst = grad_slot(grads_, target);
      double* d = dst.data();
      for (std::size_t i = 0; i < dst.size(); ++i) d[i] += f(i);
    };

    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param: {
        double* pg = n.param->grad.data();
        for (std::size_t i = 0; i < len; ++i) pg[i] += gd[i];
        break;
      }
      case Op::MatMul: {
        const Tensor& x = value(Var{n.a});
        const Tensor& y = value(Var{n.b});
        if (nodes_[n.a].needs_grad) {
          Tensor& dx = grad_slot(grads_, n.a);
          kernels::gemm_nt(gd, y.data(), dx.data(), x.rows(), y.cols(), x.cols());
        }
        if (nodes_[n.b].needs_grad) {
          Tensor& dy = grad_slot(grads_, n.b);
          kernels::gemm_tn(x.data(), gd, dy.data(), y.rows(), x.rows(), y.cols());
        }
        break;
      }
      case Op::Add:
        accumulate(n.a, [&](std::size_t i) { return gd[i]; });
        accumulate(n.b, [&](std::size_t i) { return gd[i]; });
        break;
      case Op::AddRow: {
        accumulate(n.a, [&](std::size_t i) { return gd[i]; });
        if (nodes_[n.b].needs_grad) {
          Tensor& dr = grad_slot(grads_, n.b);
          const std::size_t cols = dr.size();
          const std::size_t rows = len / cols;
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) dr[j] += gd[i * cols + j];
          }
        }
        break;
      }
      case Op::Sub:
        accumulate(n.a, [&](std::size_t i) { return gd[i]; });
        accumulate(n.b, [&](std::size_t i) { return -gd[i]; });
        break;
      case Op::Mul: {
        const double* x = value(Var{n.a}).data();
        const double* y = value(Var{n.b}).data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] * y[i]; });
        accumulate(n.b, [&](std::size_t i) { return gd[i] * x[i]; });
        break;
      }
      case Op::Scale: {
        const double c = n.c0;
        accumulate(n.a, [&](std::size_t i) { return c * gd[i]; });
        break;
      }
      case Op::AddScalar:
        accumulate(n.a, [&](std::size_t i) { return gd[i]; });
        break;
      case Op::Sigmoid: {
        const double* y = n.value.data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] * y[i] * (1.0 - y[i]); });
        break;
      }
      case Op::Tanh: {
        const double* y = n.value.data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] * (1.0 - y[i] * y[i]); });
        break;
      }
      case Op::Relu: {
        const double* x = value(Var{n.a}).data();
        accumulate(n.a, [&](std::size_t i) { return x[i] > 0.0 ? gd[i] : 0.0; });
        break;
      }
      case Op::Exp: {
        const double* y = n.value.data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] * y[i]; });
        break;
      }
      case Op::Log: {
        const double* x = value(Var{n.a}).data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] / x[i]; });
        break;
      }
      case Op::Softplus: {
        const double* x = value(Var{n.a}).data();
        accumulate(n.a, [&](std::size_t i) { return gd[i] * sigmoid_scalar(x[i]); });
        break;
      }
      case Op::Square: {
        const double* x = value(Var{n.a}).data();
        accumulate(n.a, [&](std::size_t i) { return 2.0 * x[i] * gd[i]; });
        break;
      }
      case Op::Clamp: {
        const double* x = value(Var{n.a}).data();
        const double lo = n.c0;
        const double hi = n.c1;
        accumulate(n.a, [&](std::size_t i) { return (x[i] >= lo && x[i] <= hi) ? gd[i] : 0.0; });
        break;
      }
      case Op::Minimum: {
        const double* x = value(Var{n.a}).data();
        const double* y = value(Var{n.b}).data();
        accumulate(n.a, [&](std::size_t i) { return x[i] <= y[i] ? gd[i] : 0.0; });
        accumulate(n.b, [&](std::size_t i) { return x[i] <= y[i] ? 0.0 : gd[i]; });
        break;
      }
      case Op::Sum: {
        const double s = gd[0];
        accumulate(n.a, [&](std::size_t) { return s; });
        break;
      }
      case Op::Mean: {
        const double s = gd[0] / static_cast<double>(value(Var{n.a}).size());
        accumulate(n.a, [&](std::size_t) { return s; });
        break;
      }
      case Op::RowSum: {
        const std::size_t cols = value(Var{n.a}).cols();
        accumulate(n.a, [&](std::size_t i) { return gd[i / cols]; });
        break;
      }
      case Op::Concat: {
        const std::size_t cols = n.value.cols();
        const std::size_t rows = n.value.rows();
        std::size_t off = 0;
        for (std::uint32_t part : n.parts) {
          const std::size_t w = value(Var{part}).cols();
          if (nodes_[part].needs_grad) {
            Tensor& dp = grad_slot(grads_, part);
            for (std::size_t i = 0; i < rows; ++i) {
              for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += gd[i * cols + off + j];
            }
          }
          off += w;
        }
        break;
      }
      case Op::Slice: {
        if (!nodes_[n.a].needs_grad) break;
        Tensor& dx = grad_slot(grads_, n.a);
        const std::size_t cols = dx.cols();
        const std::size_t w = n.end - n.begin;
        const std::size_t rows = dx.rows();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < w; ++j) dx[i * cols + n.begin + j] += gd[i * w + j];
        }
        break;
      }
      case Op::Mse: {
        const double* p = value(Var{n.a}).data();
        const double* t = value(Var{n.b}).data();
        const std::size_t count = value(Var{n.a}).size();
        const double s = 2.0 * gd[0] / static_cast<double>(count);
        accumulate(n.a, [&](std::size_t i) { return s * (p[i] - t[i]); });
        accumulate(n.b, [&](std::size_t i) { return -s * (p[i] - t[i]); });
        break;
      }
    }
  }
}

double grad_check(const LossBuilder& build, const ParamList& params, double h, double floor) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step size must be positive");
  zero_grads(params);
  {
    Graph g;
    Var loss = build(g);
    g.backward(loss);
  }
  const std::vector<double> analytic = flatten_grads(params);

  auto eval = [&]() {
    Graph g;
    return g.scalar(build(g));
  };

  double worst = 0.0;
  std::size_t flat = 0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i, ++flat) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval();
      p->value[i] = saved - h;
      const double down = eval();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[flat];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  zero_grads(params);
  return worst;
}

}  // namespace dearfed
