#pragma once

#include <string>
#include <vector>

#include "dearfed/autodiff.hpp"
#include "dearfed/rng.hpp"

namespace dearfed {

/// Fully-connected layer y = x W + b, W stored in x out.
struct Linear {
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(Graph& g, Var x);
  void collect(ParamList& out) { out.push_back(&weight); out.push_back(&bias); }
  std::size_t in() const { return weight.value.rows(); }
  std::size_t out() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
};

enum class Activation { Relu, Tanh };

/// Stack of Linear layers with an activation between (not after) them.
struct Mlp {
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng,
      Activation act = Activation::Relu);

  Var forward(Graph& g, Var x);
  void collect(ParamList& out);

  std::vector<Linear> layers;
  Activation activation = Activation::Relu;
};

/// Fills t with U(-bound, bound).
void uniform_init(Tensor& t, double bound, Rng& rng);

/// Plain forward pass without building backward bookkeeping that outlives
/// the call: builds a throwaway graph and returns the output value.
template <class F>
Tensor evaluate(F&& f) {
  Graph g;
  Var out = f(g);
  return g.value(out);
}

}  // namespace dearfed
