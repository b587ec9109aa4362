#include "dearfed/nn.hpp"

#include <cmath>

namespace dearfed {

void uniform_init(Tensor& t, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", Tensor::zeros(in, out)),
      bias(name + ".bias", Tensor::zeros(1, out)) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  uniform_init(weight.value, bound, rng);
  uniform_init(bias.value, bound, rng);
}

Var Linear::forward(Graph& g, Var x) {
  return g.add_row(g.matmul(x, g.param(weight)), g.param(bias));
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng, Activation act)
    : activation(act) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

Var Mlp::forward(Graph& g, Var x) {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(g, h);
    if (i + 1 < layers.size()) h = activation == Activation::Relu ? g.relu(h) : g.tanh(h);
  }
  return h;
}

void Mlp::collect(ParamList& out) {
  for (auto& l : layers) l.collect(out);
}

}  // namespace dearfed
