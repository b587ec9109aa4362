#include "dearfed/sac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace dearfed {

void RewardConfig::validate() const {
  if (!(kappa > 1.0)) throw std::invalid_argument("reward kappa must be > 1");
  if (!(beta1 >= 0.0 && beta2 >= 0.0)) throw std::invalid_argument("reward weights must be >= 0");
  if (!(target_mape >= 0.0 && target_mape <= 1.0)) throw std::invalid_argument("target MAPE must lie in [0, 1]");
}

double accuracy_reward(const RewardConfig& cfg, double delta) {
  const double d = std::isfinite(delta) ? std::clamp(delta, 0.0, 1.0) : 1.0;
  return cfg.beta1 * (std::pow(cfg.kappa, cfg.target_mape - d) - 1.0);
}

double compute_reward(const RewardConfig& cfg, double delta, std::span<const double> nbar,
                      std::span<const double> a) {
  if (nbar.size() != a.size() || a.empty()) throw std::invalid_argument("reward needs K marks and K weights");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (nbar[i] - a[i]) * (nbar[i] - a[i]);
  return accuracy_reward(cfg, delta) - cfg.beta2 * sq / static_cast<double>(a.size());
}

std::size_t state_dim(std::size_t k, std::size_t embed_dim) { return (k + 1) * embed_dim + 2 * k; }

std::vector<double> build_state(std::span<const double> e_global, const std::vector<std::vector<double>>& clients,
                                std::span<const double> losses, std::span<const double> a_prev) {
  const std::size_t k = clients.size();
  if (losses.size() != k || a_prev.size() != k) {
    throw std::invalid_argument("state needs " + std::to_string(k) + " losses and weights, got " +
                                std::to_string(losses.size()) + " and " + std::to_string(a_prev.size()));
  }
  std::vector<double> s(e_global.begin(), e_global.end());
  for (const auto& e : clients) {
    if (e.size() != e_global.size()) throw std::invalid_argument("client embedding width differs from global");
    s.insert(s.end(), e.begin(), e.end());
  }
  s.insert(s.end(), losses.begin(), losses.end());
  s.insert(s.end(), a_prev.begin(), a_prev.end());
  return s;
}

std::vector<double> build_state(std::span<const double> e_global, const std::vector<QualityReport>& reports,
                                std::span<const double> losses, std::span<const double> a_prev) {
  std::vector<std::vector<double>> e;
  e.reserve(reports.size());
  for (const auto& r : reports) e.push_back(r.embedding);
  return build_state(e_global, e, losses, a_prev);
}

std::vector<double> softmax(std::span<const double> u, double temperature) {
  if (u.empty()) throw std::invalid_argument("softmax of an empty vector");
  const double m = *std::max_element(u.begin(), u.end());
  std::vector<double> a(u.size());
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    a[i] = std::exp((u[i] - m) / temperature);
    z += a[i];
  }
  for (double& v : a) v /= z;
  return a;
}

double tanh_log_jacobian(double z) {
  const double t = -2.0 * z;
  const double softplus = t > 30.0 ? t : std::log1p(std::exp(t));
  return 2.0 * (std::numbers::ln2 - z - softplus);
}

void RunningNorm::update(std::span<const double> x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("RunningNorm: width mismatch");
  count_ += 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    mean_[i] += d / count_;
    m2_[i] += d * (x[i] - mean_[i]);
  }
}

std::vector<double> RunningNorm::variance() const {
  std::vector<double> v(mean_.size(), 1.0);
  if (count_ < 2.0) return v;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / count_;
  return v;
}

std::vector<double> RunningNorm::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("RunningNorm: width mismatch");
  const auto var = variance();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::clamp((x[i] - mean_[i]) / std::sqrt(var[i] + 1e-8), -10.0, 10.0);
  }
  return out;
}

ModelParams RunningNorm::to_params(const std::string& role) const {
  ModelParams p;
  const std::size_t n = mean_.size();
  p.layout = {{role + "/count", 0, {1}}, {role + "/mean", 1, {n}}, {role + "/m2", 1 + n, {n}}};
  p.values.push_back(count_);
  p.values.insert(p.values.end(), mean_.begin(), mean_.end());
  p.values.insert(p.values.end(), m2_.begin(), m2_.end());
  return p;
}

void RunningNorm::from_params(const ModelParams& all, const std::string& role) {
  const ModelParams p = extract_role(all, role);
  const std::size_t n = mean_.size();
  if (p.dim() != 1 + 2 * n) throw ShapeError("observation statistics do not match state width " + std::to_string(n));
  count_ = p.values[0];
  std::copy_n(p.values.begin() + 1, n, mean_.begin());
  std::copy_n(p.values.begin() + 1 + static_cast<std::ptrdiff_t>(n), n, m2_.begin());
}

void SacConfig::validate() const {
  if (hidden == 0 || batch == 0) throw std::invalid_argument("SAC hidden and batch must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("SAC gamma must lie in [0, 1]");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("SAC rho must lie in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("SAC learning rate must be > 0");
  if (!(softmax_temperature > 0.0)) throw std::invalid_argument("softmax temperature must be > 0");
  if (!(log_std_min < log_std_max)) throw std::invalid_argument("log_std_min must be < log_std_max");
  if (!(init_alpha > 0.0)) throw std::invalid_argument("initial entropy temperature must be > 0");
}

namespace {

// Forward through an MLP whose weights enter as constants: no parameter
// gradients, but gradients still reach the input.
Var frozen_forward(Graph& g, const Mlp& net, Var x) {
  Var h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    h = g.add_row(g.matmul(h, g.constant(l.weight.value)), g.constant(l.bias.value));
    if (i + 1 < net.layers.size()) h = net.activation == Activation::Relu ? g.relu(h) : g.tanh(h);
  }
  return h;
}

ParamList collect(Mlp& net) {
  ParamList p;
  net.collect(p);
  return p;
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

SacAgent::SacAgent(std::size_t state_dim, std::size_t k, const SacConfig& cfg, std::uint64_t seed)
    : state_dim_(state_dim), k_(k), cfg_(cfg), buffer_(cfg.replay), norm_(state_dim) {
  cfg_.validate();
  if (state_dim == 0 || k == 0) throw std::invalid_argument("SAC needs state and action dimensions >= 1");
  Rng rng = make_rng(seed, "sac-init");
  actor_ = Mlp("actor", {state_dim, cfg.hidden, cfg.hidden, 2 * k}, rng);
  critic_[0] = Mlp("q", {state_dim + k, cfg.hidden, cfg.hidden, 1}, rng);
  critic_[1] = Mlp("q", {state_dim + k, cfg.hidden, cfg.hidden, 1}, rng);
  target_[0] = critic_[0];
  target_[1] = critic_[1];
  log_alpha_ = Parameter("log_alpha", Tensor::scalar(std::log(cfg.init_alpha)));
  actor_opt_ = AdamState(total_size(actor_params()), cfg.lr);
  critic_opt_[0] = AdamState(total_size(critic_params(0)), cfg.lr);
  critic_opt_[1] = AdamState(total_size(critic_params(1)), cfg.lr);
  alpha_opt_ = AdamState(1, cfg.lr);
}

double SacAgent::alpha() const { return std::exp(log_alpha_.value[0]); }

ParamList SacAgent::actor_params() { return collect(actor_); }
ParamList SacAgent::critic_params(int which) { return collect(critic_[which]); }
ParamList SacAgent::target_params(int which) { return collect(target_[which]); }

std::pair<Var, Var> SacAgent::actor_forward(Graph& g, Var s) {
  Var out = actor_.forward(g, s);
  Var mu = g.slice_cols(out, 0, k_);
  Var raw = g.slice_cols(out, k_, 2 * k_);
  // Smoothly squash log-std into [min, max].
  const double half = 0.5 * (cfg_.log_std_max - cfg_.log_std_min);
  Var log_std = g.add_scalar(g.scale(g.tanh(raw), half), cfg_.log_std_min + half);
  return {mu, log_std};
}

Var SacAgent::critic_forward(Graph& g, int which, Var s, Var u) {
  const Var parts[] = {s, u};
  return critic_[which].forward(g, g.concat_cols(parts));
}

void SacAgent::observe_state(std::span<const double> s) {
  if (cfg_.normalize_obs) norm_.update(s);
}

Tensor SacAgent::stack_states(const std::vector<const std::vector<double>*>& rows) const {
  Tensor t = Tensor::zeros(rows.size(), state_dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->size() != state_dim_) {
      throw std::invalid_argument("state has " + std::to_string(rows[i]->size()) + " entries, agent expects " +
                                  std::to_string(state_dim_));
    }
    const std::vector<double> x = cfg_.normalize_obs ? norm_.apply(*rows[i]) : *rows[i];
    std::copy(x.begin(), x.end(), t.data() + i * state_dim_);
  }
  return t;
}

ActionSample SacAgent::act(std::span<const double> s, bool deterministic, Rng& rng) {
  const std::vector<double> raw(s.begin(), s.end());
  Graph g;
  auto [mu, log_std] = actor_forward(g, g.constant(stack_states({&raw})));
  ActionSample out;
  out.z.resize(k_);
  out.u.resize(k_);
  std::normal_distribution<double> n01;
  for (std::size_t j = 0; j < k_; ++j) {
    const double m = g.value(mu)[j];
    const double ls = g.value(log_std)[j];
    const double sigma = std::exp(ls);
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(m)) {
      throw std::runtime_error("actor produced an invalid Gaussian (mu=" + std::to_string(m) +
                               ", sigma=" + std::to_string(sigma) + ")");
    }
    const double eps = deterministic ? 0.0 : n01(rng);
    out.z[j] = m + sigma * eps;
    out.u[j] = std::tanh(out.z[j]);
    out.log_prob += -0.5 * eps * eps - ls - kHalfLog2Pi - tanh_log_jacobian(out.z[j]);
  }
  out.a = softmax(out.u, cfg_.softmax_temperature);
  return out;
}

void SacAgent::push(Transition t) {
  if (t.s.size() != state_dim_ || t.s2.size() != state_dim_ || t.u.size() != k_) {
    throw std::invalid_argument("transition does not match the agent's state/action widths");
  }
  buffer_.push(std::move(t));
}

void SacAgent::soft_update() {
  for (int c = 0; c < 2; ++c) {
    const ParamList src = critic_params(c);
    const ParamList dst = target_params(c);
    for (std::size_t p = 0; p < src.size(); ++p) {
      auto s = src[p]->value.values();
      auto d = dst[p]->value.values();
      for (std::size_t i = 0; i < s.size(); ++i) d[i] = cfg_.rho * s[i] + (1.0 - cfg_.rho) * d[i];
    }
  }
}

SacDiagnostics SacAgent::update(Rng& rng, std::size_t k, std::size_t K) {
  const SampledBatch batch = buffer_.sample(cfg_.batch, k, K, rng);
  const std::size_t B = batch.ids.size();
  std::vector<const std::vector<double>*> s_rows, s2_rows;
  Tensor u = Tensor::zeros(B, k_);
  for (std::size_t b = 0; b < B; ++b) {
    s_rows.push_back(&batch.items[b]->s);
    s2_rows.push_back(&batch.items[b]->s2);
    std::copy(batch.items[b]->u.begin(), batch.items[b]->u.end(), u.data() + b * k_);
  }
  const Tensor S = stack_states(s_rows);
  const Tensor S2 = stack_states(s2_rows);
  const double a_coef = alpha();
  std::normal_distribution<double> n01;
  SacDiagnostics d;
  d.update = ++updates_;

  // TD targets from the target critics and the current policy at s'.
  Tensor y = Tensor::zeros(B, 1);
  {
    Graph g;
    Var s2 = g.constant(S2);
    auto [mu, log_std] = actor_forward(g, s2);
    Tensor u2 = Tensor::zeros(B, k_);
    std::vector<double> logp(B, 0.0);
    for (std::size_t i = 0; i < B * k_; ++i) {
      const double eps = n01(rng);
      const double z = g.value(mu)[i] + std::exp(g.value(log_std)[i]) * eps;
      u2[i] = std::tanh(z);
      logp[i / k_] += -0.5 * eps * eps - g.value(log_std)[i] - kHalfLog2Pi - tanh_log_jacobian(z);
    }
    const Var in_parts[] = {s2, g.constant(u2)};
    Var in = g.concat_cols(in_parts);
    Var q = g.minimum(frozen_forward(g, target_[0], in), frozen_forward(g, target_[1], in));
    for (std::size_t b = 0; b < B; ++b) {
      y[b] = batch.items[b]->r + cfg_.gamma * (g.value(q)[b] - a_coef * logp[b]);
    }
  }

  // Critics: importance-weighted squared TD error.
  Tensor w({B, 1}, batch.weights);
  std::vector<double> td(B, 0.0);
  for (int c = 0; c < 2; ++c) {
    const ParamList params = critic_params(c);
    zero_grads(params);
    Graph g;
    Var q = critic_forward(g, c, g.constant(S), g.constant(u));
    Var err = g.sub(q, g.constant(y));
    Var loss = g.mean(g.mul(g.constant(w), g.square(err)));
    d.critic_loss += 0.5 * g.scalar(loss);
    for (std::size_t b = 0; b < B; ++b) {
      td[b] += 0.5 * std::abs(g.value(err)[b]);
      d.mean_q += 0.5 * g.value(q)[b] / static_cast<double>(B);
    }
    if (!std::isfinite(g.scalar(loss))) throw SacDiverged("critic loss is not finite", d);
    g.backward(loss);
    clip_grad_norm(params, cfg_.clip_norm);
    adam_step(critic_opt_[c], params);
  }
  for (double v : td) d.mean_abs_td += v / static_cast<double>(B);

  // Actor: reparameterized sample scored by the frozen twin minimum.
  double mean_logp = 0.0;
  {
    const ParamList params = actor_params();
    zero_grads(params);
    Graph g;
    Var s = g.constant(S);
    auto [mu, log_std] = actor_forward(g, s);
    Tensor eps = Tensor::zeros(B, k_);
    Tensor base = Tensor::zeros(B, k_);
    for (std::size_t i = 0; i < B * k_; ++i) {
      eps[i] = n01(rng);
      base[i] = -0.5 * eps[i] * eps[i] - kHalfLog2Pi;
    }
    Var z = g.add(mu, g.mul(g.exp(log_std), g.constant(eps)));
    Var squashed = g.tanh(z);
    Var jac = g.add_scalar(g.scale(g.add(z, g.softplus(g.scale(z, -2.0))), -2.0), 2.0 * std::numbers::ln2);
    Var logp = g.row_sum(g.sub(g.sub(g.constant(base), log_std), jac));
    const Var in_parts[] = {s, squashed};
    Var in = g.concat_cols(in_parts);
    Var q = g.minimum(frozen_forward(g, critic_[0], in), frozen_forward(g, critic_[1], in));
    Var loss = g.mean(g.sub(g.scale(logp, a_coef), q));
    d.actor_loss = g.scalar(loss);
    for (std::size_t b = 0; b < B; ++b) mean_logp += g.value(logp)[b] / static_cast<double>(B);
    if (!std::isfinite(d.actor_loss)) throw SacDiverged("actor loss is not finite", d);
    g.backward(loss);
    clip_grad_norm(params, cfg_.clip_norm);
    adam_step(actor_opt_, params);
  }
  d.entropy = -mean_logp;

  if (cfg_.auto_entropy) {
    // d/d(log alpha) of -log_alpha * (logp + target) averaged over the batch.
    const double grad = -(mean_logp + target_entropy());
    adam_step(alpha_opt_, log_alpha_.value.values(), std::span<const double>(&grad, 1));
  }
  d.alpha = alpha();

  soft_update();
  buffer_.update_priorities(batch.ids, td);
  return d;
}

std::vector<SacDiagnostics> SacAgent::train_step(Rng& rng) {
  std::vector<SacDiagnostics> out;
  if (!ready()) return out;
  const std::size_t n = std::max<std::size_t>(cfg_.updates_per_step, 1);
  for (std::size_t i = 1; i <= n; ++i) out.push_back(update(rng, i, n));
  return out;
}

ModelParams SacAgent::to_params() const {
  auto* self = const_cast<SacAgent*>(this);
  ModelParams alpha;
  alpha.layout = {{"alpha/log_alpha", 0, {1}}};
  alpha.values = {log_alpha_.value[0]};
  return concat_params({ModelParams::from(self->actor_params(), "actor/"),
                        ModelParams::from(self->critic_params(0), "critic1/"),
                        ModelParams::from(self->critic_params(1), "critic2/"),
                        ModelParams::from(self->target_params(0), "target1/"),
                        ModelParams::from(self->target_params(1), "target2/"), alpha, norm_.to_params("norm")});
}

void SacAgent::from_params(const ModelParams& p) {
  extract_role(p, "actor").assign_to(actor_params());
  extract_role(p, "critic1").assign_to(critic_params(0));
  extract_role(p, "critic2").assign_to(critic_params(1));
  extract_role(p, "target1").assign_to(target_params(0));
  extract_role(p, "target2").assign_to(target_params(1));
  const ModelParams a = extract_role(p, "alpha");
  if (a.dim() != 1) throw ShapeError("checkpoint has no entropy temperature");
  log_alpha_.value[0] = a.values[0];
  norm_.from_params(p, "norm");
}

void SacAgent::save(const std::filesystem::path& path) const { save_params(path, to_params()); }
void SacAgent::load(const std::filesystem::path& path) { from_params(load_params(path)); }

void write_diagnostics_jsonl(std::ostream& out, const SacDiagnostics& d) {
  nlohmann::json j = {{"update", d.update},       {"critic_loss", d.critic_loss}, {"actor_loss", d.actor_loss},
                      {"alpha", d.alpha},         {"entropy", d.entropy},         {"mean_q", d.mean_q},
                      {"mean_abs_td", d.mean_abs_td}};
  out << j.dump() << '\n';
}

}  // namespace dearfed
