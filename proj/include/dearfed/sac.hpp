#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "dearfed/autodiff.hpp"
#include "dearfed/model_params.hpp"
#include "dearfed/nn.hpp"
#include "dearfed/optim.hpp"
#include "dearfed/qeen.hpp"
#include "dearfed/replay.hpp"
#include "dearfed/rng.hpp"

namespace dearfed {

struct RewardConfig {
  double target_mape = 0.02;  // as a fraction
  double kappa = 64.0;
  double beta1 = 0.5;
  double beta2 = 0.5;
  void validate() const;
};

/// beta1 * (kappa^(target - delta) - 1) - beta2 * mean((nbar - a)^2).
/// delta is clamped to [0, 1].
double compute_reward(const RewardConfig& cfg, double delta, std::span<const double> nbar,
                      std::span<const double> a);
/// The accuracy term alone (no mark term).
double accuracy_reward(const RewardConfig& cfg, double delta);

/// (e_g, e_1..e_K, l_1..l_K, a_prev).
std::vector<double> build_state(std::span<const double> e_global, const std::vector<QualityReport>& reports,
                                std::span<const double> losses, std::span<const double> a_prev);
/// Same layout with raw embeddings of any width (used when no encoder is present).
std::vector<double> build_state(std::span<const double> e_global, const std::vector<std::vector<double>>& clients,
                                std::span<const double> losses, std::span<const double> a_prev);
std::size_t state_dim(std::size_t k, std::size_t embed_dim);

std::vector<double> softmax(std::span<const double> u, double temperature = 1.0);
/// log(1 - tanh(z)^2) computed stably as 2 (log 2 - z - softplus(-2z)).
double tanh_log_jacobian(double z);

/// Welford running mean/variance with a clipped standardize().
class RunningNorm {
 public:
  RunningNorm() = default;
  explicit RunningNorm(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}

  std::size_t dim() const { return mean_.size(); }
  double count() const { return count_; }
  void update(std::span<const double> x);
  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> variance() const;

  ModelParams to_params(const std::string& role) const;
  void from_params(const ModelParams& p, const std::string& role);

 private:
  double count_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct SacConfig {
  std::size_t hidden = 128;
  double lr = 3e-4;
  double gamma = 0.99;
  double rho = 5e-3;
  std::size_t batch = 64;
  std::size_t updates_per_step = 1;
  std::size_t warmup = 256;  // buffer size before the first update
  ReplayConfig replay;
  bool auto_entropy = true;
  double init_alpha = 0.1;
  double target_entropy_scale = 1.0;  // target entropy = -scale * K
  double softmax_temperature = 1.0;
  double log_std_min = -5.0;
  double log_std_max = 1.0;
  double clip_norm = 5.0;
  bool normalize_obs = true;
  void validate() const;
};

struct ActionSample {
  std::vector<double> z;  // Gaussian sample
  std::vector<double> u;  // tanh(z), what the critics see
  std::vector<double> a;  // softmax(u / temperature), on the simplex
  double log_prob = 0.0;
};

struct SacDiagnostics {
  std::uint64_t update = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
  double mean_q = 0.0;
  double mean_abs_td = 0.0;
};

/// Raised when an update produces a non-finite loss.
class SacDiverged : public std::runtime_error {
 public:
  SacDiverged(const std::string& what, const SacDiagnostics& d) : std::runtime_error(what), diagnostics(d) {}
  SacDiagnostics diagnostics;
};

/// Soft actor-critic over a K-dimensional squashed Gaussian with twin
/// critics, target critics, automatic entropy tuning and PER+ERE replay.
///
/// States are stored raw in the buffer and standardized with the running
/// observation statistics at use time.
class SacAgent {
 public:
  SacAgent(std::size_t state_dim, std::size_t k, const SacConfig& cfg, std::uint64_t seed);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return k_; }
  const SacConfig& config() const { return cfg_; }
  double alpha() const;
  double target_entropy() const { return -cfg_.target_entropy_scale * static_cast<double>(k_); }
  std::uint64_t updates() const { return updates_; }
  ReplayBuffer& buffer() { return buffer_; }
  const RunningNorm& normalizer() const { return norm_; }

  /// Records s in the observation statistics (call once per environment step).
  void observe_state(std::span<const double> s);
  ActionSample act(std::span<const double> s, bool deterministic, Rng& rng);
  void push(Transition t);
  bool ready() const { return buffer_.size() >= std::max(cfg_.batch, cfg_.warmup); }
  /// One update; k / K index the update within a block for ERE.
  SacDiagnostics update(Rng& rng, std::size_t k = 1, std::size_t K = 1);
  /// updates_per_step updates if ready(); returns the last diagnostics.
  std::vector<SacDiagnostics> train_step(Rng& rng);

  /// Graph pieces, exposed for gradient checks.
  std::pair<Var, Var> actor_forward(Graph& g, Var s);  // (mu, log_std)
  Var critic_forward(Graph& g, int which, Var s, Var u);
  ParamList actor_params();
  ParamList critic_params(int which);
  ParamList target_params(int which);
  void soft_update();

  ModelParams to_params() const;
  void from_params(const ModelParams& p);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  Tensor stack_states(const std::vector<const std::vector<double>*>& rows) const;

  std::size_t state_dim_;
  std::size_t k_;
  SacConfig cfg_;
  Mlp actor_;
  Mlp critic_[2];
  Mlp target_[2];
  Parameter log_alpha_;
  AdamState actor_opt_;
  AdamState critic_opt_[2];
  AdamState alpha_opt_;
  ReplayBuffer buffer_;
  RunningNorm norm_;
  std::uint64_t updates_ = 0;
};

void write_diagnostics_jsonl(std::ostream& out, const SacDiagnostics& d);

}  // namespace dearfed
