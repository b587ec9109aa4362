#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dearfed/data.hpp"
#include "dearfed/defects.hpp"
#include "dearfed/forecast.hpp"
#include "dearfed/model_params.hpp"
#include "dearfed/qeen.hpp"
#include "dearfed/sac.hpp"

namespace dearfed {

enum class Policy { FedAvg, FixedWeights, DearFsac, SacWithoutQeen, ClLstm };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);
/// Policies that run the federated loop (everything but the centralized baseline).
bool is_federated(Policy p);
bool uses_agent(Policy p);

struct FedConfig {
  double p_k = 0.2;
  std::size_t rounds = 150;
  std::size_t hidden = 32;
  std::uint64_t init_seed = 0;  // server-side initial global model, shared by every run
  FleetSpec fleet;
  WindowingConfig window;
  LocalTrainConfig local;
  DefectSpec defects;
  std::vector<double> fixed_weights;  // fixed_weights policy; empty means uniform
  void validate() const;
  std::size_t k() const;
};

/// Per-client data after defect injection. One train/test split per season.
struct ClientData {
  std::string id;
  std::vector<SeasonSplit> seasons;  // clean data
  WindowSet train_windows;           // what the client trains on (poisoned for DIA clients)
  WindowSet clean_train_windows;     // only filled when it differs from train_windows
  WindowSet test_windows;            // clean, scaled by the clean-train scaler
  bool defective = false;

  const WindowSet& clean_windows() const {
    return clean_train_windows.empty() ? train_windows : clean_train_windows;
  }
};

/// Training windows for a client holding the given per-season training
/// data, scaled by a min-max scaler fitted on all of it.
WindowSet client_train_windows(const std::vector<LoadDataset>& trains, const WindowingConfig& cfg);

/// Everything one run needs: clients, the defective set N_M, the server's
/// validation set D_V and the pooled clean test windows.
struct Fleet {
  std::vector<ClientData> clients;
  std::vector<std::size_t> defective;
  ValidationSet dv;
  WindowSet test_windows;
  std::vector<double> test_targets;
  std::size_t size() const { return clients.size(); }
};

/// Builds a fleet from datasets. Each client's last 168 hours are held out
/// for test; DIA is applied once to the training split of clients in N_M,
/// whose scaler is then fitted on the poisoned data they actually hold.
Fleet prepare_fleet(const std::vector<LoadDataset>& datasets, const std::vector<LoadDataset>& audit,
                    const FedConfig& cfg, std::uint64_t seed);
/// Synthetic fleet and audit clients from cfg.fleet, re-seeded with seed.
Fleet prepare_fleet(const FedConfig& cfg, std::uint64_t seed);

/// Uniform K-subset of [0, n), K = floor(p_k n), sorted, fixed per (seed, round).
std::vector<std::size_t> select_clients(std::size_t n, double p_k, std::uint64_t seed, std::size_t round);

/// sum_i a_i w_i in ascending i.
ModelParams aggregate(std::span<const double> a, const std::vector<ModelParams>& models);

struct GlobalEval {
  double F = 0.0;
  std::vector<double> f;  // per-client mean squared error, normalized units
};
GlobalEval evaluate_global(const ModelParams& w, std::size_t hidden, const std::vector<const WindowSet*>& datasets);

struct TestMetrics {
  double mape = 0.0;  // percent
  double rmse = 0.0;  // kW
};
TestMetrics test_metrics(const ModelParams& w, std::size_t hidden, const Fleet& fleet);

struct RoundRecord {
  std::size_t t = 0;
  std::vector<std::size_t> selected;
  std::vector<double> a;
  std::vector<double> losses;
  std::vector<double> marks;  // predicted n-hat, when the encoder runs
  double delta = 0.0;         // validation MAPE as a fraction
  std::optional<double> reward;
  double seconds = 0.0;  // wall clock, kept out of the JSONL
};
void write_round_jsonl(std::ostream& out, const RoundRecord& r);

/// What the policy needs besides the fleet. The encoder and agent are
/// borrowed; the agent learns only when learn is set.
struct PolicyContext {
  Policy policy = Policy::FedAvg;
  QeenModel* qeen = nullptr;
  SacAgent* agent = nullptr;
  bool learn = false;
  bool force_uniform = false;  // agent pipeline with a = 1/K (equivalence check)
  RewardConfig reward;
  std::uint64_t agent_seed = 0;
  std::ostream* diagnostics = nullptr;  // SAC update stream
};

/// One federated run. Local training draws from (seed, "local", t, i) so the
/// policy never perturbs the clients' random streams.
class Federation {
 public:
  Federation(const FedConfig& cfg, const Fleet& fleet, std::uint64_t seed, PolicyContext ctx);

  RoundRecord run_round();
  std::size_t round() const { return t_; }
  const ModelParams& global() const { return global_; }
  TestMetrics test() const { return test_metrics(global_, cfg_.hidden, fleet_); }
  std::size_t state_dim() const;

 private:
  FedConfig cfg_;
  const Fleet& fleet_;
  std::uint64_t seed_;
  PolicyContext ctx_;
  ModelParams global_;
  std::size_t t_ = 0;
  std::vector<double> a_prev_;
  Rng agent_rng_;
  // Pending transition, completed with the next round's state.
  std::optional<Transition> pending_;
};

/// Initial global model. The server fixes it once so that encoder
/// pretraining and every run start from the same weights.
ModelParams initial_global(std::size_t hidden, std::uint64_t seed);

struct RunResult {
  Policy policy = Policy::FedAvg;
  std::uint64_t seed = 0;
  TestMetrics metrics;
  std::vector<RoundRecord> records;
  ModelParams final_model;
  double seconds = 0.0;
};

RunResult run_federated(const FedConfig& cfg, const Fleet& fleet, std::uint64_t seed, PolicyContext ctx);

struct ClConfig {
  std::size_t epochs = 30;
  double defect_prob = 0.2;  // per-epoch chance of training on defective data / noising
  double lr = 1e-3;
  std::size_t batch_size = 32;
};

/// Centralized baseline: one forecaster on the pooled training windows.
RunResult run_centralized(const FedConfig& cfg, const ClConfig& cl, const Fleet& fleet, std::uint64_t seed);

struct CorpusConfig {
  std::size_t warmup_rounds = 60;
  std::size_t snapshot_every = 4;
  std::size_t first_snapshot = 0;  // earliest round that is snapshotted
  double snr_lo = 0.0;  // dB, noise-only and mixed variants
  double snr_hi = 10.0;
  double dia_k_lo = 10.0, dia_k_hi = 50.0;
  double dia_mu_lo = 0.0, dia_mu_hi = 60.0;
  double dia_sigma_lo = 0.0, dia_sigma_hi = 60.0;
};

/// Marked models for encoder pretraining: a defect-free FedAvg run with all
/// clients selected; at each snapshot round every upload yields a clean copy,
/// a noised copy, a copy trained on DIA-poisoned data and a mixed copy.
/// Labels come from defect_mark on the fleet's validation set.
std::vector<MarkedModel> build_qeen_corpus(const FedConfig& cfg, const CorpusConfig& corpus, const Fleet& fleet,
                                           std::uint64_t seed);

}  // namespace dearfed
