#include "dearfed/fed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dearfed/kernels.hpp"
#include "json.hpp"

namespace dearfed {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> uniform(std::size_t k) { return std::vector<double>(k, 1.0 / static_cast<double>(k)); }

ForecastModel model_from(const ModelParams& w, std::size_t hidden) {
  Rng unused(0);
  ForecastModel m(hidden, unused);
  m.unflatten(w);
  return m;
}

}  // namespace

std::string to_string(Policy p) {
  switch (p) {
    case Policy::FedAvg: return "fedavg";
    case Policy::FixedWeights: return "fixed_weights";
    case Policy::DearFsac: return "dearfsac";
    case Policy::SacWithoutQeen: return "sac_without_qeen";
    case Policy::ClLstm: return "cl_lstm";
  }
  return "fedavg";
}

Policy policy_from_string(const std::string& s) {
  for (Policy p : {Policy::FedAvg, Policy::FixedWeights, Policy::DearFsac, Policy::SacWithoutQeen, Policy::ClLstm}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown policy '" + s +
                              "' (expected fedavg, fixed_weights, dearfsac, sac_without_qeen or cl_lstm)");
}

bool is_federated(Policy p) { return p != Policy::ClLstm; }
bool uses_agent(Policy p) { return p == Policy::DearFsac || p == Policy::SacWithoutQeen; }

std::size_t FedConfig::k() const {
  return static_cast<std::size_t>(std::floor(p_k * static_cast<double>(fleet.n_clients) + 1e-9));
}

void FedConfig::validate() const {
  if (!(p_k > 0.0 && p_k <= 1.0)) throw std::invalid_argument("p_k must lie in (0, 1]");
  if (k() == 0) {
    throw std::invalid_argument("p_k * n_clients selects no clients (n_clients=" + std::to_string(fleet.n_clients) +
                                ")");
  }
  if (hidden == 0) throw std::invalid_argument("hidden must be >= 1");
  if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
  window.validate();
  defects.validate();
  if (!fixed_weights.empty()) {
    if (fixed_weights.size() != k()) {
      throw std::invalid_argument("fixed_weights needs " + std::to_string(k()) + " entries");
    }
    double s = 0.0;
    for (double v : fixed_weights) {
      if (!(v >= 0.0)) throw std::invalid_argument("fixed_weights entries must be >= 0");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("fixed_weights must sum to 1");
  }
}

WindowSet client_train_windows(const std::vector<LoadDataset>& trains, const WindowingConfig& cfg) {
  std::vector<double> all;
  for (const auto& t : trains) all.insert(all.end(), t.loads.begin(), t.loads.end());
  const Scaler scaler = Scaler::fit(all);
  WindowSet out;
  for (const auto& t : trains) {
    auto w = build_windows(t, cfg, scaler);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

Fleet prepare_fleet(const std::vector<LoadDataset>& datasets, const std::vector<LoadDataset>& audit,
                    const FedConfig& cfg, std::uint64_t seed) {
  if (datasets.empty()) throw std::invalid_argument("fleet has no clients");
  Fleet fleet;
  const std::size_t n = datasets.size();
  if (cfg.defects.kind != DefectKind::None) {
    Rng pick = make_rng(seed, "defective");
    fleet.defective = defective_set(n, cfg.defects.p_m, pick);
  }
  fleet.clients.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ClientData& c = fleet.clients[i];
    c.id = datasets[i].client_id;
    c.seasons = seasonal_split(datasets[i]);
    c.defective = std::binary_search(fleet.defective.begin(), fleet.defective.end(), i);
    std::vector<LoadDataset> clean;
    std::vector<double> clean_loads;
    for (const auto& s : c.seasons) {
      clean.push_back(s.train);
      clean_loads.insert(clean_loads.end(), s.train.loads.begin(), s.train.loads.end());
    }
    c.train_windows = client_train_windows(clean, cfg.window);
    if (c.defective && cfg.defects.has_dia()) {
      Rng rng = make_rng(seed, "dia", {i});
      std::vector<LoadDataset> poisoned;
      for (const auto& t : clean) {
        poisoned.push_back(inject_dia(t, cfg.defects.dia_k, cfg.defects.dia_mu, cfg.defects.dia_sigma, rng));
      }
      c.clean_train_windows = std::move(c.train_windows);
      c.train_windows = client_train_windows(poisoned, cfg.window);
    }
    const Scaler clean_scaler = Scaler::fit(clean_loads);
    for (const auto& s : c.seasons) {
      auto w = build_windows_after(s.train, s.test, cfg.window, clean_scaler);
      c.test_windows.insert(c.test_windows.end(), w.begin(), w.end());
    }
    fleet.test_windows.insert(fleet.test_windows.end(), c.test_windows.begin(), c.test_windows.end());
  }
  fleet.test_targets = targets_kw(fleet.test_windows);
  fleet.dv = build_validation_set(audit, cfg.window);
  return fleet;
}

Fleet prepare_fleet(const FedConfig& cfg, std::uint64_t seed) {
  FleetSpec spec = cfg.fleet;
  spec.seed = derive_seed(seed, "fleet-spec", {cfg.fleet.seed});
  return prepare_fleet(generate_fleet(spec), generate_audit_clients(spec), cfg, seed);
}

std::vector<std::size_t> select_clients(std::size_t n, double p_k, std::uint64_t seed, std::size_t round) {
  if (!(p_k > 0.0 && p_k <= 1.0)) throw std::invalid_argument("p_k must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(p_k * static_cast<double>(n) + 1e-9));
  if (k == 0) throw std::invalid_argument("p_k * N selects no clients");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, "select", {round});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ModelParams aggregate(std::span<const double> a, const std::vector<ModelParams>& models) {
  if (models.empty() || a.size() != models.size()) {
    throw std::invalid_argument("aggregate needs one weight per model (" + std::to_string(a.size()) + " weights, " +
                                std::to_string(models.size()) + " models)");
  }
  std::vector<const double*> rows;
  for (const auto& m : models) {
    if (!m.same_layout(models.front()) || m.dim() != models.front().dim()) {
      throw std::invalid_argument("aggregate: models do not share a layout");
    }
    rows.push_back(m.values.data());
  }
  ModelParams out;
  out.layout = models.front().layout;
  out.values.assign(models.front().dim(), 0.0);
  kernels::weighted_sum(a, rows, out.values);
  return out;
}

GlobalEval evaluate_global(const ModelParams& w, std::size_t hidden, const std::vector<const WindowSet*>& datasets) {
  if (datasets.empty()) throw std::invalid_argument("evaluate_global needs at least one dataset");
  ForecastModel m = model_from(w, hidden);
  GlobalEval out;
  for (const WindowSet* d : datasets) out.f.push_back(eval_loss(m, *d));
  for (double v : out.f) out.F += v;
  out.F /= static_cast<double>(out.f.size());
  return out;
}

TestMetrics test_metrics(const ModelParams& w, std::size_t hidden, const Fleet& fleet) {
  ForecastModel m = model_from(w, hidden);
  const auto pred = predict_all(m, fleet.test_windows);
  return {mape(fleet.test_targets, pred), rmse(fleet.test_targets, pred)};
}

void write_round_jsonl(std::ostream& out, const RoundRecord& r) {
  nlohmann::json j;
  j["t"] = r.t;
  j["selected"] = r.selected;
  j["a"] = r.a;
  j["losses"] = r.losses;
  if (!r.marks.empty()) j["marks"] = r.marks;
  j["delta"] = r.delta;
  j["reward"] = r.reward ? nlohmann::json(*r.reward) : nlohmann::json(nullptr);
  out << j.dump() << '\n';
}

ModelParams initial_global(std::size_t hidden, std::uint64_t seed) {
  Rng rng = make_rng(seed, "init-global");
  return ForecastModel(hidden, rng).flatten();
}

Federation::Federation(const FedConfig& cfg, const Fleet& fleet, std::uint64_t seed, PolicyContext ctx)
    : cfg_(cfg), fleet_(fleet), seed_(seed), ctx_(ctx), agent_rng_(make_rng(ctx.agent_seed, "agent-act")) {
  cfg_.validate();
  global_ = initial_global(cfg_.hidden, cfg_.init_seed);
  a_prev_ = uniform(cfg_.k());
  if (!is_federated(ctx_.policy)) throw std::invalid_argument("Federation cannot run the centralized baseline");
  if (fleet.size() != cfg_.fleet.n_clients) {
    throw std::invalid_argument("fleet has " + std::to_string(fleet.size()) + " clients, config says " +
                                std::to_string(cfg_.fleet.n_clients));
  }
  if (ctx_.policy == Policy::DearFsac && ctx_.qeen == nullptr) {
    throw std::invalid_argument("dearfsac needs a pretrained encoder");
  }
  if (uses_agent(ctx_.policy) && ctx_.agent == nullptr && !ctx_.force_uniform) {
    throw std::invalid_argument(to_string(ctx_.policy) + " needs an agent");
  }
  if (ctx_.agent != nullptr && uses_agent(ctx_.policy) &&
      (ctx_.agent->state_dim() != state_dim() || ctx_.agent->action_dim() != cfg_.k())) {
    throw std::invalid_argument("agent dimensions do not match this federation (state " + std::to_string(state_dim()) +
                                ", K " + std::to_string(cfg_.k()) + ")");
  }
}

std::size_t Federation::state_dim() const {
  const std::size_t k = cfg_.k();
  if (ctx_.policy == Policy::DearFsac) return dearfed::state_dim(k, ctx_.qeen->e_dim());
  return dearfed::state_dim(k, global_.dim());
}

RoundRecord Federation::run_round() {
  const auto t0 = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.t = t_;
  rec.selected = select_clients(fleet_.size(), cfg_.p_k, seed_, t_);
  const std::size_t k = rec.selected.size();
  std::vector<ModelParams> uploads(k);
  std::vector<double> losses(k, 0.0);
  std::vector<std::string> errors(k);

  // Clients are independent; each writes only its own slot.
#pragma omp parallel for schedule(dynamic, 1) if (k > 1 && kernels::max_threads() > 1)
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = rec.selected[j];
    try {
      ForecastModel m = model_from(global_, cfg_.hidden);
      Rng rng = make_rng(seed_, "local", {t_, i});
      losses[j] = train_local(m, fleet_.clients[i].train_windows, cfg_.local, rng).loss;
      uploads[j] = m.flatten();
      if (fleet_.clients[i].defective && cfg_.defects.has_noise()) {
        inject_comm_noise_inplace(uploads[j].values, cfg_.defects.snr_db);
      }
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (!errors[j].empty()) {
      throw std::runtime_error("round " + std::to_string(t_) + ": client " + fleet_.clients[rec.selected[j]].id +
                               " failed: " + errors[j]);
    }
  }
  rec.losses = losses;

  std::vector<double> state, u, nbar;
  if (ctx_.policy == Policy::FedAvg) {
    rec.a = uniform(k);
  } else if (ctx_.policy == Policy::FixedWeights) {
    rec.a = cfg_.fixed_weights.empty() ? uniform(k) : cfg_.fixed_weights;
  } else {
    if (ctx_.policy == Policy::DearFsac) {
      std::vector<QualityReport> reports;
      for (const auto& w : uploads) reports.push_back(ctx_.qeen->report(w.values));
      for (const auto& r : reports) rec.marks.push_back(r.mark);
      nbar = normalize_marks(rec.marks);
      state = build_state(ctx_.qeen->encode(global_.values), reports, losses, a_prev_);
    } else {
      std::vector<std::vector<double>> raw;
      for (const auto& w : uploads) raw.push_back(w.values);
      state = build_state(global_.values, raw, losses, a_prev_);
    }
    if (ctx_.learn && ctx_.agent != nullptr) {
      ctx_.agent->observe_state(state);
      if (pending_) {
        pending_->s2 = state;
        ctx_.agent->push(std::move(*pending_));
        pending_.reset();
      }
      for (const auto& d : ctx_.agent->train_step(agent_rng_)) {
        if (ctx_.diagnostics != nullptr) write_diagnostics_jsonl(*ctx_.diagnostics, d);
      }
    }
    if (ctx_.force_uniform) {
      rec.a = uniform(k);
      u.assign(k, 0.0);
    } else {
      ActionSample s = ctx_.agent->act(state, !ctx_.learn, agent_rng_);
      rec.a = std::move(s.a);
      u = std::move(s.u);
    }
  }

  global_ = aggregate(rec.a, uploads);
  {
    ForecastModel g = model_from(global_, cfg_.hidden);
    rec.delta = validation_mape(g, fleet_.dv) / 100.0;
  }
  if (ctx_.policy == Policy::DearFsac) {
    rec.reward = compute_reward(ctx_.reward, rec.delta, nbar, rec.a);
  } else if (ctx_.policy == Policy::SacWithoutQeen) {
    rec.reward = accuracy_reward(ctx_.reward, rec.delta);
  }
  if (ctx_.learn && ctx_.agent != nullptr && rec.reward) {
    pending_ = Transition{std::move(state), std::move(u), *rec.reward, {}};
  }
  a_prev_ = rec.a;
  ++t_;
  rec.seconds = seconds_since(t0);
  return rec;
}

RunResult run_federated(const FedConfig& cfg, const Fleet& fleet, std::uint64_t seed, PolicyContext ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  out.policy = ctx.policy;
  out.seed = seed;
  Federation fed(cfg, fleet, seed, ctx);
  for (std::size_t t = 0; t < cfg.rounds; ++t) out.records.push_back(fed.run_round());
  out.final_model = fed.global();
  out.metrics = fed.test();
  out.seconds = seconds_since(t0);
  return out;
}

RunResult run_centralized(const FedConfig& cfg, const ClConfig& cl, const Fleet& fleet, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  out.policy = Policy::ClLstm;
  out.seed = seed;
  ForecastModel model = model_from(initial_global(cfg.hidden, cfg.init_seed), cfg.hidden);
  WindowSet clean_pool, defect_pool;
  for (const auto& c : fleet.clients) {
    clean_pool.insert(clean_pool.end(), c.clean_windows().begin(), c.clean_windows().end());
    defect_pool.insert(defect_pool.end(), c.train_windows.begin(), c.train_windows.end());
  }
  const LocalTrainConfig tc{1, cl.lr, cl.batch_size, cfg.local.clip_norm};
  for (std::size_t e = 0; e < cl.epochs; ++e) {
    const auto te = std::chrono::steady_clock::now();
    Rng rng = make_rng(seed, "cl", {e});
    const bool defect_epoch = std::bernoulli_distribution(cl.defect_prob)(rng);
    const bool dia = defect_epoch && cfg.defects.has_dia();
    RoundRecord rec;
    rec.t = e;
    rec.losses = {train_local(model, dia ? defect_pool : clean_pool, tc, rng).loss};
    if (defect_epoch && cfg.defects.has_noise()) {
      for (Parameter* p : model.params()) inject_comm_noise_inplace(p->value.storage(), cfg.defects.snr_db);
    }
    rec.delta = validation_mape(model, fleet.dv) / 100.0;
    rec.seconds = seconds_since(te);
    out.records.push_back(std::move(rec));
  }
  out.final_model = model.flatten();
  out.metrics = test_metrics(out.final_model, cfg.hidden, fleet);
  out.seconds = seconds_since(t0);
  return out;
}

std::vector<MarkedModel> build_qeen_corpus(const FedConfig& cfg, const CorpusConfig& corpus, const Fleet& fleet,
                                           std::uint64_t seed) {
  if (corpus.snapshot_every == 0) throw std::invalid_argument("snapshot_every must be >= 1");
  const std::size_t n = fleet.size();
  ModelParams global = initial_global(cfg.hidden, cfg.init_seed);
  std::vector<MarkedModel> out;
  auto mark = [&](ModelParams w, bool defective) {
    const double m = defect_mark(w, cfg.hidden, fleet.dv);
    out.push_back({std::move(w.values), m, defective});
  };
  for (std::size_t t = 0; t < corpus.warmup_rounds; ++t) {
    std::vector<ModelParams> uploads(n);
    for (std::size_t i = 0; i < n; ++i) {
      ForecastModel m = model_from(global, cfg.hidden);
      Rng rng = make_rng(seed, "corpus-local", {t, i});
      train_local(m, fleet.clients[i].clean_windows(), cfg.local, rng);
      uploads[i] = m.flatten();
    }
    if (t >= corpus.first_snapshot && (t + 1) % corpus.snapshot_every == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(seed, "corpus-defect", {t, i});
        std::uniform_real_distribution<double> snr(corpus.snr_lo, corpus.snr_hi);
        std::uniform_real_distribution<double> dk(corpus.dia_k_lo, corpus.dia_k_hi);
        std::uniform_real_distribution<double> dmu(corpus.dia_mu_lo, corpus.dia_mu_hi);
        std::uniform_real_distribution<double> dsig(corpus.dia_sigma_lo, corpus.dia_sigma_hi);
        mark(uploads[i], false);
        mark(inject_comm_noise(uploads[i], snr(rng)), true);
        const double k = dk(rng), mu = dmu(rng), sigma = dsig(rng);
        std::vector<LoadDataset> poisoned;
        for (const auto& s : fleet.clients[i].seasons) poisoned.push_back(inject_dia(s.train, k, mu, sigma, rng));
        ForecastModel m = model_from(global, cfg.hidden);
        train_local(m, client_train_windows(poisoned, cfg.window), cfg.local, rng);
        ModelParams dia = m.flatten();
        mark(inject_comm_noise(dia, snr(rng)), true);
        mark(std::move(dia), true);
      }
    }
    global = aggregate(uniform(n), uploads);
  }
  return out;
}

}  // namespace dearfed
