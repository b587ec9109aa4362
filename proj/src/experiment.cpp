#include "dearfed/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dearfed {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<DayStamp> holiday_calendar(const ExperimentConfig& cfg) {
  return cfg.data.holidays.empty() ? std::vector<DayStamp>{} : load_holidays_json(cfg.data.holidays);
}

std::vector<LoadDataset> load_csv_source(const ExperimentConfig& cfg) {
  return load_csv(cfg.data.csv, holiday_calendar(cfg));
}

// Splits CSV clients into federation members and the audit medoids.
std::pair<std::vector<LoadDataset>, std::vector<LoadDataset>> split_audit(std::vector<LoadDataset> all,
                                                                          const ExperimentConfig& cfg) {
  const std::size_t k = cfg.fed.fleet.archetypes;
  if (all.size() <= k) {
    throw std::invalid_argument("CSV has " + std::to_string(all.size()) + " clients; need more than " +
                                std::to_string(k) + " (one audit client per archetype is held out)");
  }
  std::vector<std::vector<double>> feats;
  for (const auto& d : all) feats.push_back(daily_profile_feature(d));
  const KMeansResult km = kmeans_features(feats, k, 100, derive_seed(cfg.fed.fleet.seed, "audit-kmeans"));
  std::vector<std::size_t> medoid(k, all.size());
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto c = static_cast<std::size_t>(km.labels[i]);
    double d2 = 0.0;
    for (std::size_t j = 0; j < feats[i].size(); ++j) {
      d2 += (feats[i][j] - km.centroids[c][j]) * (feats[i][j] - km.centroids[c][j]);
    }
    if (d2 < best[c]) {
      best[c] = d2;
      medoid[c] = i;
    }
  }
  std::vector<LoadDataset> members, audit;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (std::find(medoid.begin(), medoid.end(), i) != medoid.end() ? audit : members).push_back(std::move(all[i]));
  }
  return {std::move(members), std::move(audit)};
}

FedConfig resolved_fed(const ExperimentConfig& cfg) {
  FedConfig fed = cfg.fed;
  if (!cfg.data.csv.empty()) {
    const std::size_t n = load_csv_source(cfg).size();
    fed.fleet.n_clients = cfg.data.audit_csv.empty() ? n - std::min(n, fed.fleet.archetypes) : n;
  }
  return fed;
}

std::size_t agent_state_dim(Policy p, const FedConfig& fed, const ExperimentConfig& cfg) {
  std::size_t d = 0;
  for (const auto& e : ForecastModel::layout_for(fed.hidden)) d += e.size();
  return state_dim(fed.k(), p == Policy::DearFsac ? cfg.qeen.e_dim : d);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string policy_file_tag(Policy p) { return p == Policy::DearFsac ? "agent_dearfsac" : "agent_sac_without_qeen"; }

}  // namespace

Fleet make_fleet(const ExperimentConfig& cfg, FedConfig& fed, std::uint64_t seed) {
  if (cfg.data.csv.empty()) return prepare_fleet(fed, seed);
  if (!cfg.data.audit_csv.empty()) {
    auto members = load_csv_source(cfg);
    fed.fleet.n_clients = members.size();
    return prepare_fleet(members, load_csv(cfg.data.audit_csv, holiday_calendar(cfg)), fed, seed);
  }
  auto [members, audit] = split_audit(load_csv_source(cfg), cfg);
  fed.fleet.n_clients = members.size();
  return prepare_fleet(members, audit, fed, seed);
}

QeenModel make_qeen(const ExperimentConfig& cfg) {
  Rng rng = make_rng(cfg.seed, "qeen-init");
  return QeenModel(ForecastModel::layout_for(cfg.fed.hidden), cfg.qeen, rng);
}

QeenPretraining pretrain_qeen(const ExperimentConfig& cfg, std::ostream& log) {
  FedConfig fed = cfg.fed;
  fed.defects.kind = DefectKind::None;
  const Fleet fleet = make_fleet(cfg, fed, derive_seed(cfg.seed, "qeen-fleet"));
  log << "qeen: building corpus (" << cfg.corpus.warmup_rounds << " warm-up rounds, " << fleet.size()
      << " clients)" << std::endl;
  const auto corpus = build_qeen_corpus(fed, cfg.corpus, fleet, derive_seed(cfg.seed, "qeen-corpus"));
  if (corpus.empty()) throw std::invalid_argument("QEEN corpus is empty; check qeen.corpus snapshot settings");
  QeenPretraining out{make_qeen(cfg), {}, corpus.size()};
  Rng rng = make_rng(cfg.seed, "qeen-train");
  out.history = train_qeen(out.model, corpus, rng);
  log << "qeen: " << corpus.size() << " models, final joint loss " << format_number(out.history.back().joint)
      << std::endl;
  return out;
}

SacAgent train_agent(const ExperimentConfig& cfg, Policy policy, QeenModel* qeen, std::ostream& log,
                     std::ostream* diag) {
  if (!uses_agent(policy)) throw std::invalid_argument(to_string(policy) + " has no agent to train");
  ExperimentConfig tc = cfg;
  tc.scenario = cfg.agent.scenario;
  tc.sync_scenario();
  if (cfg.agent.rounds > 0) tc.fed.rounds = cfg.agent.rounds;
  FedConfig fed = resolved_fed(tc);
  SacAgent agent(agent_state_dim(policy, fed, cfg), fed.k(), cfg.sac,
                 derive_seed(cfg.seed, "agent", {static_cast<std::uint64_t>(policy)}));
  for (std::size_t e = 0; e < cfg.agent.episodes; ++e) {
    const std::uint64_t seed = derive_seed(cfg.seed, "agent-episode", {e});
    const Fleet fleet = make_fleet(tc, fed, seed);
    PolicyContext ctx;
    ctx.policy = policy;
    ctx.qeen = qeen;
    ctx.agent = &agent;
    ctx.learn = true;
    ctx.reward = cfg.reward;
    ctx.agent_seed = derive_seed(seed, "agent-act");
    ctx.diagnostics = diag;
    const RunResult r = run_federated(fed, fleet, seed, ctx);
    double reward = 0.0;
    for (const auto& rec : r.records) reward += rec.reward.value_or(0.0);
    log << to_string(policy) << " agent: episode " << e + 1 << "/" << cfg.agent.episodes << " test MAPE "
        << format_number(r.metrics.mape) << " mean reward " << format_number(reward / r.records.size())
        << " alpha " << format_number(agent.alpha()) << std::endl;
  }
  return agent;
}

void ensure_artifacts(const ExperimentConfig& cfg, Artifacts& art, std::ostream& log) {
  const auto wants = [&](Policy p) { return std::find(cfg.policies.begin(), cfg.policies.end(), p) != cfg.policies.end(); };
  const bool need_agent = wants(Policy::DearFsac);
  const bool need_raw = wants(Policy::SacWithoutQeen);
  const FedConfig fed = resolved_fed(cfg);

  if (need_agent && !art.qeen) {
    if (!cfg.checkpoints.qeen.empty()) {
      QeenModel q = make_qeen(cfg);
      q.from_params(load_params(cfg.checkpoints.qeen));
      art.qeen.emplace(std::move(q));
      log << "qeen: loaded " << cfg.checkpoints.qeen.string() << std::endl;
    } else {
      auto pre = pretrain_qeen(cfg, log);
      std::filesystem::create_directories(cfg.out_dir);
      save_params(cfg.out_dir / "qeen.dfs", pre.model.to_params());
      art.qeen.emplace(std::move(pre.model));
    }
  }

  auto ensure = [&](Policy p, std::optional<SacAgent>& slot, const std::filesystem::path& ckpt) {
    const std::size_t dim = agent_state_dim(p, fed, cfg);
    if (slot && slot->state_dim() == dim && slot->action_dim() == fed.k()) return;
    if (slot) log << to_string(p) << " agent: dimensions changed, retraining" << std::endl;
    if (!ckpt.empty()) {
      SacAgent a(dim, fed.k(), cfg.sac, 0);
      try {
        a.load(ckpt);
      } catch (const std::exception& e) {
        throw std::invalid_argument("checkpoint " + ckpt.string() + " does not fit this configuration: " + e.what());
      }
      slot.emplace(std::move(a));
      log << to_string(p) << " agent: loaded " << ckpt.string() << std::endl;
      return;
    }
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream diag(cfg.out_dir / (policy_file_tag(p) + "_updates.jsonl"));
    SacAgent a = train_agent(cfg, p, p == Policy::DearFsac ? &*art.qeen : nullptr, log, &diag);
    a.save(cfg.out_dir / (policy_file_tag(p) + ".dfs"));
    slot.emplace(std::move(a));
  };
  if (need_agent) ensure(Policy::DearFsac, art.agent, cfg.checkpoints.agent);
  if (need_raw) ensure(Policy::SacWithoutQeen, art.agent_raw, cfg.checkpoints.agent_raw);
}

const PolicySummary& ScenarioSummary::of(Policy p) const {
  for (const auto& s : policies) {
    if (s.policy == p) return s;
  }
  throw std::out_of_range("policy " + to_string(p) + " was not run");
}

ScenarioSummary run_scenario(const ExperimentConfig& cfg, Artifacts& art, std::ostream& log) {
  ensure_artifacts(cfg, art, log);
  ScenarioSummary summary;
  for (Policy p : cfg.policies) {
    summary.policies.emplace_back();
    summary.policies.back().policy = p;
  }

  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = run_seed(cfg, s);
    FedConfig fed = cfg.fed;
    const Fleet fleet = make_fleet(cfg, fed, seed);
    for (auto& ps : summary.policies) {
      RunResult r;
      if (ps.policy == Policy::ClLstm) {
        r = run_centralized(fed, cfg.cl, fleet, seed);
      } else {
        PolicyContext ctx;
        ctx.policy = ps.policy;
        ctx.qeen = art.qeen ? &*art.qeen : nullptr;
        ctx.agent = ps.policy == Policy::DearFsac ? (art.agent ? &*art.agent : nullptr)
                                                  : (art.agent_raw ? &*art.agent_raw : nullptr);
        ctx.reward = cfg.reward;
        ctx.agent_seed = derive_seed(seed, "eval-act");
        r = run_federated(fed, fleet, seed, ctx);
      }
      std::ostringstream rounds;
      for (const auto& rec : r.records) write_round_jsonl(rounds, rec);
      write_file_atomic(cfg.out_dir / "rounds" / (to_string(ps.policy) + "_seed" + std::to_string(seed) + ".jsonl"),
                        rounds.str());
      ps.seeds.push_back(seed);
      ps.runs.push_back(r.metrics);
      ps.seconds.push_back(r.seconds);
      log << "scenario " << to_string(cfg.scenario) << " " << to_string(ps.policy) << " seed " << seed << ": MAPE "
          << format_number(r.metrics.mape) << " RMSE " << format_number(r.metrics.rmse) << std::endl;
    }
  }

  std::ostringstream runs, table, timing;
  runs << "policy,seed,mape,rmse\n";
  table << "policy,mape_mean,mape_std,rmse_mean,rmse_std\n";
  timing << "policy,seed,seconds,seconds_per_round\n";
  for (auto& ps : summary.policies) {
    std::vector<double> m, r;
    for (std::size_t i = 0; i < ps.runs.size(); ++i) {
      m.push_back(ps.runs[i].mape);
      r.push_back(ps.runs[i].rmse);
      runs << to_string(ps.policy) << ',' << ps.seeds[i] << ',' << format_number(ps.runs[i].mape) << ','
           << format_number(ps.runs[i].rmse) << '\n';
      const double n_rounds = ps.policy == Policy::ClLstm ? cfg.cl.epochs : cfg.fed.rounds;
      timing << to_string(ps.policy) << ',' << ps.seeds[i] << ',' << format_number(ps.seconds[i]) << ','
             << format_number(ps.seconds[i] / n_rounds) << '\n';
    }
    ps.mape_mean = mean_of(m);
    ps.mape_std = sample_std(m);
    ps.rmse_mean = mean_of(r);
    ps.rmse_std = sample_std(r);
    table << to_string(ps.policy) << ',' << format_number(ps.mape_mean) << ',' << format_number(ps.mape_std) << ','
          << format_number(ps.rmse_mean) << ',' << format_number(ps.rmse_std) << '\n';
  }
  write_file_atomic(cfg.out_dir / "runs.csv", runs.str());
  write_file_atomic(cfg.out_dir / "summary.csv", table.str());
  write_file_atomic(cfg.out_dir / "timing.csv", timing.str());
  return summary;
}

void apply_axis(ExperimentConfig& cfg, const std::string& axis, double value) {
  const Scenario s = cfg.scenario;
  const bool dia_ok = s == Scenario::II || s == Scenario::IV;
  const bool snr_ok = s == Scenario::III || s == Scenario::IV;
  auto need = [&](bool ok) {
    if (!ok) throw std::invalid_argument("sweep axis " + axis + " not applicable to Scenario " + to_string(s));
  };
  auto count = [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v)) throw std::invalid_argument("sweep axis " + axis + " needs whole numbers");
    return static_cast<std::size_t>(v);
  };
  if (axis == "p_m") {
    need(s != Scenario::I);
    cfg.fed.defects.p_m = value;
  } else if (axis == "dia_mu") {
    need(dia_ok);
    cfg.fed.defects.dia_mu = value;
  } else if (axis == "dia_sigma") {
    need(dia_ok);
    cfg.fed.defects.dia_sigma = value;
  } else if (axis == "dia_k") {
    need(dia_ok);
    cfg.fed.defects.dia_k = value;
  } else if (axis == "snr_db") {
    need(snr_ok);
    cfg.fed.defects.snr_db = value;
  } else if (axis == "n_clients") {
    cfg.fed.fleet.n_clients = count(value);
  } else if (axis == "p_k") {
    cfg.fed.p_k = value;
  } else {
    throw std::invalid_argument("unknown sweep axis '" + axis +
                                "' (expected p_m, dia_mu, dia_sigma, dia_k, snr_db, n_clients or p_k)");
  }
  cfg.fed.validate();
}

std::vector<ScenarioSummary> run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                                       const std::vector<double>& values, Artifacts& art, std::ostream& log) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  // Validate every point before running any.
  for (double v : values) {
    ExperimentConfig c = cfg;
    apply_axis(c, axis, v);
  }
  std::vector<ScenarioSummary> out;
  std::ostringstream csv;
  csv << "axis,value,policy,mape_mean,mape_std,rmse_mean,rmse_std\n";
  for (double v : values) {
    ExperimentConfig c = cfg;
    apply_axis(c, axis, v);
    c.out_dir = cfg.out_dir / (axis + "_" + format_number(v));
    // Artifacts trained at one point are reused when dimensions allow; any
    // newly trained ones are saved under the point's directory.
    out.push_back(run_scenario(c, art, log));
    for (const auto& ps : out.back().policies) {
      csv << axis << ',' << format_number(v) << ',' << to_string(ps.policy) << ',' << format_number(ps.mape_mean)
          << ',' << format_number(ps.mape_std) << ',' << format_number(ps.rmse_mean) << ','
          << format_number(ps.rmse_std) << '\n';
    }
  }
  write_file_atomic(cfg.out_dir / ("sweep_" + axis + ".csv"), csv.str());
  return out;
}

}  // namespace dearfed
