#include "dearfed/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "dearfed/timeutil.hpp"

namespace dearfed {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::III: return "III";
    case Scenario::IV: return "IV";
  }
  return "I";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "I" || s == "1") return Scenario::I;
  if (s == "II" || s == "2") return Scenario::II;
  if (s == "III" || s == "3") return Scenario::III;
  if (s == "IV" || s == "4") return Scenario::IV;
  throw std::invalid_argument("unknown scenario '" + s + "' (expected I, II, III or IV)");
}

DefectKind defect_kind_for(Scenario s) {
  switch (s) {
    case Scenario::I: return DefectKind::None;
    case Scenario::II: return DefectKind::Dia;
    case Scenario::III: return DefectKind::CommNoise;
    case Scenario::IV: return DefectKind::Mixed;
  }
  return DefectKind::None;
}

void ExperimentConfig::sync_scenario() { fed.defects.kind = defect_kind_for(scenario); }

nlohmann::json apply_overrides(nlohmann::json j, const ConfigOverrides& o) {
  if (!j.is_object()) throw std::invalid_argument("config root must be an object");
  if (o.seed) j["seed"] = *o.seed;
  if (!o.out_dir.empty()) j["out_dir"] = o.out_dir;
  if (!o.scenario.empty()) j["scenario"] = o.scenario;
  if (!o.policies.empty()) {
    j.erase("policy");
    j["policies"] = o.policies;
  }
  return j;
}

std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t s) { return cfg.seed + s; }

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and remembers which were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument("config section '" + name() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void get(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const std::string& key, std::uint64_t& out, int) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::filesystem::path& out) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = s;
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "must be an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(key, "must be an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  const json* sub(const std::string& key) { return take(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw std::invalid_argument("config key '" + qualified(key) + "' " + what);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw std::invalid_argument("unknown config key '" + qualified(it.key()) + "'");
    }
  }

 private:
  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string name() const { return path_.empty() ? "<root>" : path_; }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void with_section(Section& parent, const std::string& key, const std::string& path, F&& f) {
  if (const json* v = parent.sub(key)) {
    Section s(*v, path);
    f(s);
    s.finish();
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  Section root(j, "");

  std::string scenario = "I";
  root.get("scenario", scenario);
  try {
    cfg.scenario = scenario_from_string(scenario);
  } catch (const std::invalid_argument& e) {
    root.fail("scenario", e.what());
  }
  // Defect parameters must match the scenario's taxonomy.
  const bool dia_ok = cfg.scenario == Scenario::II || cfg.scenario == Scenario::IV;
  const bool snr_ok = cfg.scenario == Scenario::III || cfg.scenario == Scenario::IV;
  if (cfg.scenario == Scenario::I && root.has("p_m")) {
    throw std::invalid_argument("p_m not applicable to Scenario I");
  }
  for (const char* k : {"dia_k", "dia_mu", "dia_sigma"}) {
    if (!dia_ok && root.has(k)) {
      throw std::invalid_argument(std::string(k) + " not applicable to Scenario " + to_string(cfg.scenario));
    }
  }
  if (!snr_ok && root.has("snr_db")) {
    throw std::invalid_argument("SNR not applicable to Scenario " + to_string(cfg.scenario));
  }

  FedConfig& fed = cfg.fed;
  root.get("n_clients", fed.fleet.n_clients);
  root.get("p_k", fed.p_k);
  root.get("p_m", fed.defects.p_m);
  root.get("dia_k", fed.defects.dia_k);
  root.get("dia_mu", fed.defects.dia_mu);
  root.get("dia_sigma", fed.defects.dia_sigma);
  root.get("snr_db", fed.defects.snr_db);
  root.get("rounds", fed.rounds);
  root.get("fixed_weights", fed.fixed_weights);
  root.get("seeds", cfg.seeds);
  root.get("seed", cfg.seed, 0);
  root.get("out_dir", cfg.out_dir);

  if (root.has("policy") && root.has("policies")) root.fail("policy", "conflicts with 'policies'");
  if (root.has("policy")) {
    std::string p;
    root.get("policy", p);
    try {
      cfg.policies = {policy_from_string(p)};
    } catch (const std::invalid_argument& e) {
      root.fail("policy", e.what());
    }
  }
  if (const json* v = root.sub("policies")) {
    if (!v->is_array() || v->empty()) root.fail("policies", "must be a non-empty array of policy names");
    cfg.policies.clear();
    for (const auto& p : *v) {
      if (!p.is_string()) root.fail("policies", "must be a non-empty array of policy names");
      try {
        cfg.policies.push_back(policy_from_string(p.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        root.fail("policies", e.what());
      }
    }
  }

  with_section(root, "checkpoints", "checkpoints", [&](Section& s) {
    s.get("qeen", cfg.checkpoints.qeen);
    s.get("agent", cfg.checkpoints.agent);
    s.get("agent_raw", cfg.checkpoints.agent_raw);
  });
  with_section(root, "data", "data", [&](Section& s) {
    s.get("csv", cfg.data.csv);
    s.get("holidays", cfg.data.holidays);
    s.get("audit_csv", cfg.data.audit_csv);
  });
  with_section(root, "fleet", "fleet", [&](Section& s) {
    FleetSpec& f = fed.fleet;
    s.get("span_days", f.span_days);
    s.get("base_kw", f.base_kw);
    s.get("base_spread", f.base_spread);
    s.get("daily_amp", f.daily_amp);
    s.get("weekly_amp", f.weekly_amp);
    s.get("noise_frac", f.noise_frac);
    s.get("holiday_dip", f.holiday_dip);
    s.get("phase_jitter_h", f.phase_jitter_h);
    s.get("archetypes", f.archetypes);
    s.get("seed", f.seed, 0);
    std::string start;
    s.get("start", start);
    if (!start.empty()) {
      try {
        f.start = parse_iso_hour(start);
      } catch (const std::exception& e) {
        s.fail("start", e.what());
      }
    }
  });
  with_section(root, "lstm", "lstm", [&](Section& s) {
    s.get("hidden", fed.hidden);
    s.get("l_back", fed.window.l_back);
    s.get("l_ahead", fed.window.l_ahead);
    s.get("lr", fed.local.lr);
    s.get("epochs", fed.local.epochs);
    s.get("batch_size", fed.local.batch_size);
    s.get("clip_norm", fed.local.clip_norm);
    s.get("init_seed", fed.init_seed, 0);
  });
  with_section(root, "qeen", "qeen", [&](Section& s) {
    QeenConfig& q = cfg.qeen;
    s.get("e_dim", q.e_dim);
    s.get("enc_hidden", q.enc_hidden);
    s.get("qe_hidden", q.qe_hidden);
    s.get("lambda1", q.lambda1);
    s.get("lambda2", q.lambda2);
    s.get("lr", q.lr);
    s.get("epochs", q.epochs);
    s.get("batch_size", q.batch_size);
    s.get("clip_norm", q.clip_norm);
    with_section(s, "corpus", "qeen.corpus", [&](Section& c) {
      CorpusConfig& cc = cfg.corpus;
      c.get("warmup_rounds", cc.warmup_rounds);
      c.get("snapshot_every", cc.snapshot_every);
      c.get("first_snapshot", cc.first_snapshot);
      c.get("snr_lo", cc.snr_lo);
      c.get("snr_hi", cc.snr_hi);
      c.get("dia_k_lo", cc.dia_k_lo);
      c.get("dia_k_hi", cc.dia_k_hi);
      c.get("dia_mu_lo", cc.dia_mu_lo);
      c.get("dia_mu_hi", cc.dia_mu_hi);
      c.get("dia_sigma_lo", cc.dia_sigma_lo);
      c.get("dia_sigma_hi", cc.dia_sigma_hi);
    });
  });
  with_section(root, "sac", "sac", [&](Section& s) {
    SacConfig& a = cfg.sac;
    s.get("hidden", a.hidden);
    s.get("lr", a.lr);
    s.get("gamma", a.gamma);
    s.get("rho", a.rho);
    s.get("batch", a.batch);
    s.get("updates_per_step", a.updates_per_step);
    s.get("warmup", a.warmup);
    s.get("buffer", a.replay.capacity);
    s.get("per_alpha", a.replay.alpha);
    s.get("per_beta", a.replay.beta);
    s.get("per_eps", a.replay.eps);
    s.get("ere_eta", a.replay.eta);
    s.get("ere_c_min", a.replay.c_min);
    s.get("auto_entropy", a.auto_entropy);
    s.get("init_alpha", a.init_alpha);
    s.get("target_entropy_scale", a.target_entropy_scale);
    s.get("softmax_temperature", a.softmax_temperature);
    s.get("log_std_min", a.log_std_min);
    s.get("log_std_max", a.log_std_max);
    s.get("clip_norm", a.clip_norm);
    s.get("normalize_obs", a.normalize_obs);
    s.get("kappa", cfg.reward.kappa);
    s.get("target_mape", cfg.reward.target_mape);
    s.get("beta1", cfg.reward.beta1);
    s.get("beta2", cfg.reward.beta2);
    s.get("episodes", cfg.agent.episodes);
    s.get("train_rounds", cfg.agent.rounds);
    std::string train_scenario = to_string(cfg.agent.scenario);
    s.get("train_scenario", train_scenario);
    try {
      cfg.agent.scenario = scenario_from_string(train_scenario);
    } catch (const std::invalid_argument& e) {
      s.fail("train_scenario", e.what());
    }
  });
  with_section(root, "cl", "cl", [&](Section& s) {
    s.get("epochs", cfg.cl.epochs);
    s.get("defect_prob", cfg.cl.defect_prob);
    s.get("lr", cfg.cl.lr);
    s.get("batch_size", cfg.cl.batch_size);
  });
  root.finish();

  cfg.sync_scenario();
  if (cfg.seeds == 0) root.fail("seeds", "must be >= 1");
  if (cfg.sac.replay.capacity == 0) throw std::invalid_argument("config key 'sac.buffer' must be >= 1");
  if (!(cfg.cl.defect_prob >= 0.0 && cfg.cl.defect_prob <= 1.0)) {
    throw std::invalid_argument("config key 'cl.defect_prob' must lie in [0, 1]");
  }
  cfg.fed.validate();
  cfg.sac.validate();
  cfg.reward.validate();
  return cfg;
}

nlohmann::json read_config_json(const std::filesystem::path& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_config_json(path)); }

}  // namespace dearfed
