// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
// below. Usage: acceptance [output-dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dearfed/config.hpp"
#include "dearfed/experiment.hpp"
#include "dearfed/fed.hpp"
#include "dearfed/forecast.hpp"
#include "dearfed/qeen.hpp"
#include "dearfed/replay.hpp"
#include "dearfed/sac.hpp"

using namespace dearfed;
namespace fs = std::filesystem;

namespace {

// AC1
constexpr double kGradTol = 1e-4;
constexpr double kForecasterGradTol = 1e-3;
constexpr double kGradSeconds = 60.0;
// AC2
constexpr double kNoiseTol = 1e-15;
// AC3
constexpr std::size_t kEquivalenceRounds = 20;
// AC4
constexpr std::size_t kSimplexStates = 10000;
constexpr double kSimplexTol = 1e-12;
// AC5
constexpr std::size_t kPerDraws = 100000;
constexpr double kPerTol = 0.02;
// AC6
constexpr double kCleanMape = 5.0;
constexpr double kCleanCpuSeconds = 600.0;
// AC7
constexpr double kFedAvgDegradation = 2.0;
constexpr double kDearfsacDegradation = 1.5;
constexpr double kDearfsacVsFedAvg = 0.5;
constexpr double kRobustCpuSeconds = 1800.0;
// AC8
constexpr std::size_t kHeldOutPerClass = 200;
constexpr double kMinAuc = 0.9;
// AC9
const std::vector<double> kPmSweep = {0.2, 0.5, 0.8};
constexpr double kDearfsacSpread = 0.5;

struct Result {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void report(const std::string& id, const std::string& title, const Result& r) {
  std::cout << id << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << title << ": " << r.detail << std::endl;
}

// ---------------------------------------------------------------------------

Result ac1_gradients() {
  const double start = cpu_seconds();
  std::map<std::string, double> err;

  {
    Rng rng(21);
    const std::size_t H = 8;
    Parameter w_ih("w_ih", random_tensor(5, 4 * H, rng, -0.5, 0.5));
    Parameter w_hh("w_hh", random_tensor(H, 4 * H, rng, -0.5, 0.5));
    Parameter b("b", random_tensor(1, 4 * H, rng, -0.5, 0.5));
    const Tensor x = random_tensor(3, 5, rng, -1, 1), h0 = random_tensor(3, H, rng, -1, 1),
                 c0 = random_tensor(3, H, rng, -1, 1);
    err["lstm_cell"] = grad_check(
        [&](Graph& g) {
          auto out = lstm_cell(g, g.constant(x), g.constant(h0), g.constant(c0), g.param(w_ih), g.param(w_hh),
                               g.param(b), H);
          return g.add(g.sum(g.square(out.h)), g.mean(out.c));
        },
        {&w_ih, &w_hh, &b});
  }

  {
    QeenConfig qc;
    qc.e_dim = 6;
    qc.enc_hidden = 12;
    qc.qe_hidden = 6;
    Rng rng(3);
    QeenModel q(ForecastModel::layout_for(3), qc, rng);
    std::vector<MarkedModel> corpus(6);
    std::normal_distribution<double> z(0.0, 0.5);
    for (auto& m : corpus) {
      m.w.resize(q.dim());
      for (double& v : m.w) v = z(rng);
      m.mark = std::abs(z(rng));
    }
    q.fit_input_stats(corpus);
    std::vector<const std::vector<double>*> ws;
    Tensor marks = Tensor::zeros(corpus.size(), 1);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      ws.push_back(&corpus[i].w);
      marks[i] = corpus[i].mark;
    }
    const Tensor x = q.standardize(ws);
    err["qeen"] = grad_check(
        [&](Graph& g) {
          Var xv = g.constant(x);
          Var e = q.encode(g, xv);
          return g.add(g.scale(g.mse(q.decode(g, e), xv), qc.lambda1),
                       g.scale(g.mse(q.quality(g, e), g.constant(marks)), qc.lambda2));
        },
        q.params());
  }

  {
    SacConfig sc;
    sc.hidden = 16;
    const std::size_t ds = 7, k = 3;
    SacAgent agent(ds, k, sc, 5);
    Rng rng(6);
    const Tensor s = random_tensor(4, ds, rng, -1, 1);
    const Tensor eps = random_tensor(4, k, rng, -1, 1);
    const Tensor u = random_tensor(4, k, rng, -0.9, 0.9);
    // Reparameterized actor objective through a critic, as in the update.
    err["actor"] = grad_check(
        [&](Graph& g) {
          auto [mu, log_std] = agent.actor_forward(g, g.constant(s));
          Var zs = g.add(mu, g.mul(g.exp(log_std), g.constant(eps)));
          Var us = g.tanh(zs);
          Var logp = g.row_sum(g.scale(log_std, -1.0));
          Var q = agent.critic_forward(g, 0, g.constant(s), us);
          return g.mean(g.sub(g.scale(logp, 0.1), q));
        },
        agent.actor_params());
    const Tensor target = random_tensor(4, 1, rng, -1, 1);
    for (int c = 0; c < 2; ++c) {
      err["critic" + std::to_string(c + 1)] = grad_check(
          [&](Graph& g) { return g.mse(agent.critic_forward(g, c, g.constant(s), g.constant(u)), g.constant(target)); },
          agent.critic_params(c));
    }
  }

  double forecaster = 0.0;
  {
    FleetSpec spec;
    spec.n_clients = 1;
    const auto data = generate_fleet(spec)[0].slice(0, 24 + 3);
    const WindowSet ws = build_windows(data, WindowingConfig{24, 1});
    Rng rng(7);
    ForecastModel m(16, rng);
    std::vector<const FeatureWindow*> batch;
    Tensor y = Tensor::zeros(ws.size(), 1);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      batch.push_back(&ws[i]);
      y[i] = ws[i].target_norm;
    }
    forecaster = grad_check([&](Graph& g) { return g.mse(m.forward(g, batch), g.constant(y)); }, m.params());
  }

  const double secs = cpu_seconds() - start;
  bool pass = forecaster < kForecasterGradTol && secs < kGradSeconds;
  std::string detail;
  for (const auto& [name, e] : err) {
    pass = pass && e < kGradTol;
    detail += name + " " + num(e, 3) + ", ";
  }
  detail += "forecaster(h16,w24) " + num(forecaster, 3) + "; limits " + num(kGradTol) + "/" + num(kForecasterGradTol) +
            "; " + num(secs, 3) + " s";
  return {pass, detail};
}

Result ac2_noise() {
  std::vector<double> one{1.0};
  inject_comm_noise_inplace(one, 0.0);
  bool pass = one[0] == 2.0;
  double worst = 0.0;
  Rng rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  for (double snr : {0.0, 5.0, 10.0, 20.0, 30.0, 40.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      ModelParams w;
      w.values.resize(1000);
      for (double& v : w.values) v = z(rng);
      const ModelParams n = inject_comm_noise(w, snr);
      double dn = 0.0, wn = 0.0;
      for (std::size_t i = 0; i < w.dim(); ++i) {
        dn += (n.values[i] - w.values[i]) * (n.values[i] - w.values[i]);
        wn += w.values[i] * w.values[i];
      }
      worst = std::max(worst, std::abs(std::sqrt(dn / wn) - std::pow(10.0, -snr / 10.0)));
    }
  }
  pass = pass && worst <= kNoiseTol;
  return {pass, "noise(1.0, 0 dB) = " + num(one[0], 17) + ", max |ratio - 10^(-SNR/10)| = " + num(worst, 3) +
                    " (tol " + num(kNoiseTol) + ")"};
}

Result ac3_equivalence(const ExperimentConfig& base, Artifacts& art) {
  ExperimentConfig cfg = base;
  cfg.scenario = Scenario::IV;
  cfg.sync_scenario();
  FedConfig fed = cfg.fed;
  fed.rounds = kEquivalenceRounds;
  const std::uint64_t seed = 1234;
  const Fleet fleet = make_fleet(cfg, fed, seed);
  PolicyContext avg;
  PolicyContext forced;
  forced.policy = Policy::DearFsac;
  forced.qeen = &*art.qeen;
  forced.agent = &*art.agent;
  forced.force_uniform = true;
  Federation a(fed, fleet, seed, avg), b(fed, fleet, seed, forced);
  std::size_t identical = 0;
  for (std::size_t t = 0; t < kEquivalenceRounds; ++t) {
    a.run_round();
    b.run_round();
    identical += a.global().values == b.global().values;
  }
  return {identical == kEquivalenceRounds,
          std::to_string(identical) + "/" + std::to_string(kEquivalenceRounds) +
              " rounds with bit-identical global models (Scenario IV)"};
}

Result ac4_simplex(SacAgent& agent, const RewardConfig& rc) {
  Rng rng(17);
  std::normal_distribution<double> z(0.0, 3.0);
  std::uniform_real_distribution<double> delta(rc.target_mape, 1.0), u(0.0, 1.0);
  const double lo = -rc.beta1 * (1.0 - 1.0 / rc.kappa) - rc.beta2;
  double worst_sum = 0.0, r_min = 0.0, r_max = -1e300;
  std::size_t bad_entries = 0;
  std::vector<double> s(agent.state_dim());
  for (std::size_t i = 0; i < kSimplexStates; ++i) {
    for (double& v : s) v = z(rng);
    const auto act = agent.act(s, i % 2 == 1, rng);
    double sum = 0.0;
    for (double v : act.a) {
      sum += v;
      bad_entries += !(v >= 0.0 && v <= 1.0);
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    std::vector<double> marks(act.a.size());
    for (double& m : marks) m = u(rng);
    const double r = compute_reward(rc, delta(rng), normalize_marks(marks), act.a);
    r_min = std::min(r_min, r);
    r_max = std::max(r_max, r);
  }
  const bool pass = worst_sum <= kSimplexTol && bad_entries == 0 && r_min >= lo && r_max <= 0.0;
  return {pass, std::to_string(kSimplexStates) + " states: max |sum a - 1| = " + num(worst_sum, 3) +
                    ", rewards in [" + num(r_min) + ", " + num(r_max) + "] within [" + num(lo) + ", 0]"};
}

Result ac5_per() {
  double worst = 0.0;
  {
    ReplayConfig cfg;
    cfg.capacity = 2;
    cfg.alpha = 1.0;
    ReplayBuffer b(cfg);
    for (int i = 0; i < 2; ++i) b.push(Transition{{0.0}, {0.0}, 0.0, {0.0}});
    b.set_priority(0, 3.0);
    b.set_priority(1, 1.0);
    Rng rng(1);
    double first = 0.0;
    for (std::size_t i = 0; i < kPerDraws; ++i) first += b.sample(1, rng).ids[0] == 0;
    worst = std::max(worst, std::abs(first / kPerDraws - 0.75));
  }
  {
    ReplayConfig cfg;
    cfg.capacity = 10;
    ReplayBuffer b(cfg);
    std::vector<double> expect(10);
    double total = 0.0;
    for (int i = 0; i < 10; ++i) {
      b.push(Transition{{0.0}, {0.0}, 0.0, {0.0}});
      b.set_priority(static_cast<std::size_t>(i), i + 1.0);
      total += expect[static_cast<std::size_t>(i)] = std::pow(i + 1.0, cfg.alpha);
    }
    Rng rng(2);
    std::vector<double> counts(10, 0.0);
    for (std::size_t i = 0; i < kPerDraws; ++i) counts[b.sample(1, rng).ids[0]] += 1.0;
    for (std::size_t i = 0; i < 10; ++i) worst = std::max(worst, std::abs(counts[i] / kPerDraws - expect[i] / total));
  }
  return {worst <= kPerTol, "max frequency error " + num(worst, 3) + " over " + std::to_string(kPerDraws) +
                                " draws (two-item 3:1 with alpha 1; ten-item 1..10 with alpha 0.6); tol " +
                                num(kPerTol)};
}

// AC8: held-out marked models from a different fleet and different rounds
// than the encoder's training corpus.
Result ac8_separability(const ExperimentConfig& base, QeenModel& qeen) {
  ExperimentConfig cfg = base;
  FedConfig fed = cfg.fed;
  fed.defects.kind = DefectKind::None;
  const std::uint64_t seed = derive_seed(cfg.seed, "held-out");
  const Fleet fleet = make_fleet(cfg, fed, seed);
  CorpusConfig cc = cfg.corpus;
  cc.snapshot_every = 6;
  cc.first_snapshot = 0;
  const auto corpus = build_qeen_corpus(fed, cc, fleet, derive_seed(seed, "corpus"));
  std::vector<const MarkedModel*> clean, defective;
  for (const auto& m : corpus) (m.defective ? defective : clean).push_back(&m);
  Rng pick(derive_seed(seed, "subsample"));
  std::shuffle(defective.begin(), defective.end(), pick);
  if (clean.size() < kHeldOutPerClass || defective.size() < kHeldOutPerClass) {
    return {false, "held-out corpus too small: " + std::to_string(clean.size()) + " clean, " +
                       std::to_string(defective.size()) + " defective"};
  }
  clean.resize(kHeldOutPerClass);
  defective.resize(kHeldOutPerClass);
  std::vector<double> scores, oracle;
  std::vector<bool> labels;
  double mean_clean = 0.0, mean_bad = 0.0;
  for (const auto* set : {&clean, &defective}) {
    for (const MarkedModel* m : *set) {
      const double n = qeen.report(m->w).mark;
      scores.push_back(n);
      oracle.push_back(m->mark);
      labels.push_back(m->defective);
      (m->defective ? mean_bad : mean_clean) += n / kHeldOutPerClass;
    }
  }
  const double auc = roc_auc(scores, labels);
  return {auc >= kMinAuc, "AUC " + num(auc) + " on " + std::to_string(kHeldOutPerClass) + "+" +
                              std::to_string(kHeldOutPerClass) + " held-out models (min " + num(kMinAuc) +
                              "); mean predicted mark clean " + num(mean_clean, 3) + ", defective " +
                              num(mean_bad, 3) + "; ground-truth-mark AUC " + num(roc_auc(oracle, labels))};
}

// AC10: a reduced end-to-end pipeline (encoder, both agents, all policies)
// run twice; every output file but timing.csv must match byte for byte.
Result ac10_determinism(const fs::path& root) {
  const nlohmann::json j = {
      {"scenario", "IV"},
      {"n_clients", 8},
      {"rounds", 4},
      {"seeds", 2},
      {"lstm", {{"hidden", 8}}},
      {"qeen", {{"e_dim", 8}, {"enc_hidden", 16}, {"qe_hidden", 8}, {"epochs", 3}, {"corpus", {{"warmup_rounds", 4}, {"snapshot_every", 2}}}}},
      {"sac", {{"hidden", 16}, {"batch", 8}, {"warmup", 8}, {"ere_c_min", 8}, {"episodes", 3}, {"train_rounds", 4}}},
      {"cl", {{"epochs", 2}}},
      {"policies", {"cl_lstm", "fedavg", "sac_without_qeen", "dearfsac"}}};
  std::vector<fs::path> dirs = {root / "ac10_a", root / "ac10_b"};
  std::ostringstream log;
  for (const auto& d : dirs) {
    fs::remove_all(d);
    ExperimentConfig cfg = parse_config(j);
    cfg.out_dir = d;
    Artifacts art;
    run_scenario(cfg, art, log);
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file() || e.path().filename() == "timing.csv") continue;
    const fs::path rel = fs::relative(e.path(), dirs[0]);
    ++compared;
    if (!fs::exists(dirs[1] / rel) || slurp(e.path()) != slurp(dirs[1] / rel)) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ" +
              (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

Result ac11_timing(const std::vector<fs::path>& dirs) {
  std::map<std::string, std::pair<double, int>> per_round;
  std::size_t rows = 0;
  bool ok = true;
  for (const auto& d : dirs) {
    std::ifstream in(d / "timing.csv");
    std::string line;
    if (!std::getline(in, line) || line != "policy,seed,seconds,seconds_per_round") {
      ok = false;
      continue;
    }
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string policy, seed, secs, spr;
      std::getline(ss, policy, ',');
      std::getline(ss, seed, ',');
      std::getline(ss, secs, ',');
      std::getline(ss, spr, ',');
      const double v = std::stod(spr);
      ok = ok && v > 0.0;
      per_round[policy].first += v;
      per_round[policy].second += 1;
      ++rows;
    }
  }
  std::string detail = "wall clock recorded for " + std::to_string(rows) + " runs, not compared to published figures;";
  for (const auto& [p, v] : per_round) detail += " " + p + " " + num(v.first / v.second, 3) + " s/round";
  return {ok && rows > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(root);
  std::map<int, std::pair<std::string, Result>> results;
  auto record = [&](int n, const std::string& title, const std::function<Result()>& f) {
    Result r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    results[n] = {title, r};
    report("AC" + std::to_string(n), title, r);
  };

  record(1, "gradient checks", ac1_gradients);
  record(2, "communication noise is exact", ac2_noise);
  record(5, "prioritized replay frequencies", ac5_per);
  record(10, "byte-identical re-runs", [&] { return ac10_determinism(root); });

  // Desk defaults; the agent trains on Scenario IV episodes.
  ExperimentConfig base = parse_config(nlohmann::json::object());
  base.policies = {Policy::FedAvg, Policy::DearFsac};
  base.out_dir = root / "artifacts";
  // Always retrain: AC7's CPU budget includes training.
  fs::remove_all(base.out_dir);
  Artifacts art;
  const double train_start = cpu_seconds();
  bool have_artifacts = true;
  try {
    ensure_artifacts(base, art, std::cerr);
  } catch (const std::exception& e) {
    have_artifacts = false;
    std::cerr << "training failed: " << e.what() << std::endl;
  }
  const double train_cpu = cpu_seconds() - train_start;

  if (have_artifacts) {
    record(3, "forced-uniform agent pipeline equals FedAvg", [&] { return ac3_equivalence(base, art); });
    record(4, "simplex actions and reward bounds", [&] { return ac4_simplex(*art.agent, base.reward); });
  } else {
    results[3] = {"forced-uniform agent pipeline equals FedAvg", {false, "no trained artifacts"}};
    results[4] = {"simplex actions and reward bounds", {false, "no trained artifacts"}};
  }

  // Scenario I: FedAvg and DearFSAC over the default seeds.
  ScenarioSummary clean;
  double clean_cpu = 0.0;
  bool have_clean = false;
  if (have_artifacts) {
    try {
      ExperimentConfig c1 = base;
      c1.out_dir = root / "scenario_I";
      const double t0 = cpu_seconds();
      clean = run_scenario(c1, art, std::cerr);
      clean_cpu = cpu_seconds() - t0;
      have_clean = true;
    } catch (const std::exception& e) {
      std::cerr << "scenario I failed: " << e.what() << std::endl;
    }
  }
  record(6, "defect-free FedAvg", [&]() -> Result {
    if (!have_clean) return {false, "scenario I run failed"};
    const auto& f = clean.of(Policy::FedAvg);
    double secs = 0.0;
    for (double s : f.seconds) secs += s;
    return {f.mape_mean < kCleanMape && secs < kCleanCpuSeconds,
            "test MAPE " + num(f.mape_mean) + " +- " + num(f.mape_std) + " % over " + std::to_string(f.runs.size()) +
                " seeds (limit " + num(kCleanMape) + "), " + num(secs, 3) + " s of FedAvg training"};
  });

  // Scenario IV p_M sweep; its p_M = 0.2 point is the desk Scenario IV run.
  std::vector<ScenarioSummary> sweep;
  if (have_artifacts) {
    try {
      ExperimentConfig c4 = base;
      c4.scenario = Scenario::IV;
      c4.sync_scenario();
      c4.out_dir = root / "scenario_IV";
      sweep = run_sweep(c4, "p_m", kPmSweep, art, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "scenario IV sweep failed: " << e.what() << std::endl;
    }
  }
  record(7, "robustness under Scenario IV", [&]() -> Result {
    if (!have_clean || sweep.empty()) return {false, "runs failed"};
    const double f1 = clean.of(Policy::FedAvg).mape_mean, d1 = clean.of(Policy::DearFsac).mape_mean;
    const double f4 = sweep[0].of(Policy::FedAvg).mape_mean, d4 = sweep[0].of(Policy::DearFsac).mape_mean;
    double cpu = train_cpu + clean_cpu;
    for (const auto& p : sweep[0].policies) {
      for (double s : p.seconds) cpu += s;
    }
    const bool a = f4 >= kFedAvgDegradation * f1;
    const bool b = d4 <= kDearfsacDegradation * d1;
    const bool c = d4 <= kDearfsacVsFedAvg * f4;
    const bool t = cpu < kRobustCpuSeconds;
    return {a && b && c && t,
            std::string("(a) ") + (a ? "ok" : "no") + " FedAvg IV/I = " + num(f4) + "/" + num(f1) + " = " +
                num(f4 / f1, 3) + "x (need >= " + num(kFedAvgDegradation) + "); (b) " + (b ? "ok" : "no") +
                " DearFSAC IV/I = " + num(d4) + "/" + num(d1) + " = " + num(d4 / d1, 3) + "x (need <= " +
                num(kDearfsacDegradation) + "); (c) " + (c ? "ok" : "no") + " DearFSAC/FedAvg in IV = " +
                num(d4 / f4, 3) + " (need <= " + num(kDearfsacVsFedAvg) + "); " + num(cpu / 60.0, 3) +
                " CPU-min incl. training (limit " + num(kRobustCpuSeconds / 60.0) + ")"};
  });

  if (have_artifacts) {
    record(8, "encoder separates defective models", [&] { return ac8_separability(base, *art.qeen); });
  } else {
    results[8] = {"encoder separates defective models", {false, "no trained encoder"}};
  }

  record(9, "p_M monotonicity", [&]() -> Result {
    if (sweep.size() != kPmSweep.size()) return {false, "sweep failed"};
    std::string detail = "FedAvg";
    bool mono = true;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const double m = sweep[i].of(Policy::FedAvg).mape_mean;
      detail += " " + num(kPmSweep[i]) + ":" + num(m);
      if (i > 0) mono = mono && m >= sweep[i - 1].of(Policy::FedAvg).mape_mean;
    }
    double lo = 1e300, hi = -1e300;
    detail += "; DearFSAC";
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const double m = sweep[i].of(Policy::DearFsac).mape_mean;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      detail += " " + num(kPmSweep[i]) + ":" + num(m);
    }
    const double ref = sweep[0].of(Policy::DearFsac).mape_mean;
    const bool spread = hi - lo <= kDearfsacSpread * ref;
    return {mono && spread, detail + "; FedAvg non-decreasing " + (mono ? "yes" : "no") + ", DearFSAC spread " +
                                num(hi - lo) + " vs limit " + num(kDearfsacSpread * ref)};
  });

  {
    std::vector<fs::path> dirs = {root / "scenario_I"};
    for (double v : kPmSweep) dirs.push_back(root / "scenario_IV" / ("p_m_" + format_number(v)));
    record(11, "runtime recorded, not reproduced", [&] { return ac11_timing(dirs); });
  }

  std::cout << "\nsummary\n";
  int failed = 0;
  for (const auto& [n, tr] : results) {
    report("AC" + std::to_string(n), tr.first, tr.second);
    failed += !tr.second.pass;
  }
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
