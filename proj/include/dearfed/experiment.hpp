#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dearfed/config.hpp"
#include "dearfed/fed.hpp"
#include "dearfed/qeen.hpp"
#include "dearfed/sac.hpp"

namespace dearfed {

/// Fleet for one seed: synthetic by default, or the configured CSV. With CSV
/// data the server's audit clients are the k-means medoids (one per
/// archetype), removed from the federation; fed.fleet.n_clients is updated.
Fleet make_fleet(const ExperimentConfig& cfg, FedConfig& fed, std::uint64_t seed);

QeenModel make_qeen(const ExperimentConfig& cfg);

struct QeenPretraining {
  QeenModel model;
  std::vector<QeenEpoch> history;
  std::size_t corpus_size = 0;
};
/// Builds the marked corpus on a defect-free fleet and trains the encoder.
QeenPretraining pretrain_qeen(const ExperimentConfig& cfg, std::ostream& log);

/// Trains an agent for policy (dearfsac or sac_without_qeen) over
/// cfg.agent.episodes federated runs on freshly seeded fleets under
/// cfg.agent.scenario. Diagnostics go to diag when given.
SacAgent train_agent(const ExperimentConfig& cfg, Policy policy, QeenModel* qeen, std::ostream& log,
                     std::ostream* diag = nullptr);

/// Encoder and agents shared across the runs of an experiment.
struct Artifacts {
  std::optional<QeenModel> qeen;
  std::optional<SacAgent> agent;      // dearfsac
  std::optional<SacAgent> agent_raw;  // sac_without_qeen
};

/// Loads checkpoints named in cfg or trains (and saves under out_dir)
/// whatever the policies need and is missing or mismatched.
void ensure_artifacts(const ExperimentConfig& cfg, Artifacts& art, std::ostream& log);

struct PolicySummary {
  Policy policy = Policy::FedAvg;
  std::vector<std::uint64_t> seeds;
  std::vector<TestMetrics> runs;
  std::vector<double> seconds;
  double mape_mean = 0.0, mape_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
};

struct ScenarioSummary {
  std::vector<PolicySummary> policies;
  const PolicySummary& of(Policy p) const;
};

/// Runs every configured policy on the same seeded fleets. Writes into
/// out_dir: rounds/<policy>_seed<seed>.jsonl, runs.csv, summary.csv and
/// timing.csv (wall clock, the only non-deterministic file).
ScenarioSummary run_scenario(const ExperimentConfig& cfg, Artifacts& art, std::ostream& log);

/// Sweep axes: p_m, dia_mu, dia_sigma, dia_k, snr_db, n_clients, p_k.
void apply_axis(ExperimentConfig& cfg, const std::string& axis, double value);

/// One run_scenario per value under out_dir/<axis>_<value>/, then
/// out_dir/sweep_<axis>.csv in long format.
std::vector<ScenarioSummary> run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                                       const std::vector<double>& values, Artifacts& art, std::ostream& log);

/// Shortest round-trip decimal form.
std::string format_number(double v);
/// Writes to a temporary sibling and renames over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace dearfed
