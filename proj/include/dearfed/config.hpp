#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dearfed/fed.hpp"
#include "dearfed/qeen.hpp"
#include "dearfed/sac.hpp"
#include "json.hpp"

namespace dearfed {

enum class Scenario { I, II, III, IV };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);
DefectKind defect_kind_for(Scenario s);

struct AgentTrainingConfig {
  std::size_t episodes = 8;
  Scenario scenario = Scenario::IV;  // defect regime the agent trains under
  std::size_t rounds = 0;            // 0 means the experiment's rounds
};

struct CheckpointPaths {
  std::filesystem::path qeen;
  std::filesystem::path agent;      // dearfsac
  std::filesystem::path agent_raw;  // sac_without_qeen
};

struct DataSource {
  std::filesystem::path csv;  // empty means the synthetic generator
  std::filesystem::path holidays;
  std::filesystem::path audit_csv;  // server-side clients; empty means k-means medoids of csv
};

struct ExperimentConfig {
  Scenario scenario = Scenario::I;
  FedConfig fed;
  QeenConfig qeen;
  CorpusConfig corpus;
  SacConfig sac;
  RewardConfig reward;
  AgentTrainingConfig agent;
  ClConfig cl;
  std::size_t seeds = 3;
  std::uint64_t seed = 1;
  std::vector<Policy> policies = {Policy::ClLstm, Policy::FedAvg, Policy::SacWithoutQeen, Policy::DearFsac};
  std::filesystem::path out_dir = "out";
  CheckpointPaths checkpoints;
  DataSource data;

  /// Sets fed.defects.kind from the scenario.
  void sync_scenario();
};

/// Parses a config object. Every key is optional; unknown keys, wrong types
/// and defect parameters that do not apply to the scenario are errors that
/// name the key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Reads a JSON file into an object (an empty object for an empty path).
nlohmann::json read_config_json(const std::filesystem::path& path);

/// Command-line values that take precedence over the config file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string scenario;
  std::vector<std::string> policies;
};
/// Writes the overrides into a config object so they pass the same validation.
nlohmann::json apply_overrides(nlohmann::json j, const ConfigOverrides& o);

/// Config with the seed varied for run index s.
std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t s);

}  // namespace dearfed
