#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dearfed/config.hpp"
#include "dearfed/experiment.hpp"
#include "dearfed/kernels.hpp"

using namespace dearfed;

namespace {

struct CommonFlags {
  std::string config;
  ConfigOverrides over;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.over.seed, "Base seed");
  cmd->add_option("--out-dir", f.over.out_dir, "Output directory");
  cmd->add_option("--policy", f.over.policies, "Policy (repeatable): fedavg, fixed_weights, dearfsac, sac_without_qeen, cl_lstm");
  cmd->add_option("--scenario", f.over.scenario, "Scenario I, II, III or IV");
}

ExperimentConfig resolve(const CommonFlags& f) {
  return parse_config(apply_overrides(read_config_json(f.config), f.over));
}

void apply_thread_cap() {
  if (const char* env = std::getenv("DEARFED_THREADS")) {
    const int n = std::atoi(env);
    if (n < 1) throw std::invalid_argument("DEARFED_THREADS must be a positive integer");
    kernels::set_max_threads(n);
  }
}

void print_summary(const ScenarioSummary& s) {
  std::cout << "policy,mape_mean,mape_std,rmse_mean,rmse_std\n";
  for (const auto& p : s.policies) {
    std::cout << to_string(p.policy) << ',' << format_number(p.mape_mean) << ',' << format_number(p.mape_std) << ','
              << format_number(p.rmse_mean) << ',' << format_number(p.rmse_std) << '\n';
  }
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw std::invalid_argument("sweep value '" + tok + "' is not a number");
      }
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated load forecasting with learned, defect-aware aggregation"};
  app.require_subcommand(1);

  CommonFlags run_f, sweep_f, qeen_f, agent_f, gen_f, val_f;
  auto* run = app.add_subcommand("run", "Run every configured policy over all seeds");
  add_common(run, run_f);

  auto* sweep = app.add_subcommand("sweep", "Repeat run over values of one axis");
  add_common(sweep, sweep_f);
  std::string axis;
  std::vector<std::string> raw_values;
  sweep->add_option("--axis", axis, "p_m, dia_mu, dia_sigma, dia_k, snr_db, n_clients or p_k")->required();
  sweep->add_option("--values", raw_values, "Comma-separated values")->required();

  auto* qeen = app.add_subcommand("pretrain-qeen", "Build the marked corpus and train the encoder");
  add_common(qeen, qeen_f);

  auto* agent = app.add_subcommand("train-agent", "Train the aggregation agent");
  add_common(agent, agent_f);

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic fleet, audit clients and holiday calendar");
  add_common(gen, gen_f);

  auto* val = app.add_subcommand("validate-config", "Parse a config and print the resolved settings");
  add_common(val, val_f);

  CLI11_PARSE(app, argc, argv);

  try {
    apply_thread_cap();
    if (run->parsed()) {
      const ExperimentConfig cfg = resolve(run_f);
      Artifacts art;
      print_summary(run_scenario(cfg, art, std::cerr));
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve(sweep_f);
      Artifacts art;
      run_sweep(cfg, axis, parse_values(raw_values), art, std::cerr);
      std::cout << (cfg.out_dir / ("sweep_" + axis + ".csv")).string() << '\n';
    } else if (qeen->parsed()) {
      const ExperimentConfig cfg = resolve(qeen_f);
      const auto pre = pretrain_qeen(cfg, std::cerr);
      std::filesystem::create_directories(cfg.out_dir);
      save_params(cfg.out_dir / "qeen.dfs", pre.model.to_params());
      std::ostringstream hist;
      hist << "epoch,joint,recon,mark\n";
      for (std::size_t e = 0; e < pre.history.size(); ++e) {
        hist << e << ',' << format_number(pre.history[e].joint) << ',' << format_number(pre.history[e].recon) << ','
             << format_number(pre.history[e].mark) << '\n';
      }
      write_file_atomic(cfg.out_dir / "qeen_history.csv", hist.str());
      std::cout << (cfg.out_dir / "qeen.dfs").string() << '\n';
    } else if (agent->parsed()) {
      ExperimentConfig cfg = resolve(agent_f);
      if (agent_f.over.policies.empty()) cfg.policies = {Policy::DearFsac};
      for (Policy p : cfg.policies) {
        if (!uses_agent(p)) throw std::invalid_argument("policy " + to_string(p) + " has no agent to train");
      }
      Artifacts art;
      ensure_artifacts(cfg, art, std::cerr);
    } else if (gen->parsed()) {
      const ExperimentConfig cfg = resolve(gen_f);
      FleetSpec spec = cfg.fed.fleet;
      spec.seed = derive_seed(cfg.seed, "fleet-spec", {cfg.fed.fleet.seed});
      const auto fleet = generate_fleet(spec);
      std::filesystem::create_directories(cfg.out_dir);
      write_csv(cfg.out_dir / "fleet.csv", fleet);
      write_csv(cfg.out_dir / "audit.csv", generate_audit_clients(spec));
      write_holidays_json(cfg.out_dir / "holidays.json", fleet.front().holidays);
      std::cout << (cfg.out_dir / "fleet.csv").string() << '\n';
    } else if (val->parsed()) {
      const ExperimentConfig cfg = resolve(val_f);
      std::cout << "ok: scenario " << to_string(cfg.scenario) << ", N=" << cfg.fed.fleet.n_clients
                << ", K=" << cfg.fed.k() << ", rounds=" << cfg.fed.rounds << ", seeds=" << cfg.seeds
                << ", policies=";
      for (std::size_t i = 0; i < cfg.policies.size(); ++i) std::cout << (i ? "," : "") << to_string(cfg.policies[i]);
      std::cout << '\n';
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
