#include "orcsmc/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace h = orcsmc::harness;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Base seed, overrides the config");
  cmd->add_option("--replicates", o.replicates, "Replicate count, overrides the config")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "Worker threads (default: ORCSMC_THREADS or 1)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output directory, overrides the config");
}

h::ExperimentConfig resolve(const Overrides& o) {
  h::ExperimentConfig c = h::load_config(o.config);
  if (o.seed) c.run.seed = *o.seed;
  if (o.replicates) c.run.replicates = *o.replicates;
  if (o.threads) c.run.threads = *o.threads;
  if (!o.out.empty()) c.output = o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online rolling controlled SMC: simulate, run, oracle, analyze"};
  app.require_subcommand(1);

  Overrides sim_o;
  auto* sim = app.add_subcommand("simulate", "Simulate a dataset (data.csv)");
  add_common(sim, sim_o);

  Overrides run_o;
  std::string run_data;
  auto* run = app.add_subcommand("run", "Run the configured algorithm over replicates");
  add_common(run, run_o);
  run->add_option("--data", run_data, "Dataset CSV")->required()->check(CLI::ExistingFile);

  Overrides oracle_o;
  std::string oracle_data;
  auto* oracle = app.add_subcommand("oracle", "Exact or grid reference values for a dataset");
  add_common(oracle, oracle_o);
  oracle->add_option("--data", oracle_data, "Dataset CSV")->required()->check(CLI::ExistingFile);

  std::vector<std::string> analyze_runs;
  std::string analyze_oracle;
  std::string analyze_out = "analysis";
  auto* analyze = app.add_subcommand("analyze", "W1 curves, standardized marginals and error tables");
  analyze->add_option("--run", analyze_runs, "Run output directory (repeatable)")->required();
  analyze->add_option("--oracle", analyze_oracle, "oracle.json")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto c = resolve(sim_o);
      std::cout << h::cmd_simulate(c, c.output).string() << "\n";
    } else if (*run) {
      const auto c = resolve(run_o);
      const auto summary = h::cmd_run(c, run_data, c.output);
      std::cout << summary.dump(2) << "\n";
      if (summary.at("failures").get<std::size_t>() > 0) return 3;
    } else if (*oracle) {
      const auto c = resolve(oracle_o);
      std::cout << h::cmd_oracle(c, oracle_data, c.output).dump(2) << "\n";
    } else if (*analyze) {
      std::vector<std::filesystem::path> dirs(analyze_runs.begin(), analyze_runs.end());
      h::cmd_analyze(dirs, analyze_oracle, analyze_out);
      std::cout << "wrote " << analyze_out << "\n";
    }
  } catch (const h::ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
