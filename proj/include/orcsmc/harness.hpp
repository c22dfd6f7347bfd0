#pragma once

#include "orcsmc/controllers.hpp"
#include "orcsmc/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace orcsmc::harness {

using json = nlohmann::ordered_json;

struct ModelConfig {
  /// lg-diagonal | lg-nondiagonal | sv | binomial
  std::string family = "lg-diagonal";
  int d = 2;
  /// Family defaults apply when unset.
  std::optional<double> alpha;
  std::optional<double> sigma;   // sv: transition sd
  std::optional<double> sigma2;  // binomial: transition variance
  std::optional<double> beta;    // sv
  std::optional<int> trials;     // binomial M
};

struct AlgorithmConfig {
  /// bpf | csmc | orcsmc
  std::string name = "orcsmc";
  Index n_particles = 1000;
  int lag = 8;
  int iterations = 5;
  double kappa_ess = 0.5;
  double ridge = 1e-6;
  double eps_pd = 1e-4;
  bool learning = true;
  /// residual-multinomial | multinomial | systematic
  std::string resampling = "residual-multinomial";
  bool force_resample = false;
  /// Empty means every time step (always-overwrite); otherwise selective output.
  std::vector<int> output_times;
};

struct RunConfig {
  int T = 100;
  int replicates = 100;
  std::uint64_t seed = 1;
  bool keep_all_paths = false;
  /// 0: ORCSMC_THREADS environment variable, else 1.
  int threads = 0;
};

struct ExperimentConfig {
  ModelConfig model;
  AlgorithmConfig algorithm;
  RunConfig run;
  std::string output = "out";
};

void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

ModelSpec build_model(const ModelConfig& config);
FilterOptions build_filter_options(const AlgorithmConfig& config);
RegConfig build_reg_config(const AlgorithmConfig& config);

/// Dataset and analysis inputs that do not belong together.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<Vector> x;
  std::vector<Observation> y;
  /// FNV-1a of the CSV bytes, hex.
  std::string id;
};

/// CSV with header t,y_1..y_d',x_1..x_d.
std::string format_dataset_csv(const Trajectory& traj, bool integer_observations);
Dataset read_dataset(const std::filesystem::path& path);
std::string content_id(std::string_view bytes);

struct StepRow {
  int t = 0;
  double log_z = 0.0;
  double ess = 0.0;
  bool resampled = false;
  double mean_1 = 0.0;
  double wall_ms = 0.0;
};

struct ReplicateResult {
  int replicate = 0;
  bool ok = false;
  std::string error;
  double log_z = 0.0;
  std::vector<StepRow> steps;
  std::size_t apf_calls = 0;
  std::size_t particle_moves = 0;
  /// Smoothing paths at the final time when keep_all_paths is set.
  std::optional<PathSet> paths;
};

/// One replicate of the configured algorithm; never throws on algorithm failure.
ReplicateResult run_replicate(const ModelSpec& model, const ExperimentConfig& config,
                              const std::vector<Observation>& ys, int replicate);

/// All replicates, in replicate order, spread over `threads` workers.
std::vector<ReplicateResult> run_replicates(const ModelSpec& model, const ExperimentConfig& config,
                                            const std::vector<Observation>& ys, int threads);

/// Summary statistics; includes the relative-Z block when `oracle_log_z` is set.
json summarize_replicates(const ExperimentConfig& config, const std::vector<ReplicateResult>& results,
                          std::optional<double> oracle_log_z, const std::string& dataset_id);

int resolve_threads(int requested);

// Subcommands. Each writes into `out_dir` (created if needed).

/// data.csv
std::filesystem::path cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// run_steps.csv, run_final.csv, timing.csv, summary.json and, with keep_all_paths, smoothing.csv.
json cmd_run(const ExperimentConfig& config, const std::filesystem::path& dataset,
             const std::filesystem::path& out_dir);

/// oracle.json: log_z (Kalman or grid) and, for linear-Gaussian models, smoothed means/sds.
json cmd_oracle(const ExperimentConfig& config, const std::filesystem::path& dataset,
                const std::filesystem::path& out_dir);

/// w1.csv, standardized.csv, rmse_by_lag.csv.
void cmd_analyze(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& oracle_file,
                 const std::filesystem::path& out_dir);

}  // namespace orcsmc::harness
