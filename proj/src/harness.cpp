#include "orcsmc/harness.hpp"

#include "orcsmc/hash.hpp"
#include "orcsmc/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace orcsmc::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <class T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (j.contains(key) && !j.at(key).is_null()) v = j.at(key).get<T>();
}

template <class T>
void get_if_present(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  json model = {{"family", c.model.family}, {"d", c.model.d}};
  put_optional(model, "alpha", c.model.alpha);
  put_optional(model, "sigma", c.model.sigma);
  put_optional(model, "sigma2", c.model.sigma2);
  put_optional(model, "beta", c.model.beta);
  put_optional(model, "trials", c.model.trials);
  const AlgorithmConfig& a = c.algorithm;
  json algorithm = {{"name", a.name},
                    {"N", a.n_particles},
                    {"L", a.lag},
                    {"K", a.iterations},
                    {"kappa_ess", a.kappa_ess},
                    {"ridge", a.ridge},
                    {"eps_pd", a.eps_pd},
                    {"learning", a.learning},
                    {"resampling", a.resampling},
                    {"force_resample", a.force_resample}};
  if (a.output_times.empty()) {
    algorithm["output_times"] = "all";
  } else {
    algorithm["output_times"] = a.output_times;
  }
  json run = {{"T", c.run.T},
              {"replicates", c.run.replicates},
              {"seed", c.run.seed},
              {"keep_all_paths", c.run.keep_all_paths},
              {"threads", c.run.threads}};
  j = json{{"model", model}, {"algorithm", algorithm}, {"run", run}, {"output", c.output}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("model")) {
    const json& m = j.at("model");
    get_if_present(m, "family", c.model.family);
    get_if_present(m, "d", c.model.d);
    get_optional(m, "alpha", c.model.alpha);
    get_optional(m, "sigma", c.model.sigma);
    get_optional(m, "sigma2", c.model.sigma2);
    get_optional(m, "beta", c.model.beta);
    get_optional(m, "trials", c.model.trials);
  }
  if (j.contains("algorithm")) {
    const json& a = j.at("algorithm");
    AlgorithmConfig& o = c.algorithm;
    get_if_present(a, "name", o.name);
    get_if_present(a, "N", o.n_particles);
    get_if_present(a, "L", o.lag);
    get_if_present(a, "K", o.iterations);
    get_if_present(a, "kappa_ess", o.kappa_ess);
    get_if_present(a, "ridge", o.ridge);
    get_if_present(a, "eps_pd", o.eps_pd);
    get_if_present(a, "learning", o.learning);
    get_if_present(a, "resampling", o.resampling);
    get_if_present(a, "force_resample", o.force_resample);
    if (a.contains("output_times") && a.at("output_times").is_array())
      o.output_times = a.at("output_times").get<std::vector<int>>();
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    get_if_present(r, "T", c.run.T);
    get_if_present(r, "replicates", c.run.replicates);
    get_if_present(r, "seed", c.run.seed);
    get_if_present(r, "keep_all_paths", c.run.keep_all_paths);
    get_if_present(r, "threads", c.run.threads);
  }
  get_if_present(j, "output", c.output);

  const std::vector<std::string> families = {"lg-diagonal", "lg-nondiagonal", "sv", "binomial"};
  if (std::find(families.begin(), families.end(), c.model.family) == families.end())
    throw ContractViolation("config: unknown model family '" + c.model.family + "'");
  const std::vector<std::string> algorithms = {"bpf", "csmc", "orcsmc"};
  if (std::find(algorithms.begin(), algorithms.end(), c.algorithm.name) == algorithms.end())
    throw ContractViolation("config: unknown algorithm '" + c.algorithm.name + "'");
  require(c.model.d >= 1, "config: d must be >= 1");
  require(c.algorithm.n_particles >= 1, "config: N must be >= 1");
  require(c.algorithm.lag >= 1, "config: L must be >= 1");
  require(c.algorithm.iterations >= 1, "config: K must be >= 1");
  require(c.algorithm.kappa_ess > 0.0 && c.algorithm.kappa_ess <= 1.0, "config: kappa_ess must be in (0, 1]");
  require(c.algorithm.ridge >= 0.0, "config: ridge must be >= 0");
  require(c.algorithm.eps_pd > 0.0, "config: eps_pd must be > 0");
  require(c.run.T >= 1, "config: T must be >= 1");
  require(c.run.replicates >= 1, "config: replicates must be >= 1");
  build_filter_options(c.algorithm);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return json::parse(in).get<ExperimentConfig>();
}

ModelSpec build_model(const ModelConfig& c) {
  if (c.family == "lg-diagonal") return make_lg_diagonal(c.d, c.alpha.value_or(0.415));
  if (c.family == "lg-nondiagonal") return make_lg_nondiagonal(c.d, c.alpha.value_or(0.415));
  if (c.family == "sv") {
    require(c.d == 1, "config: the sv family requires d = 1");
    return make_stochastic_volatility(c.alpha.value_or(0.986), c.sigma.value_or(0.13), c.beta.value_or(0.69));
  }
  if (c.family == "binomial")
    return make_binomial(c.d, c.trials.value_or(50), c.alpha.value_or(0.99), c.sigma2.value_or(0.11));
  throw ContractViolation("config: unknown model family '" + c.family + "'");
}

FilterOptions build_filter_options(const AlgorithmConfig& c) {
  FilterOptions o;
  o.kappa_ess = c.kappa_ess;
  o.force_resample = c.force_resample;
  if (c.resampling == "residual-multinomial") {
    o.scheme = ResamplingScheme::kResidualMultinomial;
  } else if (c.resampling == "multinomial") {
    o.scheme = ResamplingScheme::kMultinomial;
  } else if (c.resampling == "systematic") {
    o.scheme = ResamplingScheme::kSystematic;
  } else {
    throw ContractViolation("config: unknown resampling scheme '" + c.resampling + "'");
  }
  return o;
}

RegConfig build_reg_config(const AlgorithmConfig& c) {
  RegConfig r;
  r.ridge = c.ridge;
  r.eps_pd_rel = c.eps_pd;
  r.enabled = c.learning;
  return r;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string content_id(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.digest()));
  return buf;
}

std::string format_dataset_csv(const Trajectory& traj, bool integer_observations) {
  std::ostringstream out;
  const Index dy = traj.y.front().size();
  const Index d = traj.x.front().size();
  out << "t";
  for (Index j = 1; j <= dy; ++j) out << ",y_" << j;
  for (Index j = 1; j <= d; ++j) out << ",x_" << j;
  out << "\n";
  for (std::size_t t = 0; t < traj.y.size(); ++t) {
    out << t + 1;
    for (Index j = 0; j < dy; ++j) {
      if (integer_observations) {
        out << ',' << static_cast<long long>(traj.y[t][j]);
      } else {
        out << ',' << fmt(traj.y[t][j]);
      }
    }
    for (Index j = 0; j < d; ++j) out << ',' << fmt(traj.x[t][j]);
    out << "\n";
  }
  return out.str();
}

Dataset read_dataset(const fs::path& path) {
  const std::string bytes = read_file(path);
  Dataset ds;
  ds.id = content_id(bytes);
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset " + path.string());
  const auto header = split_csv_line(line);
  Index dy = 0;
  Index d = 0;
  for (const auto& h : header) {
    if (h.rfind("y_", 0) == 0) ++dy;
    if (h.rfind("x_", 0) == 0) ++d;
  }
  if (header.empty() || header[0] != "t" || dy == 0)
    throw std::runtime_error("dataset header must be t,y_1..,x_1..: " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != 1 + dy + d) throw std::runtime_error("malformed dataset row");
    Vector y(dy);
    Vector x(d);
    for (Index j = 0; j < dy; ++j) y[j] = std::stod(fields[static_cast<std::size_t>(1 + j)]);
    for (Index j = 0; j < d; ++j) x[j] = std::stod(fields[static_cast<std::size_t>(1 + dy + j)]);
    ds.y.push_back(std::move(y));
    ds.x.push_back(std::move(x));
  }
  if (ds.y.empty()) throw std::runtime_error("dataset has no rows: " + path.string());
  return ds;
}

// ---------------------------------------------------------------------------
// Replicates
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

StepRow row_from(const ParticleSystem& p, double wall_ms) {
  StepRow r;
  r.t = p.t;
  r.log_z = p.log_z;
  r.ess = ess(p.log_weights);
  r.resampled = p.resampled;
  r.mean_1 = weighted_mean(p)[0];
  r.wall_ms = wall_ms;
  return r;
}

PathSet paths_from(const std::vector<ParticleSystem>& systems) {
  LineageBuffer buffer;
  for (const auto& s : systems)
    if (s.t >= 1) buffer.push(s);
  return reconstruct_paths(buffer, systems.back());
}

}  // namespace

ReplicateResult run_replicate(const ModelSpec& model, const ExperimentConfig& config,
                              const std::vector<Observation>& ys, int replicate) {
  ReplicateResult res;
  res.replicate = replicate;
  const AlgorithmConfig& alg = config.algorithm;
  const FilterOptions options = build_filter_options(alg);
  const RegConfig reg = build_reg_config(alg);
  const StreamFactory root(config.run.seed + static_cast<std::uint64_t>(replicate));
  try {
    if (alg.name == "bpf") {
      const StreamFactory streams = root.child(stream_tag::kEstimation);
      std::vector<ParticleSystem> kept;
      ParticleSystem current = ParticleSystem::initial(model.dim(), alg.n_particles);
      if (config.run.keep_all_paths) kept.push_back(current);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        const auto start = Clock::now();
        Rng rng = streams.at(i + 1);
        current = bootstrap_step(model, current, ys[i], options, rng);
        res.steps.push_back(row_from(current, elapsed_ms(start)));
        if (config.run.keep_all_paths) kept.push_back(current);
      }
      res.log_z = current.log_z;
      res.apf_calls = ys.size();
      if (config.run.keep_all_paths) res.paths = paths_from(kept);
    } else if (alg.name == "csmc") {
      CsmcConfig cc;
      cc.n_particles = alg.n_particles;
      cc.iterations = alg.iterations;
      cc.filter = options;
      cc.reg = reg;
      const auto start = Clock::now();
      CsmcResult out = csmc(model, ys, cc, root.child(stream_tag::kCsmc));
      const double per_step = elapsed_ms(start) / static_cast<double>(ys.size());
      for (std::size_t i = 1; i < out.last_pass.systems.size(); ++i)
        res.steps.push_back(row_from(out.last_pass.systems[i], per_step));
      res.log_z = out.log_z;
      res.apf_calls = out.apf_calls;
      if (config.run.keep_all_paths) res.paths = paths_from(out.last_pass.systems);
    } else {
      OrcsmcConfig oc;
      oc.n_particles = alg.n_particles;
      oc.lag = alg.lag;
      oc.iterations = alg.iterations;
      oc.filter = options;
      oc.reg = reg;
      oc.keep_all = config.run.keep_all_paths;
      oc.horizon = static_cast<int>(ys.size());
      if (!alg.output_times.empty()) {
        oc.output_mode = OutputMode::kSelective;
        oc.output_times.insert(alg.output_times.begin(), alg.output_times.end());
      }
      Orcsmc controller(model, oc, root.child(stream_tag::kLearning), root.child(stream_tag::kEstimation));
      for (const auto& y : ys) {
        const auto start = Clock::now();
        const auto out = controller.step(y);
        if (out) res.steps.push_back(row_from(controller.slot(out->t).estimation, elapsed_ms(start)));
      }
      res.log_z = controller.slot(controller.time()).estimation.log_z;
      res.apf_calls = controller.total_apf_calls();
      if (config.run.keep_all_paths) res.paths = controller.estimation_paths();
    }
    res.particle_moves = res.apf_calls * static_cast<std::size_t>(alg.n_particles);
    res.ok = std::isfinite(res.log_z);
    if (!res.ok) res.error = "non-finite log Z";
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ORCSMC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

std::vector<ReplicateResult> run_replicates(const ModelSpec& model, const ExperimentConfig& config,
                                            const std::vector<Observation>& ys, int threads) {
  const int R = config.run.replicates;
  std::vector<ReplicateResult> results(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < R; r = next++) results[static_cast<std::size_t>(r)] = run_replicate(model, config, ys, r);
  };
  const int n_threads = std::max(1, std::min(threads, R));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json stats(const std::vector<double>& v) {
  if (v.empty()) return json{{"count", 0}};
  return json{{"count", v.size()},
              {"mean", mean_of(v)},
              {"median", median_of(v)},
              {"std", sd_of(v)},
              {"standard_error", sd_of(v) / std::sqrt(static_cast<double>(v.size()))}};
}

}  // namespace

json summarize_replicates(const ExperimentConfig& config, const std::vector<ReplicateResult>& results,
                          std::optional<double> oracle_log_z, const std::string& dataset_id) {
  std::vector<double> log_z;
  std::size_t failures = 0;
  std::size_t moves = 0;
  for (const auto& r : results) {
    if (r.ok) {
      log_z.push_back(r.log_z);
      moves = std::max(moves, r.particle_moves);
    } else {
      ++failures;
    }
  }
  json s;
  s["dataset_id"] = dataset_id;
  s["scale"] = "desk";
  s["family"] = config.model.family;
  s["d"] = config.model.d;
  s["algorithm"] = config.algorithm.name;
  s["N"] = config.algorithm.n_particles;
  s["L"] = config.algorithm.lag;
  s["K"] = config.algorithm.iterations;
  s["T"] = config.run.T;
  s["replicates"] = results.size();
  s["failures"] = failures;
  s["particle_moves_per_replicate"] = moves;
  s["log_z"] = stats(log_z);
  if (oracle_log_z && !log_z.empty()) {
    std::vector<double> rel;
    std::vector<double> log_rel;
    double sq = 0.0;
    for (double lz : log_z) {
      log_rel.push_back(lz - *oracle_log_z);
      rel.push_back(std::exp(lz - *oracle_log_z));
      sq += (rel.back() - 1.0) * (rel.back() - 1.0);
    }
    std::vector<double> abs_log_rel(log_rel.size());
    std::transform(log_rel.begin(), log_rel.end(), abs_log_rel.begin(), [](double v) { return std::abs(v); });
    s["oracle_log_z"] = *oracle_log_z;
    s["relative_z"] = stats(rel);
    s["log_relative_z"] = stats(log_rel);
    s["median_abs_log_relative_z"] = median_of(abs_log_rel);
    s["rmse_relative_Z"] = std::sqrt(sq / static_cast<double>(rel.size()));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fs::path cmd_simulate(const ExperimentConfig& config, const fs::path& out_dir) {
  const ModelSpec model = build_model(config.model);
  Rng rng = StreamFactory(config.run.seed).child(stream_tag::kSimulate).at(0);
  const Trajectory traj = simulate(model, config.run.T, rng);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / "data.csv";
  write_file(path, format_dataset_csv(traj, std::holds_alternative<BinomialLogisticObs>(model.obs())));
  return path;
}

json cmd_run(const ExperimentConfig& config, const fs::path& dataset, const fs::path& out_dir) {
  const ModelSpec model = build_model(config.model);
  const Dataset data = read_dataset(dataset);
  for (const auto& y : data.y) validate_observation(model, y);
  ExperimentConfig effective = config;
  effective.run.T = static_cast<int>(data.y.size());

  const auto results = run_replicates(model, effective, data.y, resolve_threads(config.run.threads));
  std::optional<double> oracle;
  if (model.is_linear_gaussian()) oracle = kalman_filter_smoother(model, data.y).log_z;

  fs::create_directories(out_dir);
  std::ostringstream steps;
  std::ostringstream finals;
  std::ostringstream timing;
  steps << "replicate,t,log_z,ess,resampled,mean_1\n";
  finals << "replicate,status,log_z_T,apf_calls,particle_moves\n";
  timing << "replicate,t,wall_ms\n";
  for (const auto& r : results) {
    for (const auto& row : r.steps) {
      steps << r.replicate << ',' << row.t << ',' << fmt(row.log_z) << ',' << fmt(row.ess) << ','
            << (row.resampled ? 1 : 0) << ',' << fmt(row.mean_1) << "\n";
      timing << r.replicate << ',' << row.t << ',' << fmt(row.wall_ms) << "\n";
    }
    finals << r.replicate << ',' << (r.ok ? "ok" : "failed") << ',' << fmt(r.ok ? r.log_z : std::numeric_limits<double>::quiet_NaN()) << ','
           << r.apf_calls << ',' << r.particle_moves << "\n";
  }
  write_file(out_dir / "run_steps.csv", steps.str());
  write_file(out_dir / "run_final.csv", finals.str());
  write_file(out_dir / "timing.csv", timing.str());

  if (config.run.keep_all_paths) {
    std::ostringstream smooth;
    smooth << "replicate,t,particle,weight";
    for (Index j = 1; j <= model.dim(); ++j) smooth << ",x_" << j;
    smooth << "\n";
    for (const auto& r : results) {
      if (!r.paths) continue;
      const PathSet& p = *r.paths;
      for (std::size_t s = 0; s < p.paths.size(); ++s) {
        const Matrix& pos = p.paths[s];
        for (Index n = 0; n < pos.cols(); ++n) {
          smooth << r.replicate << ',' << p.start + static_cast<int>(s) << ',' << n << ','
                 << fmt(std::exp(p.log_weights[n]));
          for (Index j = 0; j < pos.rows(); ++j) smooth << ',' << fmt(pos(j, n));
          smooth << "\n";
        }
      }
    }
    write_file(out_dir / "smoothing.csv", smooth.str());
  }

  json summary = summarize_replicates(effective, results, oracle, data.id);
  // thread count does not affect results; leave it out so outputs compare byte for byte
  effective.run.threads = 0;
  summary["config"] = effective;
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

json cmd_oracle(const ExperimentConfig& config, const fs::path& dataset, const fs::path& out_dir) {
  const ModelSpec model = build_model(config.model);
  const Dataset data = read_dataset(dataset);
  json o;
  o["dataset_id"] = data.id;
  o["family"] = config.model.family;
  o["d"] = model.dim();
  o["T"] = data.y.size();
  if (model.is_linear_gaussian()) {
    const KalmanResult k = kalman_filter_smoother(model, data.y);
    o["method"] = "kalman";
    o["log_z"] = k.log_z;
    json means = json::array();
    json sds = json::array();
    for (std::size_t t = 0; t < data.y.size(); ++t) {
      means.push_back(std::vector<double>(k.smoothed_mean[t].data(), k.smoothed_mean[t].data() + model.dim()));
      const Vector sd = k.smoothed_cov[t].diagonal().array().sqrt();
      sds.push_back(std::vector<double>(sd.data(), sd.data() + model.dim()));
    }
    o["smoothed_mean"] = means;
    o["smoothed_sd"] = sds;
  } else if (model.dim() == 1) {
    const GridFilterResult g = grid_filter_logz(model, data.y, default_grid(model), true);
    o["method"] = "grid";
    o["log_z"] = g.log_z;
    o["grid_points"] = g.nodes.size();
    o["richardson_gap"] = g.richardson_gap;
    o["coarse_warning"] = g.coarse_warning;
  } else {
    o["method"] = "none";
    o["log_z"] = nullptr;
  }
  fs::create_directories(out_dir);
  write_file(out_dir / "oracle.json", o.dump(2) + "\n");
  return o;
}

void cmd_analyze(const std::vector<fs::path>& run_dirs, const fs::path& oracle_file, const fs::path& out_dir) {
  const json oracle = json::parse(read_file(oracle_file));
  const std::string oracle_id = oracle.at("dataset_id").get<std::string>();
  const bool has_smoother = oracle.contains("smoothed_mean");

  std::ostringstream w1;
  std::ostringstream standardized;
  std::ostringstream lag_table;
  w1 << "run,replicate,t,coord,w1\n";
  standardized << "run,replicate,t,mean,sd\n";
  lag_table << "run,algorithm,family,d,N,L,K,rmse_relative_Z,median_abs_log_relative_z,log_z_std\n";

  for (std::size_t run_idx = 0; run_idx < run_dirs.size(); ++run_idx) {
    const fs::path& dir = run_dirs[run_idx];
    const json summary = json::parse(read_file(dir / "summary.json"));
    if (summary.at("dataset_id").get<std::string>() != oracle_id)
      throw ProvenanceError("run " + dir.string() + " was produced from dataset " +
                            summary.at("dataset_id").get<std::string>() + " but the oracle is for " + oracle_id);
    const std::string label = dir.filename().string();
    lag_table << label << ',' << summary.at("algorithm").get<std::string>() << ','
              << summary.at("family").get<std::string>() << ',' << summary.at("d") << ',' << summary.at("N") << ','
              << summary.at("L") << ',' << summary.at("K") << ','
              << (summary.contains("rmse_relative_Z") ? fmt(summary.at("rmse_relative_Z").get<double>()) : "") << ','
              << (summary.contains("median_abs_log_relative_z")
                      ? fmt(summary.at("median_abs_log_relative_z").get<double>())
                      : "")
              << ',' << fmt(summary.at("log_z").value("std", std::numeric_limits<double>::quiet_NaN())) << "\n";

    const fs::path smoothing = dir / "smoothing.csv";
    if (!has_smoother || !fs::exists(smoothing)) continue;

    // (replicate, t) -> rows of (weight, x_1..x_d)
    std::map<std::pair<int, int>, std::vector<std::vector<double>>> groups;
    std::istringstream in(read_file(smoothing));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      std::vector<double> row;
      for (std::size_t i = 3; i < f.size(); ++i) row.push_back(std::stod(f[i]));
      groups[{std::stoi(f[0]), std::stoi(f[1])}].push_back(std::move(row));
    }
    for (const auto& [key, rows] : groups) {
      const auto [rep, t] = key;
      const auto ti = static_cast<std::size_t>(t - 1);
      if (ti >= oracle.at("smoothed_mean").size()) throw ProvenanceError("smoothing time beyond oracle horizon");
      const auto& mean_t = oracle.at("smoothed_mean").at(ti);
      const auto& sd_t = oracle.at("smoothed_sd").at(ti);
      const auto n = static_cast<Index>(rows.size());
      const std::size_t d = rows.front().size() - 1;
      Vector weights(n);
      for (Index i = 0; i < n; ++i) weights[i] = rows[static_cast<std::size_t>(i)][0];
      double total = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        Vector samples(n);
        for (Index i = 0; i < n; ++i) samples[i] = rows[static_cast<std::size_t>(i)][j + 1];
        const double mu = mean_t.at(j).get<double>();
        const double sd = sd_t.at(j).get<double>();
        const double dist = wasserstein1_to_gaussian(samples, weights, mu, sd);
        total += dist;
        w1 << label << ',' << rep << ',' << t << ',' << j + 1 << ',' << fmt(dist) << "\n";
        if (j == 0) {
          const Vector z = standardize_marginal(samples, mu, sd);
          const double m1 = z.dot(weights);
          const double m2 = (z.array() - m1).square().matrix().dot(weights);
          standardized << label << ',' << rep << ',' << t << ',' << fmt(m1) << ',' << fmt(std::sqrt(m2)) << "\n";
        }
      }
      w1 << label << ',' << rep << ',' << t << ",avg," << fmt(total / static_cast<double>(d)) << "\n";
    }
  }
  fs::create_directories(out_dir);
  write_file(out_dir / "w1.csv", w1.str());
  write_file(out_dir / "standardized.csv", standardized.str());
  write_file(out_dir / "rmse_by_lag.csv", lag_table.str());
}

}  // namespace orcsmc::harness
