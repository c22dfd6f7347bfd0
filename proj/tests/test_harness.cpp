#include "orcsmc/harness.hpp"
#include "orcsmc/oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace orcsmc;
namespace h = orcsmc::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "orcsmc_harness_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> rows(const fs::path& p) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    out.push_back(f);
  }
  return out;
}

h::ExperimentConfig base_config() {
  h::ExperimentConfig c;
  c.model.family = "lg-diagonal";
  c.model.d = 2;
  c.algorithm.name = "orcsmc";
  c.algorithm.n_particles = 50;
  c.algorithm.lag = 3;
  c.algorithm.iterations = 2;
  c.run.T = 12;
  c.run.replicates = 4;
  c.run.seed = 1;
  return c;
}

}  // namespace

TEST_CASE("config round trip") {
  h::ExperimentConfig c = base_config();
  c.model.alpha = 0.3;
  c.model.trials = 7;
  c.algorithm.output_times = {2, 5};
  c.algorithm.resampling = "systematic";
  c.run.keep_all_paths = true;
  c.run.seed = 18446744073709551615ULL;
  const h::json j = c;
  const h::ExperimentConfig back = j.get<h::ExperimentConfig>();
  CHECK(h::json(back).dump() == j.dump());
  CHECK(back.model.alpha == 0.3);
  CHECK_FALSE(back.model.sigma.has_value());
  CHECK(back.run.seed == c.run.seed);
  CHECK(h::json(base_config()).at("algorithm").at("output_times") == "all");
}

TEST_CASE("config validation") {
  h::json j = base_config();
  j["model"]["family"] = "poisson";
  CHECK_THROWS_AS(j.get<h::ExperimentConfig>(), ContractViolation);
  j = base_config();
  j["algorithm"]["N"] = 0;
  CHECK_THROWS_AS(j.get<h::ExperimentConfig>(), ContractViolation);
  j = base_config();
  j["algorithm"]["resampling"] = "stratified-ish";
  CHECK_THROWS_AS(j.get<h::ExperimentConfig>(), ContractViolation);
  h::ExperimentConfig sv = base_config();
  sv.model.family = "sv";
  CHECK_THROWS_AS(h::build_model(sv.model), ContractViolation);
}

TEST_CASE("simulate writes a deterministic dataset") {
  const fs::path dir = scratch("simulate");
  h::ExperimentConfig c = base_config();
  c.run.T = 5;
  const fs::path a = h::cmd_simulate(c, dir / "a");
  const fs::path b = h::cmd_simulate(c, dir / "b");
  CHECK(slurp(a) == slurp(b));
  const auto r = rows(a);
  REQUIRE(r.size() == 5);
  for (const auto& row : r) CHECK(row.size() == 5);
  const h::Dataset ds = h::read_dataset(a);
  CHECK(ds.y.size() == 5);
  CHECK(ds.id == h::content_id(slurp(a)));

  c.model.family = "binomial";
  c.model.d = 3;
  const auto bin = rows(h::cmd_simulate(c, dir / "bin"));
  for (const auto& row : bin) {
    for (std::size_t j = 1; j <= 3; ++j) {
      CHECK(row[j].find_first_not_of("0123456789") == std::string::npos);
      const int v = std::stoi(row[j]);
      CHECK(v >= 0);
      CHECK(v <= 50);
    }
  }
}

TEST_CASE("runs are byte-identical across repeats and thread counts") {
  const fs::path dir = scratch("determinism");
  h::ExperimentConfig c = base_config();
  c.run.keep_all_paths = true;
  const fs::path data = h::cmd_simulate(c, dir);
  c.run.threads = 1;
  h::cmd_run(c, data, dir / "one");
  h::cmd_run(c, data, dir / "again");
  c.run.threads = 3;
  h::cmd_run(c, data, dir / "three");
  for (const char* f : {"run_steps.csv", "run_final.csv", "smoothing.csv", "summary.json"}) {
    CHECK(slurp(dir / "one" / f) == slurp(dir / "again" / f));
    CHECK(slurp(dir / "one" / f) == slurp(dir / "three" / f));
  }
  const auto steps = rows(dir / "one" / "run_steps.csv");
  CHECK(steps.size() == 4 * 12);
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(std::stoi(steps[i][1]) == static_cast<int>(i % 12) + 1);
  CHECK(rows(dir / "one" / "run_final.csv").size() == 4);
}

TEST_CASE("bootstrap smoke run with a single particle") {
  const fs::path dir = scratch("smoke");
  h::ExperimentConfig c = base_config();
  c.algorithm.name = "bpf";
  c.algorithm.n_particles = 1;
  c.run.replicates = 1;
  const fs::path data = h::cmd_simulate(c, dir);
  const h::json s = h::cmd_run(c, data, dir / "run");
  CHECK(s.at("failures") == 0);
  CHECK(std::isfinite(s.at("log_z").at("mean").get<double>()));
}

TEST_CASE("controlled SMC exactness shows up in the summary") {
  const fs::path dir = scratch("csmc");
  h::ExperimentConfig c = base_config();
  c.model.d = 1;
  c.algorithm.name = "csmc";
  c.algorithm.n_particles = 200;
  c.algorithm.iterations = 3;
  c.algorithm.ridge = 0.0;
  c.run.T = 10;
  c.run.replicates = 5;
  const fs::path data = h::cmd_simulate(c, dir);
  const h::json s = h::cmd_run(c, data, dir / "run");
  CHECK(s.at("log_z").at("std").get<double>() < 1e-6);
  CHECK(std::abs(s.at("log_z").at("mean").get<double>() - s.at("oracle_log_z").get<double>()) < 1e-6);
}

TEST_CASE("summary is recomputable from the per-replicate rows") {
  const fs::path dir = scratch("summary");
  h::ExperimentConfig c = base_config();
  c.run.replicates = 7;
  const fs::path data = h::cmd_simulate(c, dir);
  const h::json s = h::cmd_run(c, data, dir / "run");
  const auto finals = rows(dir / "run" / "run_final.csv");
  const auto steps = rows(dir / "run" / "run_steps.csv");
  std::vector<double> lz;
  for (const auto& r : finals) lz.push_back(std::stod(r[2]));
  double mean = 0.0;
  for (double v : lz) mean += v / 7;
  double ss = 0.0;
  for (double v : lz) ss += (v - mean) * (v - mean);
  std::vector<double> sorted = lz;
  std::sort(sorted.begin(), sorted.end());
  CHECK(s.at("log_z").at("mean").get<double>() == doctest::Approx(mean).epsilon(1e-14));
  CHECK(s.at("log_z").at("std").get<double>() == doctest::Approx(std::sqrt(ss / 6)).epsilon(1e-12));
  CHECK(s.at("log_z").at("median").get<double>() == sorted[3]);
  // the final row of each replicate's trace is its final estimate
  for (std::size_t r = 0; r < 7; ++r) CHECK(std::stod(steps[r * 12 + 11][2]) == lz[r]);
  const double oracle = s.at("oracle_log_z").get<double>();
  double rmse = 0.0;
  for (double v : lz) rmse += std::pow(std::exp(v - oracle) - 1.0, 2) / 7;
  CHECK(s.at("rmse_relative_Z").get<double>() == doctest::Approx(std::sqrt(rmse)).epsilon(1e-12));
  CHECK(s.at("scale") == "desk");
}

TEST_CASE("oracle and analysis pipeline") {
  const fs::path dir = scratch("analyze");
  h::ExperimentConfig c = base_config();
  c.run.keep_all_paths = true;
  c.run.replicates = 2;
  const fs::path data = h::cmd_simulate(c, dir);
  h::cmd_run(c, data, dir / "run");
  const h::json oracle = h::cmd_oracle(c, data, dir / "oracle");
  CHECK(oracle.at("method") == "kalman");
  CHECK(oracle.at("smoothed_mean").size() == 12);
  h::cmd_analyze({dir / "run"}, dir / "oracle" / "oracle.json", dir / "analysis");
  const auto w1 = rows(dir / "analysis" / "w1.csv");
  // T * d coordinate rows plus T averages, per replicate
  CHECK(w1.size() == 2 * (12 * 2 + 12));
  for (const auto& r : w1) CHECK(std::isfinite(std::stod(r[4])));
  CHECK(rows(dir / "analysis" / "standardized.csv").size() == 2 * 12);
  CHECK(rows(dir / "analysis" / "rmse_by_lag.csv").size() == 1);

  // a dataset with a different identifier is refused
  h::ExperimentConfig other = c;
  other.run.seed = 2;
  const fs::path data2 = h::cmd_simulate(other, dir / "other");
  h::cmd_oracle(other, data2, dir / "oracle2");
  CHECK_THROWS_AS(h::cmd_analyze({dir / "run"}, dir / "oracle2" / "oracle.json", dir / "bad"), h::ProvenanceError);
}

TEST_CASE("analysis reproduces direct W1 calls bit for bit") {
  const fs::path dir = scratch("fixture");
  fs::create_directories(dir / "run");
  // oracle for T = 2, d = 1
  const h::json oracle = {{"dataset_id", "fixture"},
                          {"smoothed_mean", {{0.25}, {-1.0}}},
                          {"smoothed_sd", {{1.5}, {0.5}}}};
  std::ofstream(dir / "oracle.json") << oracle.dump();
  const h::json summary = {{"dataset_id", "fixture"}, {"algorithm", "orcsmc"}, {"family", "lg-diagonal"},
                           {"d", 1}, {"N", 4}, {"L", 2}, {"K", 1}, {"log_z", {{"std", 0.0}}}};
  std::ofstream(dir / "run" / "summary.json") << summary.dump();
  // samples drawn from the oracle marginals themselves
  const Vector w = (Vector(4) << 0.1, 0.2, 0.3, 0.4).finished();
  const std::vector<Vector> xs = {(Vector(4) << 0.25 - 1.5, 0.25, 0.25 + 0.4, 0.25 + 2.0).finished(),
                                  (Vector(4) << -1.2, -1.0, -0.9, -0.1).finished()};
  {
    std::ofstream out(dir / "run" / "smoothing.csv");
    out << "replicate,t,particle,weight,x_1\n";
    char buf[64];
    for (int t = 0; t < 2; ++t)
      for (Index n = 0; n < 4; ++n) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", w[n], xs[static_cast<std::size_t>(t)][n]);
        out << 0 << ',' << t + 1 << ',' << n << ',' << buf << "\n";
      }
  }
  h::cmd_analyze({dir / "run"}, dir / "oracle.json", dir / "out");
  const auto w1 = rows(dir / "out" / "w1.csv");
  REQUIRE(w1.size() == 4);
  const double direct1 = wasserstein1_to_gaussian(xs[0], w, 0.25, 1.5);
  const double direct2 = wasserstein1_to_gaussian(xs[1], w, -1.0, 0.5);
  CHECK(std::stod(w1[0][4]) == direct1);
  CHECK(std::stod(w1[2][4]) == direct2);
  CHECK(std::stod(w1[1][4]) == direct1);
}

TEST_CASE("W1 from the pipeline shrinks as N grows") {
  const fs::path dir = scratch("convergence");
  h::ExperimentConfig c = base_config();
  c.algorithm.name = "bpf";
  c.run.T = 6;
  c.run.replicates = 50;
  c.run.keep_all_paths = true;
  const fs::path data = h::cmd_simulate(c, dir);
  h::cmd_oracle(c, data, dir / "oracle");
  std::vector<double> medians;
  for (Index n : {100, 1000}) {
    c.algorithm.n_particles = n;
    const fs::path run = dir / ("n" + std::to_string(n));
    h::cmd_run(c, data, run);
    h::cmd_analyze({run}, dir / "oracle" / "oracle.json", run / "analysis");
    std::vector<double> at_final;
    for (const auto& r : rows(run / "analysis" / "w1.csv"))
      if (r[2] == "6" && r[3] == "1") at_final.push_back(std::stod(r[4]));
    REQUIRE(at_final.size() == 50);
    std::sort(at_final.begin(), at_final.end());
    medians.push_back(0.5 * (at_final[24] + at_final[25]));
  }
  CHECK(medians[1] < medians[0]);
}

TEST_CASE("command line front end") {
  const fs::path dir = scratch("cli");
  h::ExperimentConfig c = base_config();
  c.run.replicates = 2;
  std::ofstream(dir / "config.json") << h::json(c).dump(2);
  const std::string cli = ORCSMC_CLI_PATH;
  const std::string cfg = (dir / "config.json").string();
  auto run = [](const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); };
  CHECK(run(cli + " simulate --config " + cfg + " --out " + (dir / "data").string()) == 0);
  CHECK(fs::exists(dir / "data" / "data.csv"));
  CHECK(run(cli + " run --config " + cfg + " --data " + (dir / "data" / "data.csv").string() + " --threads 2 --out " +
            (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "summary.json"));
  CHECK(run(cli + " simulate --config " + cfg + " --seed 99 --out " + (dir / "data99").string()) == 0);
  CHECK(slurp(dir / "data" / "data.csv") != slurp(dir / "data99" / "data.csv"));
  CHECK(run(cli + " oracle --config " + cfg + " --data " + (dir / "data99" / "data.csv").string() + " --out " +
            (dir / "oracle99").string()) == 0);
  const int refused = run(cli + " analyze --run " + (dir / "run").string() + " --oracle " +
                          (dir / "oracle99" / "oracle.json").string() + " --out " + (dir / "an").string());
  CHECK(WEXITSTATUS(refused) == 4);
  CHECK(run(cli + " run --config /nonexistent.json --data x") != 0);
}
