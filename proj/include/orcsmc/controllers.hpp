#pragma once

#include "orcsmc/filter.hpp"
#include "orcsmc/policy.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <vector>

namespace orcsmc {

// ---------------------------------------------------------------------------
// Offline controlled SMC
// ---------------------------------------------------------------------------

struct CsmcConfig {
  Index n_particles = 1000;
  int iterations = 5;
  FilterOptions filter;
  RegConfig reg;
};

struct CsmcResult {
  /// Twists after the final backward sweep.
  std::vector<TwistParams> twists;
  /// Estimate from the final forward pass.
  Scalar log_z = 0.0;
  FilterRun last_pass;
  std::size_t apf_calls = 0;
  std::size_t learn_calls = 0;
  std::size_t degenerate_fits = 0;
};

/// K rounds of (forward psi-APF over 1..T, backward learn_psi over T..1), starting
/// from unit twists. Iteration k draws from `streams.child(k)`.
CsmcResult csmc(const ModelSpec& model, const std::vector<Observation>& ys, const CsmcConfig& config,
                const StreamFactory& streams);

// ---------------------------------------------------------------------------
// Online rolling controlled SMC
// ---------------------------------------------------------------------------

enum class OutputMode {
  /// Re-run the estimation filter over the whole window at every time.
  kAlwaysOverwrite,
  /// Only refresh the estimation window at requested times (plus the horizon).
  kSelective,
};

struct OrcsmcConfig {
  Index n_particles = 1000;
  int lag = 8;
  int iterations = 5;
  FilterOptions filter;
  RegConfig reg;
  /// Keep every time step instead of discarding those older than t - L.
  bool keep_all = false;
  OutputMode output_mode = OutputMode::kAlwaysOverwrite;
  /// Requested output times for kSelective.
  std::set<int> output_times;
  /// Final time, always treated as requested in kSelective. 0 if unknown.
  int horizon = 0;
};

struct OnlineOutput {
  int t = 0;
  Scalar log_z = 0.0;
  Vector mean;
  Matrix covariance;
  Scalar ess = 0.0;
  Scalar ess_before_resampling = 0.0;
  bool resampled = false;
  std::size_t apf_calls = 0;
  std::size_t learn_calls = 0;
  std::size_t retained_systems = 0;
};

/// One time step of the rolling window.
struct WindowSlot {
  int t = 0;
  Observation y;
  TwistParams psi;
  ParticleSystem learning;
  ParticleSystem estimation;
};

/// Online controller. Holds the rolling window of twists, learning-filter and
/// estimation-filter systems plus the frozen boundary system at t0 - 1.
///
/// Learning-filter steps draw from `learning.child(t).child(k).at(s)`;
/// estimation-filter step s always draws from `estimation.at(s)`, so a re-run
/// of step s with unchanged inputs reproduces it exactly.
class Orcsmc {
 public:
  Orcsmc(const ModelSpec& model, OrcsmcConfig config, StreamFactory learning, StreamFactory estimation);

  /// Process y_t for t = time() + 1. Returns the output for t unless the
  /// selective mode skips it.
  std::optional<OnlineOutput> step(const Observation& y);

  int time() const noexcept { return t_; }
  int window_start() const noexcept;
  const std::deque<WindowSlot>& window() const noexcept { return slots_; }
  const WindowSlot& slot(int t) const;

  /// Learning plus estimation systems currently held (the time-0 pair included).
  std::size_t retained_systems() const noexcept { return 2 * slots_.size(); }

  /// Hash of twists and both systems for every retained slot with time <= last.
  std::uint64_t checksum_through(int last) const;

  /// Paths of the current estimation system over the retained slots (from time 1
  /// in keep_all mode).
  PathSet estimation_paths() const;

  std::size_t total_apf_calls() const noexcept { return apf_total_; }
  std::size_t total_learn_calls() const noexcept { return learn_total_; }
  std::size_t degenerate_fits() const noexcept { return degenerate_fits_; }

 private:
  WindowSlot& mutable_slot(int t);
  bool estimation_wanted(int t) const;

  const ModelSpec* model_;
  OrcsmcConfig config_;
  StreamFactory learning_;
  StreamFactory estimation_;
  std::deque<WindowSlot> slots_;
  int t_ = 0;
  std::size_t apf_total_ = 0;
  std::size_t learn_total_ = 0;
  std::size_t degenerate_fits_ = 0;
};

struct OrcsmcRun {
  std::vector<OnlineOutput> outputs;
  Scalar log_z = 0.0;
  /// Estimation-filter paths at the final time.
  PathSet paths;
  std::size_t apf_calls = 0;
  std::size_t learn_calls = 0;
  std::size_t max_retained_systems = 0;
};

using OutputSink = std::function<void(const OnlineOutput&)>;

/// Feeds ys through an Orcsmc controller; every emitted output goes to `sink`
/// (if set) before the next observation is processed.
OrcsmcRun run_orcsmc(const ModelSpec& model, const std::vector<Observation>& ys, const OrcsmcConfig& config,
                     const StreamFactory& learning, const StreamFactory& estimation, const OutputSink& sink = {});

}  // namespace orcsmc
