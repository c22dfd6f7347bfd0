#pragma once

#include "orcsmc/model.hpp"
#include "orcsmc/particles.hpp"
#include "orcsmc/random.hpp"
#include "orcsmc/twist.hpp"

#include <vector>

namespace orcsmc {

struct FilterOptions {
  /// Resample when ESS < kappa_ess * N.
  Scalar kappa_ess = 0.5;
  ResamplingScheme scheme = ResamplingScheme::kResidualMultinomial;
  /// Resample at every step regardless of ESS.
  bool force_resample = false;
};

/// One step of the twisted auxiliary particle filter (psi-APF) at time prev.t + 1.
///
/// The time-(t-1) weights are first multiplied by f_t(psi_t)(X_{t-1}) (mu(psi_1)
/// at t = 1) and the sum banked into log_z; after optional resampling the
/// particles move under the twisted kernel and are reweighted by g_t / psi_t,
/// banking the second sum. A unit twist reduces exactly to a bootstrap step.
ParticleSystem psi_apf_step(const ModelSpec& model, const TwistParams& psi, const ParticleSystem& prev,
                            const Observation& y, const FilterOptions& options, Rng& rng);

/// psi_apf_step without the unit-twist short-circuit (always goes through the
/// twisted Gaussian kernel).
ParticleSystem twisted_apf_step(const ModelSpec& model, const TwistParams& psi, const ParticleSystem& prev,
                                const Observation& y, const FilterOptions& options, Rng& rng);

/// Plain bootstrap step; identical arithmetic to psi_apf_step with a unit twist.
ParticleSystem bootstrap_step(const ModelSpec& model, const ParticleSystem& prev, const Observation& y,
                              const FilterOptions& options, Rng& rng);

struct StepSummary {
  int t = 0;
  Scalar log_z = 0.0;
  Scalar ess = 0.0;
  Scalar ess_before_resampling = 0.0;
  bool resampled = false;
  Vector mean;
};

StepSummary summarize(const ParticleSystem& system);

struct FilterRun {
  Scalar log_z = 0.0;
  std::vector<StepSummary> steps;
  /// Systems 0..T when requested, empty otherwise.
  std::vector<ParticleSystem> systems;
};

/// Folds psi_apf_step over t = 1..T from the time-0 system; step t draws from
/// `streams.at(t)`. `twists[t-1]` is psi_t; psi_{T+1} is implicitly the unit twist.
FilterRun run_filter(const ModelSpec& model, const std::vector<TwistParams>& twists,
                     const std::vector<Observation>& ys, Index n_particles, const FilterOptions& options,
                     const StreamFactory& streams, bool keep_systems = false);

/// Standalone bootstrap particle filter with the same stream layout as run_filter.
FilterRun bootstrap_filter(const ModelSpec& model, const std::vector<Observation>& ys, Index n_particles,
                           const FilterOptions& options, const StreamFactory& streams,
                           bool keep_systems = false);

}  // namespace orcsmc
