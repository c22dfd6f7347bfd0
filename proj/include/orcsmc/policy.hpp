#pragma once

#include "orcsmc/model.hpp"
#include "orcsmc/particles.hpp"
#include "orcsmc/twist.hpp"

namespace orcsmc {

/// Settings for the log-scale least-squares twist fit.
struct RegConfig {
  /// Ridge weight, relative to trace(Phi' Phi) / p; the intercept is not penalised.
  Scalar ridge = 1e-6;
  /// Twisted precisions are kept >= eps_pd_rel * min diag(base^-1).
  Scalar eps_pd_rel = 1e-4;
  /// Minimum number of finite rows; 0 means 2d + 1.
  Index min_rows = 0;
  /// When false, learning returns the unit twist (BPF behaviour).
  bool enabled = true;
};

/// Backward targets log psi_t^n = log g_t(y_t | X_t^n) + log f_{t+1}(psi_{t+1})(X_t^n).
struct TwistTargets {
  Matrix points;
  Vector log_targets;
};

TwistTargets compute_twist_targets(const ModelSpec& model, const TwistParams& psi_next,
                                   const ParticleSystem& system, const Observation& y);

struct TwistFit {
  TwistParams psi;
  /// Too few finite rows; psi is the unit twist.
  bool degenerate = false;
  /// Some a_j was lowered to keep the twisted kernel proper.
  bool clipped = false;
  Index rows_used = 0;
  /// Residual sum of squares of the unclipped fit.
  Scalar rss = 0.0;
};

/// Ridge least squares of -log targets on (x_j^2, x_j, 1), mapped to psi = exp(-q),
/// then a_j clipped so that base^-1 - 2 diag(a) >= eps_pd I.
TwistFit fit_quadratic_twist(const TwistTargets& targets, const RegConfig& config, const Covariance& base);

/// Targets then fit. The base covariance is Sigma at t = 1 and B otherwise.
TwistFit learn_psi(const ModelSpec& model, const TwistParams& psi_next, const ParticleSystem& system,
                   const Observation& y, const RegConfig& config);

}  // namespace orcsmc
