#pragma once

#include "orcsmc/model.hpp"
#include "orcsmc/twist.hpp"

#include <vector>

namespace orcsmc {

// ---------------------------------------------------------------------------
// Kalman filter / RTS smoother
// ---------------------------------------------------------------------------

struct KalmanResult {
  std::vector<Vector> filtered_mean;
  std::vector<Matrix> filtered_cov;
  std::vector<Vector> predicted_mean;
  std::vector<Matrix> predicted_cov;
  std::vector<Vector> smoothed_mean;
  std::vector<Matrix> smoothed_cov;
  /// log p(y_{1:t}) for t = 1..T.
  std::vector<Scalar> log_z_path;
  Scalar log_z = 0.0;
};

/// Throws UnsupportedOracleError unless the observation model is linear-Gaussian.
KalmanResult kalman_filter_smoother(const ModelSpec& model, const std::vector<Observation>& ys);

/// Exact twists psi_t(x) = p(y_{t:T} | x_t) for a linear-Gaussian model, computed
/// from the stacked Gaussian law of y_{t:T} given x_t. Throws UnsupportedOracleError
/// if the exact twist has an off-diagonal quadratic part.
std::vector<TwistParams> exact_twists(const ModelSpec& model, const std::vector<Observation>& ys);

// ---------------------------------------------------------------------------
// Dense-grid filter for d = 1
// ---------------------------------------------------------------------------

struct GridSpec {
  Scalar lo = -10.0;
  Scalar hi = 10.0;
  Index points = 4001;
};

/// Centre m, half-width `sds` times the larger of sqrt(Sigma) and the stationary sd.
GridSpec default_grid(const ModelSpec& model, Scalar sds = 10.0, Index points = 4001);

struct GridFilterResult {
  Vector nodes;
  /// Filtering densities on the nodes, t = 1..T.
  std::vector<Vector> densities;
  Scalar log_z = 0.0;
  /// |log_z(n) - log_z(2n - 1)| when the refinement check ran, else NaN.
  Scalar richardson_gap = 0.0;
  bool coarse_warning = false;
};

/// Forward recursion on a trapezoid grid. With `check` the run is repeated on a
/// grid with twice the resolution and `coarse_warning` set when the two log_z
/// differ by more than `tolerance`.
GridFilterResult grid_filter_logz(const ModelSpec& model, const std::vector<Observation>& ys, const GridSpec& grid,
                                  bool check = false, Scalar tolerance = 1e-5);

/// Trapezoid weights on a uniform grid.
Vector trapezoid_weights(Index points, Scalar step);

// ---------------------------------------------------------------------------
// Quadrature for twisted Gaussian integrals (d <= 2)
// ---------------------------------------------------------------------------

/// log of the tensor-trapezoid approximation of int N(x; mean, cov) psi(x) dx on [lo, hi]^d.
Scalar quadrature_log_twisted_integral(const Vector& mean, const Matrix& cov, const TwistParams& psi,
                                       Scalar lo = -12.0, Scalar hi = 12.0, Index points = 4001);

// ---------------------------------------------------------------------------
// Wasserstein-1 distance to a Gaussian
// ---------------------------------------------------------------------------

Scalar normal_cdf(Scalar z);
Scalar normal_pdf(Scalar z);

/// Root of normal_cdf(z) = level inside [lo, hi] by bisection.
Scalar bracket_normal_quantile(Scalar level, Scalar lo, Scalar hi);

/// int |F_hat(x) - Phi((x - mean)/sd)| dx for the weighted empirical CDF F_hat,
/// evaluated exactly segment by segment.
Scalar wasserstein1_to_gaussian(const Vector& samples, const Vector& weights, Scalar mean, Scalar sd);

/// (x - mean) / sd per sample; weights are unchanged and not needed.
Vector standardize_marginal(const Vector& samples, Scalar mean, Scalar sd);

}  // namespace orcsmc
