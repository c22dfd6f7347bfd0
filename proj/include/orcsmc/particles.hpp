#pragma once

#include "orcsmc/core.hpp"

#include <deque>
#include <vector>

namespace orcsmc {

/// N weighted particles at one time step.
///
/// `positions` is d x N (one column per particle); `log_weights` are normalised
/// (logsumexp == 0); `ancestors[n]` indexes the previous system (0-based).
/// `log_z` is the running log normalising-constant estimate.
struct ParticleSystem {
  int t = 0;
  Matrix positions;
  Vector log_weights;
  IndexVector ancestors;
  Scalar log_z = 0.0;
  bool resampled = false;
  Scalar ess_before_resampling = 0.0;

  Index size() const noexcept { return log_weights.size(); }
  Index dim() const noexcept { return positions.rows(); }

  /// Time-0 system: uniform weights, log_z = 0, zero positions, identity ancestors.
  static ParticleSystem initial(Index d, Index n);
};

struct NormalizedWeights {
  Vector log_weights;
  Scalar log_sum = 0.0;
};

/// Numerically stable logsumexp; -inf for an all -inf input.
Scalar log_sum_exp(const Vector& logw);

/// Throws DegenerateWeightsError (t = -1) if every entry is -inf.
NormalizedWeights normalize_log_weights(const Vector& logw);

/// 1 / sum_n W_n^2 for normalised log-weights.
Scalar ess(const Vector& log_weights);

enum class ResamplingScheme { kResidualMultinomial, kMultinomial, kSystematic };

/// Deterministic copies floor(N V_n) grouped ascending by n, followed by
/// N - sum floor(N V_n) i.i.d. draws proportional to the residuals.
IndexVector residual_multinomial_resample(const Vector& weights, Rng& rng);
IndexVector multinomial_resample(const Vector& weights, Rng& rng);
IndexVector systematic_resample(const Vector& weights, Rng& rng);

IndexVector resample(ResamplingScheme scheme, const Vector& weights, Rng& rng);

/// Weighted mean and covariance of a system.
Vector weighted_mean(const ParticleSystem& system);
Matrix weighted_covariance(const ParticleSystem& system);

/// Positions and ancestors for a contiguous run of time steps.
class LineageBuffer {
 public:
  LineageBuffer() = default;
  explicit LineageBuffer(int start) : start_(start) {}

  void push(const ParticleSystem& system);
  /// Drop steps older than `t`.
  void discard_before(int t);

  int start() const noexcept { return start_; }
  int end() const noexcept { return start_ + static_cast<int>(steps_.size()) - 1; }
  bool empty() const noexcept { return steps_.empty(); }
  std::size_t size() const noexcept { return steps_.size(); }

  const Matrix& positions(int t) const;
  const IndexVector& ancestors(int t) const;

 private:
  struct Step {
    Matrix positions;
    IndexVector ancestors;
  };
  int start_ = 1;
  std::deque<Step> steps_;
};

/// Particle paths over [buffer.start(), final.t].
///
/// `paths[s - start]` is d x N, column n being the position at time s of
/// particle n's ancestral line. Weights are `final.log_weights`.
struct PathSet {
  int start = 1;
  std::vector<Matrix> paths;
  Vector log_weights;
};

PathSet reconstruct_paths(const LineageBuffer& buffer, const ParticleSystem& final_system);

}  // namespace orcsmc
