#include "orcsmc/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace orcsmc {

ParticleSystem ParticleSystem::initial(Index d, Index n) {
  require(n >= 1, "ParticleSystem: N must be >= 1");
  ParticleSystem p;
  p.t = 0;
  p.positions = Matrix::Zero(d, n);
  p.log_weights = Vector::Constant(n, -std::log(static_cast<Scalar>(n)));
  p.ancestors = IndexVector::LinSpaced(n, 0, n - 1);
  p.log_z = 0.0;
  p.ess_before_resampling = static_cast<Scalar>(n);
  return p;
}

Scalar log_sum_exp(const Vector& logw) {
  if (logw.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar max = logw.maxCoeff();
  if (!std::isfinite(max)) return max;
  return max + std::log((logw.array() - max).exp().sum());
}

NormalizedWeights normalize_log_weights(const Vector& logw) {
  require(logw.size() > 0, "normalize_log_weights: empty input");
  const Scalar lse = log_sum_exp(logw);
  if (std::isnan(lse) || lse == -std::numeric_limits<Scalar>::infinity())
    throw DegenerateWeightsError(-1, "all log-weights are -inf");
  if (lse == std::numeric_limits<Scalar>::infinity())
    throw DegenerateWeightsError(-1, "log-weight is +inf");
  NormalizedWeights out;
  out.log_sum = lse;
  out.log_weights = logw.array() - lse;
  return out;
}

Scalar ess(const Vector& log_weights) { return 1.0 / (2.0 * log_weights.array()).exp().sum(); }

namespace {

// Inverse-CDF draw from unnormalised non-negative weights.
Index draw_index(const std::vector<Scalar>& cumulative, Scalar u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
  const auto idx = static_cast<Index>(it - cumulative.begin());
  return std::min<Index>(idx, static_cast<Index>(cumulative.size()) - 1);
}

std::vector<Scalar> cumulative_sum(const Vector& w) {
  std::vector<Scalar> c(static_cast<std::size_t>(w.size()));
  std::partial_sum(w.data(), w.data() + w.size(), c.begin());
  return c;
}

}  // namespace

IndexVector residual_multinomial_resample(const Vector& weights, Rng& rng) {
  const Index n = weights.size();
  require(n >= 1, "resample: empty weights");
  IndexVector out(n);
  Vector residual(n);
  Index filled = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar scaled = static_cast<Scalar>(n) * weights[i];
    Index copies = static_cast<Index>(std::floor(scaled));
    copies = std::min(copies, n - filled);
    residual[i] = std::max<Scalar>(scaled - static_cast<Scalar>(copies), 0.0);
    for (Index k = 0; k < copies; ++k) out[filled++] = i;
  }
  if (filled == n) return out;
  const auto cumulative = cumulative_sum(residual);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  if (!(cumulative.back() > 0.0)) {
    // Rounding left no residual mass; fall back to the weights themselves.
    const auto cw = cumulative_sum(weights);
    while (filled < n) out[filled++] = draw_index(cw, unif(rng));
    return out;
  }
  while (filled < n) out[filled++] = draw_index(cumulative, unif(rng));
  return out;
}

IndexVector multinomial_resample(const Vector& weights, Rng& rng) {
  const Index n = weights.size();
  require(n >= 1, "resample: empty weights");
  const auto cumulative = cumulative_sum(weights);
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  IndexVector out(n);
  for (Index i = 0; i < n; ++i) out[i] = draw_index(cumulative, unif(rng));
  return out;
}

IndexVector systematic_resample(const Vector& weights, Rng& rng) {
  const Index n = weights.size();
  require(n >= 1, "resample: empty weights");
  const auto cumulative = cumulative_sum(weights);
  const Scalar total = cumulative.back();
  std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
  const Scalar u0 = unif(rng);
  IndexVector out(n);
  Index j = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar u = (u0 + static_cast<Scalar>(i)) / static_cast<Scalar>(n) * total;
    while (j < n - 1 && cumulative[static_cast<std::size_t>(j)] <= u) ++j;
    out[i] = j;
  }
  return out;
}

IndexVector resample(ResamplingScheme scheme, const Vector& weights, Rng& rng) {
  switch (scheme) {
    case ResamplingScheme::kResidualMultinomial:
      return residual_multinomial_resample(weights, rng);
    case ResamplingScheme::kMultinomial:
      return multinomial_resample(weights, rng);
    case ResamplingScheme::kSystematic:
      return systematic_resample(weights, rng);
  }
  throw ContractViolation("resample: unknown scheme");
}

Vector weighted_mean(const ParticleSystem& system) {
  const Vector w = system.log_weights.array().exp();
  return system.positions * w;
}

Matrix weighted_covariance(const ParticleSystem& system) {
  const Vector w = system.log_weights.array().exp();
  const Vector mean = system.positions * w;
  const Matrix centred = system.positions.colwise() - mean;
  return centred * w.asDiagonal() * centred.transpose();
}

void LineageBuffer::push(const ParticleSystem& system) {
  if (steps_.empty()) {
    start_ = system.t;
  } else if (system.t != end() + 1) {
    throw ContractViolation("LineageBuffer: time steps must be contiguous");
  }
  steps_.push_back(Step{system.positions, system.ancestors});
}

void LineageBuffer::discard_before(int t) {
  while (!steps_.empty() && start_ < t) {
    steps_.pop_front();
    ++start_;
  }
}

const Matrix& LineageBuffer::positions(int t) const {
  require(t >= start_ && t <= end(), "LineageBuffer: time outside buffer");
  return steps_[static_cast<std::size_t>(t - start_)].positions;
}

const IndexVector& LineageBuffer::ancestors(int t) const {
  require(t >= start_ && t <= end(), "LineageBuffer: time outside buffer");
  return steps_[static_cast<std::size_t>(t - start_)].ancestors;
}

PathSet reconstruct_paths(const LineageBuffer& buffer, const ParticleSystem& final_system) {
  require(!buffer.empty(), "reconstruct_paths: empty buffer");
  require(buffer.end() == final_system.t, "reconstruct_paths: buffer must end at the final system's time");
  const Index n = final_system.size();
  PathSet out;
  out.start = buffer.start();
  out.log_weights = final_system.log_weights;
  out.paths.resize(buffer.size());
  IndexVector lineage = IndexVector::LinSpaced(n, 0, n - 1);
  for (int s = buffer.end(); s >= buffer.start(); --s) {
    const Matrix& pos = buffer.positions(s);
    require(pos.cols() == n, "reconstruct_paths: particle count changed");
    Matrix& path = out.paths[static_cast<std::size_t>(s - buffer.start())];
    path.resize(pos.rows(), n);
    for (Index i = 0; i < n; ++i) path.col(i) = pos.col(lineage[i]);
    const IndexVector& anc = buffer.ancestors(s);
    for (Index i = 0; i < n; ++i) lineage[i] = anc[lineage[i]];
  }
  return out;
}

}  // namespace orcsmc
