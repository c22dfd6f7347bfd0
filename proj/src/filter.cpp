#include "orcsmc/filter.hpp"

#include <cmath>

namespace orcsmc {

namespace {

// Resampling decision and ancestor draw on normalised weights V (Lines 3-7).
void select_ancestors(const Vector& log_v, const FilterOptions& options, Rng& rng, ParticleSystem& next,
                      Vector& log_v_after) {
  const Index n = log_v.size();
  next.ess_before_resampling = ess(log_v);
  const bool trigger =
      options.force_resample || next.ess_before_resampling < options.kappa_ess * static_cast<Scalar>(n);
  if (trigger) {
    next.ancestors = resample(options.scheme, log_v.array().exp().matrix(), rng);
    log_v_after = Vector::Constant(n, -std::log(static_cast<Scalar>(n)));
    next.resampled = true;
  } else {
    next.ancestors = IndexVector::LinSpaced(n, 0, n - 1);
    log_v_after = log_v;
    next.resampled = false;
  }
}

Matrix gather(const Matrix& positions, const IndexVector& ancestors) {
  Matrix out(positions.rows(), ancestors.size());
  for (Index i = 0; i < ancestors.size(); ++i) out.col(i) = positions.col(ancestors[i]);
  return out;
}

// Second weight update (Lines 9-10).
void reweight(const ModelSpec& model, const TwistParams* psi, const Observation& y, const Vector& log_v,
              ParticleSystem& next) {
  const Index n = next.positions.cols();
  Vector logw(n);
  for (Index i = 0; i < n; ++i) logw[i] = log_v[i] + log_obs_density(model, y, next.positions.col(i));
  if (psi != nullptr) logw -= log_twist(*psi, next.positions);
  try {
    NormalizedWeights nw = normalize_log_weights(logw);
    next.log_z += nw.log_sum;
    next.log_weights = std::move(nw.log_weights);
  } catch (const DegenerateWeightsError&) {
    throw DegenerateWeightsError(next.t, "second weight update: all particles have zero weight");
  }
}

}  // namespace

ParticleSystem psi_apf_step(const ModelSpec& model, const TwistParams& psi, const ParticleSystem& prev,
                            const Observation& y, const FilterOptions& options, Rng& rng) {
  if (psi.is_unit()) return bootstrap_step(model, prev, y, options, rng);
  return twisted_apf_step(model, psi, prev, y, options, rng);
}

ParticleSystem twisted_apf_step(const ModelSpec& model, const TwistParams& psi, const ParticleSystem& prev,
                                const Observation& y, const FilterOptions& options, Rng& rng) {
  require(psi.dim() == model.dim(), "psi_apf_step: twist dimension mismatch");
  require(prev.dim() == model.dim(), "psi_apf_step: particle dimension mismatch");

  const Index n = prev.size();
  ParticleSystem next;
  next.t = prev.t + 1;
  next.log_z = prev.log_z;
  const bool initial = prev.t == 0;
  const TwistedGaussian kernel(initial ? model.Sigma() : model.B(), psi);

  // Lines 1-2: v_n = W_{t-1}^n f_t(psi_t)(X_{t-1}^n).
  Vector log_v;
  if (initial) {
    log_v = prev.log_weights.array() + kernel.log_integral(model.m())[0];
  } else {
    log_v = prev.log_weights + kernel.log_integral(model.A() * prev.positions);
  }
  NormalizedWeights first;
  try {
    first = normalize_log_weights(log_v);
  } catch (const DegenerateWeightsError&) {
    throw DegenerateWeightsError(next.t, "first weight update: all particles have zero weight");
  }
  next.log_z += first.log_sum;

  Vector log_v_after;
  select_ancestors(first.log_weights, options, rng, next, log_v_after);

  // Line 8: X_t^n ~ f_t^psi(. | X_{t-1}^{A^n}).
  if (initial) {
    next.positions = kernel.sample(model.m().replicate(1, n), rng);
  } else {
    next.positions = kernel.sample(model.A() * gather(prev.positions, next.ancestors), rng);
  }
  reweight(model, &psi, y, log_v_after, next);
  return next;
}

ParticleSystem bootstrap_step(const ModelSpec& model, const ParticleSystem& prev, const Observation& y,
                              const FilterOptions& options, Rng& rng) {
  require(prev.dim() == model.dim(), "bootstrap_step: particle dimension mismatch");
  const Index n = prev.size();
  ParticleSystem next;
  next.t = prev.t + 1;
  next.log_z = prev.log_z;

  Vector log_v_after;
  select_ancestors(prev.log_weights, options, rng, next, log_v_after);
  if (prev.t == 0) {
    next.positions = propagate_initial(model, n, rng);
  } else {
    next.positions = propagate_transition(model, gather(prev.positions, next.ancestors), rng);
  }
  reweight(model, nullptr, y, log_v_after, next);
  return next;
}

StepSummary summarize(const ParticleSystem& system) {
  StepSummary s;
  s.t = system.t;
  s.log_z = system.log_z;
  s.ess = ess(system.log_weights);
  s.ess_before_resampling = system.ess_before_resampling;
  s.resampled = system.resampled;
  s.mean = weighted_mean(system);
  return s;
}

namespace {

template <class Step>
FilterRun fold_filter(const ModelSpec& model, const std::vector<Observation>& ys, Index n_particles,
                      bool keep_systems, Step&& step) {
  require(!ys.empty(), "run_filter: need at least one observation");
  FilterRun out;
  ParticleSystem current = ParticleSystem::initial(model.dim(), n_particles);
  if (keep_systems) out.systems.push_back(current);
  out.steps.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    current = step(i, current);
    out.steps.push_back(summarize(current));
    if (keep_systems) out.systems.push_back(current);
  }
  out.log_z = current.log_z;
  return out;
}

}  // namespace

FilterRun run_filter(const ModelSpec& model, const std::vector<TwistParams>& twists,
                     const std::vector<Observation>& ys, Index n_particles, const FilterOptions& options,
                     const StreamFactory& streams, bool keep_systems) {
  require(twists.size() == ys.size(), "run_filter: need one twist per time step");
  return fold_filter(model, ys, n_particles, keep_systems, [&](std::size_t i, const ParticleSystem& prev) {
    Rng rng = streams.at(i + 1);
    return psi_apf_step(model, twists[i], prev, ys[i], options, rng);
  });
}

FilterRun bootstrap_filter(const ModelSpec& model, const std::vector<Observation>& ys, Index n_particles,
                           const FilterOptions& options, const StreamFactory& streams, bool keep_systems) {
  return fold_filter(model, ys, n_particles, keep_systems, [&](std::size_t i, const ParticleSystem& prev) {
    Rng rng = streams.at(i + 1);
    return bootstrap_step(model, prev, ys[i], options, rng);
  });
}

}  // namespace orcsmc
