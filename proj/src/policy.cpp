#include "orcsmc/policy.hpp"

#include <cmath>

namespace orcsmc {

TwistTargets compute_twist_targets(const ModelSpec& model, const TwistParams& psi_next,
                                   const ParticleSystem& system, const Observation& y) {
  require(system.dim() == model.dim(), "compute_twist_targets: dimension mismatch");
  TwistTargets out;
  out.points = system.positions;
  const Index n = system.positions.cols();
  out.log_targets.resize(n);
  for (Index i = 0; i < n; ++i) out.log_targets[i] = log_obs_density(model, y, system.positions.col(i));
  if (!psi_next.is_unit()) {
    const TwistedGaussian kernel(model.B(), psi_next);
    out.log_targets += kernel.log_integral(model.A() * system.positions);
  }
  return out;
}

TwistFit fit_quadratic_twist(const TwistTargets& targets, const RegConfig& config, const Covariance& base) {
  const Index d = targets.points.rows();
  require(base.dim() == d, "fit_quadratic_twist: base covariance dimension mismatch");
  require(targets.log_targets.size() == targets.points.cols(), "fit_quadratic_twist: size mismatch");
  require(config.ridge >= 0.0, "fit_quadratic_twist: ridge must be non-negative");
  const Index p = 2 * d + 1;
  const Index min_rows = config.min_rows > 0 ? config.min_rows : p;

  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(targets.log_targets.size()));
  for (Index i = 0; i < targets.log_targets.size(); ++i)
    if (std::isfinite(targets.log_targets[i]) && targets.points.col(i).allFinite()) rows.push_back(i);

  TwistFit fit;
  fit.rows_used = static_cast<Index>(rows.size());
  if (fit.rows_used < min_rows) {
    fit.psi = TwistParams::unit(d);
    fit.degenerate = true;
    return fit;
  }

  const Index n = fit.rows_used;
  Matrix design(n, p);
  Vector response(n);
  for (Index r = 0; r < n; ++r) {
    const auto x = targets.points.col(rows[static_cast<std::size_t>(r)]);
    design.row(r).head(d) = x.array().square().transpose();
    design.row(r).segment(d, d) = x.transpose();
    design(r, p - 1) = 1.0;
    response[r] = -targets.log_targets[rows[static_cast<std::size_t>(r)]];
  }

  Vector coeffs;
  if (config.ridge > 0.0) {
    const Scalar scale = config.ridge * design.colwise().squaredNorm().sum() / static_cast<Scalar>(p);
    Matrix augmented = Matrix::Zero(n + 2 * d, p);
    augmented.topRows(n) = design;
    augmented.bottomLeftCorner(2 * d, 2 * d).diagonal().setConstant(std::sqrt(scale));
    Vector rhs = Vector::Zero(n + 2 * d);
    rhs.head(n) = response;
    coeffs = augmented.completeOrthogonalDecomposition().solve(rhs);
  } else {
    coeffs = design.completeOrthogonalDecomposition().solve(response);
  }
  fit.rss = (design * coeffs - response).squaredNorm();

  fit.psi.a = -coeffs.head(d);
  fit.psi.b = -coeffs.segment(d, d);
  fit.psi.c = -coeffs[p - 1];

  const Matrix& precision = base.inverse();
  const Scalar eps = default_eps_pd(base, config.eps_pd_rel);
  if (base.is_diagonal()) {
    for (Index j = 0; j < d; ++j) {
      const Scalar bound = 0.5 * (precision(j, j) - eps);
      if (fit.psi.a[j] > bound) {
        fit.psi.a[j] = bound;
        fit.clipped = true;
      }
    }
  } else {
    const Scalar lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(precision, Eigen::EigenvaluesOnly).eigenvalues()[0];
    const Scalar bound = 0.5 * (lambda_min - eps);
    for (Index j = 0; j < d; ++j) {
      if (fit.psi.a[j] > bound) {
        fit.psi.a[j] = bound;
        fit.clipped = true;
      }
    }
  }
  return fit;
}

TwistFit learn_psi(const ModelSpec& model, const TwistParams& psi_next, const ParticleSystem& system,
                   const Observation& y, const RegConfig& config) {
  if (!config.enabled) {
    TwistFit fit;
    fit.psi = TwistParams::unit(model.dim());
    return fit;
  }
  const Covariance& base = system.t == 1 ? model.Sigma() : model.B();
  return fit_quadratic_twist(compute_twist_targets(model, psi_next, system, y), config, base);
}

}  // namespace orcsmc
