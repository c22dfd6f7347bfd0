#include "orcsmc/twist.hpp"

namespace orcsmc {

TwistParams TwistParams::unit(Index d) { return TwistParams{Vector::Zero(d), Vector::Zero(d), 0.0}; }

bool TwistParams::is_unit() const { return c == 0.0 && a.isZero(0.0) && b.isZero(0.0); }

bool operator==(const TwistParams& lhs, const TwistParams& rhs) {
  return lhs.c == rhs.c && lhs.a == rhs.a && lhs.b == rhs.b;
}

Scalar log_twist(const TwistParams& psi, const Vector& x) {
  require(x.size() == psi.dim(), "log_twist: dimension mismatch");
  return psi.a.dot(x.cwiseProduct(x)) + psi.b.dot(x) + psi.c;
}

Vector log_twist(const TwistParams& psi, const Matrix& points) {
  require(points.rows() == psi.dim(), "log_twist: dimension mismatch");
  Vector out = points.array().square().matrix().transpose() * psi.a + points.transpose() * psi.b;
  out.array() += psi.c;
  return out;
}

Scalar default_eps_pd(const Covariance& base, Scalar relative) {
  return relative * base.inverse().diagonal().minCoeff();
}

TwistedGaussian::TwistedGaussian(const Covariance& base, const TwistParams& psi) : base_(&base), psi_(psi) {
  require(psi.dim() == base.dim() && psi.b.size() == base.dim(), "TwistedGaussian: dimension mismatch");
  precision_ = base.inverse();
  precision_.diagonal() -= 2.0 * psi.a;
  Eigen::LLT<Matrix> llt(precision_);
  if (llt.info() != Eigen::Success)
    throw TwistIntegrabilityError("twisted precision B^-1 - 2 diag(a) is not positive definite");
  precision_lower_ = llt.matrixL();
  if (!(precision_lower_.diagonal().array() > 0.0).all())
    throw TwistIntegrabilityError("twisted precision B^-1 - 2 diag(a) is not positive definite");
  log_det_ratio_ = 2.0 * precision_lower_.diagonal().array().log().sum() + base.log_det();
}

Matrix TwistedGaussian::eta(const Matrix& means) const {
  return (base_->inverse() * means).colwise() + psi_.b;
}

Vector TwistedGaussian::log_integral(const Matrix& means) const {
  require(means.rows() == base_->dim(), "TwistedGaussian::log_integral: dimension mismatch");
  const Matrix whitened = precision_lower_.triangularView<Eigen::Lower>().solve(eta(means));
  const Matrix base_white = base_->lower().triangularView<Eigen::Lower>().solve(means);
  Vector out = 0.5 * (whitened.colwise().squaredNorm() - base_white.colwise().squaredNorm()).transpose();
  out.array() += psi_.c - 0.5 * log_det_ratio_;
  return out;
}

Matrix TwistedGaussian::sample(const Matrix& means, Rng& rng) const {
  require(means.rows() == base_->dim(), "TwistedGaussian::sample: dimension mismatch");
  Matrix draws = precision_lower_.triangularView<Eigen::Lower>().solve(eta(means));
  draws += standard_normal_matrix(means.rows(), means.cols(), rng);
  // Lambda = L L', so L'^-1 (L^-1 eta + z) ~ N(Lambda^-1 eta, Lambda^-1).
  return precision_lower_.transpose().triangularView<Eigen::Upper>().solve(draws);
}

Vector TwistedGaussian::twisted_mean(const Vector& mean) const {
  const Vector e = eta(mean);
  return precision_lower_.transpose().triangularView<Eigen::Upper>().solve(
      precision_lower_.triangularView<Eigen::Lower>().solve(e));
}

Matrix TwistedGaussian::twisted_covariance() const {
  const Index d = precision_.rows();
  const Matrix Linv = precision_lower_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  return Linv.transpose() * Linv;
}

Scalar log_transition_integral(const ModelSpec& model, const TwistParams& psi, const Vector& x_prev) {
  require(x_prev.size() == model.dim(), "log_transition_integral: dimension mismatch");
  if (psi.is_unit()) return 0.0;
  return TwistedGaussian(model.B(), psi).log_integral(model.A() * x_prev)[0];
}

Scalar log_initial_integral(const ModelSpec& model, const TwistParams& psi) {
  if (psi.is_unit()) return 0.0;
  return TwistedGaussian(model.Sigma(), psi).log_integral(model.m())[0];
}

Vector sample_twisted_transition(const ModelSpec& model, const TwistParams& psi, const Vector& x_prev, Rng& rng) {
  if (psi.is_unit()) return sample_transition(model, x_prev, rng);
  return TwistedGaussian(model.B(), psi).sample(model.A() * x_prev, rng).col(0);
}

Vector sample_twisted_initial(const ModelSpec& model, const TwistParams& psi, Rng& rng) {
  if (psi.is_unit()) return sample_initial(model, rng);
  return TwistedGaussian(model.Sigma(), psi).sample(model.m(), rng).col(0);
}

}  // namespace orcsmc
