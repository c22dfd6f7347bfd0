#pragma once

#include "orcsmc/model.hpp"

namespace orcsmc {

/// Exponential-quadratic twisting function with diagonal quadratic part:
///   psi(x) = exp(sum_j a_j x_j^2 + sum_j b_j x_j + c).
struct TwistParams {
  Vector a;
  Vector b;
  Scalar c = 0.0;

  /// psi == 1.
  static TwistParams unit(Index d);

  Index dim() const noexcept { return a.size(); }
  bool is_unit() const;

  friend bool operator==(const TwistParams& lhs, const TwistParams& rhs);
};

Scalar log_twist(const TwistParams& psi, const Vector& x);

/// log psi at every column of `points`.
Vector log_twist(const TwistParams& psi, const Matrix& points);

/// Default floor on the smallest eigenvalue of the twisted precision: 1e-4 * min diag(base^-1).
Scalar default_eps_pd(const Covariance& base, Scalar relative = 1e-4);

/// Gaussian kernel N(mean, base) multiplied by a twist, precomputed for one (time step, twist).
///
/// With Lambda = base^-1 - 2 diag(a) and eta = base^-1 mean + b:
///   log int N(x; mean, base) psi(x) dx = c - logdet(Lambda base)/2 + eta' Lambda^-1 eta / 2
///                                         - mean' base^-1 mean / 2,
/// and the normalised product is N(Lambda^-1 eta, Lambda^-1).
class TwistedGaussian {
 public:
  /// Throws TwistIntegrabilityError if Lambda is not positive definite.
  TwistedGaussian(const Covariance& base, const TwistParams& psi);

  /// log of the integral for each column of `means`.
  Vector log_integral(const Matrix& means) const;

  /// One draw per column of `means` from the twisted kernel.
  Matrix sample(const Matrix& means, Rng& rng) const;

  Vector twisted_mean(const Vector& mean) const;
  Matrix twisted_covariance() const;
  const Matrix& precision() const noexcept { return precision_; }

 private:
  Matrix eta(const Matrix& means) const;

  const Covariance* base_;
  TwistParams psi_;
  Matrix precision_;
  Matrix precision_lower_;
  Scalar log_det_ratio_ = 0.0;  // logdet(Lambda * base)
};

/// log f(psi)(x_prev) = log int N(x; A x_prev, B) psi(x) dx.
Scalar log_transition_integral(const ModelSpec& model, const TwistParams& psi, const Vector& x_prev);

/// log mu(psi) = log int N(x; m, Sigma) psi(x) dx.
Scalar log_initial_integral(const ModelSpec& model, const TwistParams& psi);

Vector sample_twisted_transition(const ModelSpec& model, const TwistParams& psi, const Vector& x_prev, Rng& rng);
Vector sample_twisted_initial(const ModelSpec& model, const TwistParams& psi, Rng& rng);

}  // namespace orcsmc
