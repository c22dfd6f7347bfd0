#pragma once

#include "orcsmc/core.hpp"

#include <variant>
#include <vector>

namespace orcsmc {

/// Gaussian covariance with its Cholesky factor and inverse, built once.
class Covariance {
 public:
  Covariance() = default;
  /// Throws ContractViolation unless `cov` is symmetric positive definite.
  explicit Covariance(const Matrix& cov, const char* name = "covariance");

  const Matrix& matrix() const noexcept { return cov_; }
  const Matrix& lower() const noexcept { return lower_; }
  const Matrix& inverse() const noexcept { return inverse_; }
  Scalar log_det() const noexcept { return log_det_; }
  Index dim() const noexcept { return cov_.rows(); }
  bool is_diagonal() const noexcept { return diagonal_; }

  /// log N(r; 0, cov) for a residual r.
  Scalar log_density(const Vector& residual) const;

 private:
  Matrix cov_;
  Matrix lower_;
  Matrix inverse_;
  Scalar log_det_ = 0.0;
  bool diagonal_ = false;
};

struct LinearGaussianObs {
  Matrix C;
  Covariance D;
};

struct StochasticVolatilityObs {
  Scalar beta = 1.0;
};

struct BinomialLogisticObs {
  int trials = 1;
};

using ObservationModel = std::variant<LinearGaussianObs, StochasticVolatilityObs, BinomialLogisticObs>;

/// Observation vector. Binomial counts are stored as exact integer-valued doubles.
using Observation = Vector;

/// Homogeneous HMM with linear-Gaussian dynamics:
///   X_1 ~ N(m, Sigma),  X_t | X_{t-1} ~ N(A X_{t-1}, B),  Y_t | X_t ~ g(. | X_t).
/// Immutable once built.
class ModelSpec {
 public:
  ModelSpec(Vector m, const Matrix& Sigma, Matrix A, const Matrix& B, ObservationModel obs);

  Index dim() const noexcept { return m_.size(); }
  Index obs_dim() const noexcept;

  const Vector& m() const noexcept { return m_; }
  const Covariance& Sigma() const noexcept { return sigma_; }
  const Matrix& A() const noexcept { return A_; }
  const Covariance& B() const noexcept { return B_; }
  const ObservationModel& obs() const noexcept { return obs_; }

  bool is_linear_gaussian() const noexcept { return std::holds_alternative<LinearGaussianObs>(obs_); }

 private:
  Vector m_;
  Covariance sigma_;
  Matrix A_;
  Covariance B_;
  ObservationModel obs_;
};

/// log(1 / (1 + exp(-z))) without overflow.
Scalar log_logistic(Scalar z);

/// log g(y | x). Never NaN; -inf only at the edge of the binomial support.
Scalar log_obs_density(const ModelSpec& model, const Observation& y, const Vector& x);

/// Throws DomainError if `y` is not a valid observation for the model.
void validate_observation(const ModelSpec& model, const Observation& y);

Vector sample_initial(const ModelSpec& model, Rng& rng);
Vector sample_transition(const ModelSpec& model, const Vector& x_prev, Rng& rng);
Observation sample_observation(const ModelSpec& model, const Vector& x, Rng& rng);

/// Column-batched transition: column n of the result ~ N(A * prev.col(n), B).
/// Draws are consumed particle by particle, coordinate by coordinate.
Matrix propagate_transition(const ModelSpec& model, const Matrix& prev, Rng& rng);
Matrix propagate_initial(const ModelSpec& model, Index n, Rng& rng);

struct Trajectory {
  std::vector<Vector> x;
  std::vector<Observation> y;
};

Trajectory simulate(const ModelSpec& model, int T, Rng& rng);

/// Fill a d x n matrix with standard normal draws in column-major order.
Matrix standard_normal_matrix(Index d, Index n, Rng& rng);

// Model families used in the experiments. Parameters default to the published settings.
ModelSpec make_lg_diagonal(int d, Scalar alpha = 0.415);
ModelSpec make_lg_nondiagonal(int d, Scalar alpha = 0.415);
ModelSpec make_stochastic_volatility(Scalar alpha = 0.986, Scalar sigma = 0.13, Scalar beta = 0.69);
ModelSpec make_binomial(int d, int trials = 50, Scalar alpha = 0.99, Scalar sigma2 = 0.11);

}  // namespace orcsmc
