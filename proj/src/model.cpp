#include "orcsmc/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace orcsmc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Scalar log_binomial_coefficient(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

Covariance::Covariance(const Matrix& cov, const char* name) : cov_(cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw ContractViolation(std::string(name) + ": must be a non-empty square matrix");
  if (!cov.isApprox(cov.transpose(), 1e-12))
    throw ContractViolation(std::string(name) + ": must be symmetric");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
    throw ContractViolation(std::string(name) + ": must be positive definite");
  lower_ = llt.matrixL();
  inverse_ = llt.solve(Matrix::Identity(cov.rows(), cov.cols()));
  inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
  const Matrix off = cov - Matrix(cov.diagonal().asDiagonal());
  diagonal_ = off.isZero(0.0);
}

Scalar Covariance::log_density(const Vector& residual) const {
  const Vector z = lower_.triangularView<Eigen::Lower>().solve(residual);
  return -0.5 * (static_cast<Scalar>(dim()) * kLog2Pi + log_det_ + z.squaredNorm());
}

ModelSpec::ModelSpec(Vector m, const Matrix& Sigma, Matrix A, const Matrix& B, ObservationModel obs)
    : m_(std::move(m)),
      sigma_(Sigma, "Sigma"),
      A_(std::move(A)),
      B_(B, "B"),
      obs_(std::move(obs)) {
  const Index d = m_.size();
  require(d > 0, "ModelSpec: state dimension must be positive");
  require(sigma_.dim() == d, "ModelSpec: Sigma dimension mismatch");
  require(A_.rows() == d && A_.cols() == d, "ModelSpec: A dimension mismatch");
  require(B_.dim() == d, "ModelSpec: B dimension mismatch");
  std::visit(overloaded{
                 [d](const LinearGaussianObs& o) {
                   require(o.C.cols() == d, "ModelSpec: C must have d columns");
                   require(o.C.rows() == o.D.dim(), "ModelSpec: C rows must match D");
                 },
                 [d](const StochasticVolatilityObs& o) {
                   require(d == 1, "ModelSpec: stochastic volatility requires d = 1");
                   require(o.beta > 0.0, "ModelSpec: beta must be positive");
                 },
                 [](const BinomialLogisticObs& o) { require(o.trials >= 1, "ModelSpec: M must be >= 1"); },
             },
             obs_);
}

Index ModelSpec::obs_dim() const noexcept {
  return std::visit(overloaded{
                        [](const LinearGaussianObs& o) { return o.C.rows(); },
                        [](const StochasticVolatilityObs&) { return Index{1}; },
                        [this](const BinomialLogisticObs&) { return dim(); },
                    },
                    obs_);
}

Scalar log_logistic(Scalar z) {
  // -log1p(exp(-z)), split by sign to avoid overflow.
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

void validate_observation(const ModelSpec& model, const Observation& y) {
  if (y.size() != model.obs_dim()) throw ContractViolation("observation dimension mismatch");
  if (const auto* bin = std::get_if<BinomialLogisticObs>(&model.obs())) {
    for (Index j = 0; j < y.size(); ++j) {
      const Scalar v = y[j];
      if (!(v >= 0.0 && v <= bin->trials) || v != std::floor(v))
        throw DomainError("binomial observation outside {0,...,M}");
    }
  } else if (!y.allFinite()) {
    throw DomainError("observation must be finite");
  }
}

Scalar log_obs_density(const ModelSpec& model, const Observation& y, const Vector& x) {
  require(x.size() == model.dim(), "log_obs_density: state dimension mismatch");
  require(y.size() == model.obs_dim(), "log_obs_density: observation dimension mismatch");
  return std::visit(
      overloaded{
          [&](const LinearGaussianObs& o) { return o.D.log_density(y - o.C * x); },
          [&](const StochasticVolatilityObs& o) {
            const Scalar log_var = 2.0 * std::log(o.beta) + x[0];
            return -0.5 * (kLog2Pi + log_var + y[0] * y[0] * std::exp(-x[0] - 2.0 * std::log(o.beta)));
          },
          [&](const BinomialLogisticObs& o) {
            Scalar total = 0.0;
            for (Index j = 0; j < y.size(); ++j) {
              const Scalar yj = y[j];
              if (!(yj >= 0.0 && yj <= o.trials) || yj != std::floor(yj))
                throw DomainError("binomial observation outside {0,...,M}");
              const int k = static_cast<int>(yj);
              const int rest = o.trials - k;
              total += log_binomial_coefficient(o.trials, k);
              // 0 * log(0) counts as 0 so that x = +-inf stays well defined.
              if (k > 0) total += k * log_logistic(x[j]);
              if (rest > 0) total += rest * log_logistic(-x[j]);
            }
            if (std::isnan(total)) return -std::numeric_limits<Scalar>::infinity();
            return total;
          },
      },
      model.obs());
}

Matrix standard_normal_matrix(Index d, Index n, Rng& rng) {
  std::normal_distribution<Scalar> normal;
  Matrix z(d, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) z(j, i) = normal(rng);
  return z;
}

Matrix propagate_transition(const ModelSpec& model, const Matrix& prev, Rng& rng) {
  require(prev.rows() == model.dim(), "propagate_transition: dimension mismatch");
  const Matrix z = standard_normal_matrix(model.dim(), prev.cols(), rng);
  return model.A() * prev + model.B().lower() * z;
}

Matrix propagate_initial(const ModelSpec& model, Index n, Rng& rng) {
  const Matrix z = standard_normal_matrix(model.dim(), n, rng);
  return (model.Sigma().lower() * z).colwise() + model.m();
}

Vector sample_initial(const ModelSpec& model, Rng& rng) { return propagate_initial(model, 1, rng).col(0); }

Vector sample_transition(const ModelSpec& model, const Vector& x_prev, Rng& rng) {
  return propagate_transition(model, x_prev, rng).col(0);
}

Observation sample_observation(const ModelSpec& model, const Vector& x, Rng& rng) {
  require(x.size() == model.dim(), "sample_observation: dimension mismatch");
  return std::visit(overloaded{
                        [&](const LinearGaussianObs& o) -> Observation {
                          const Matrix z = standard_normal_matrix(o.C.rows(), 1, rng);
                          return o.C * x + o.D.lower() * z.col(0);
                        },
                        [&](const StochasticVolatilityObs& o) -> Observation {
                          std::normal_distribution<Scalar> normal;
                          Observation y(1);
                          y[0] = o.beta * std::exp(0.5 * x[0]) * normal(rng);
                          return y;
                        },
                        [&](const BinomialLogisticObs& o) -> Observation {
                          Observation y(x.size());
                          for (Index j = 0; j < x.size(); ++j) {
                            const Scalar p = std::exp(log_logistic(x[j]));
                            std::binomial_distribution<int> binom(o.trials, p);
                            y[j] = binom(rng);
                          }
                          return y;
                        },
                    },
                    model.obs());
}

Trajectory simulate(const ModelSpec& model, int T, Rng& rng) {
  require(T >= 1, "simulate: T must be >= 1");
  Trajectory out;
  out.x.reserve(T);
  out.y.reserve(T);
  Vector x = sample_initial(model, rng);
  for (int t = 1; t <= T; ++t) {
    if (t > 1) x = sample_transition(model, x, rng);
    out.y.push_back(sample_observation(model, x, rng));
    out.x.push_back(x);
  }
  return out;
}

ModelSpec make_lg_diagonal(int d, Scalar alpha) {
  require(d >= 1, "make_lg_diagonal: d must be >= 1");
  const Matrix I = Matrix::Identity(d, d);
  return ModelSpec(Vector::Zero(d), I, alpha * I, I, LinearGaussianObs{I, Covariance(I, "D")});
}

ModelSpec make_lg_nondiagonal(int d, Scalar alpha) {
  require(d >= 1, "make_lg_nondiagonal: d must be >= 1");
  const Matrix I = Matrix::Identity(d, d);
  Matrix A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = std::pow(alpha, std::abs(i - j) + 1);
  return ModelSpec(Vector::Zero(d), I, A, I, LinearGaussianObs{I, Covariance(I, "D")});
}

ModelSpec make_stochastic_volatility(Scalar alpha, Scalar sigma, Scalar beta) {
  require(std::abs(alpha) < 1.0, "make_stochastic_volatility: |alpha| must be < 1");
  require(sigma > 0.0, "make_stochastic_volatility: sigma must be positive");
  Matrix Sigma(1, 1), A(1, 1), B(1, 1);
  Sigma(0, 0) = sigma * sigma / (1.0 - alpha * alpha);
  A(0, 0) = alpha;
  B(0, 0) = sigma * sigma;
  return ModelSpec(Vector::Zero(1), Sigma, A, B, StochasticVolatilityObs{beta});
}

ModelSpec make_binomial(int d, int trials, Scalar alpha, Scalar sigma2) {
  require(d >= 1, "make_binomial: d must be >= 1");
  const Matrix I = Matrix::Identity(d, d);
  return ModelSpec(Vector::Zero(d), I, alpha * I, sigma2 * I, BinomialLogisticObs{trials});
}

}  // namespace orcsmc
