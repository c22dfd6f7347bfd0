#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace orcsmc {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using IndexVector = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

inline constexpr Scalar kLog2Pi = 1.8378770664093454835606594728112;

/// A caller broke a documented precondition (dimension mismatch, bad argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the support of a density (e.g. binomial count > M).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Twisted precision B^-1 - 2 diag(a) is not positive definite.
class TwistIntegrabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every particle carries zero weight at some time step.
class DegenerateWeightsError : public std::runtime_error {
 public:
  DegenerateWeightsError(int t, const std::string& what)
      : std::runtime_error("degenerate weights at t=" + std::to_string(t) + ": " + what), t_(t) {}

  int time() const noexcept { return t_; }

 private:
  int t_;
};

/// The requested oracle does not cover the given model.
class UnsupportedOracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace orcsmc
