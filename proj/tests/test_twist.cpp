#include "orcsmc/oracle.hpp"
#include "orcsmc/twist.hpp"

#include <doctest.h>

#include <cmath>

using namespace orcsmc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TwistParams twist(Vector a, Vector b, double c) { return TwistParams{std::move(a), std::move(b), c}; }

ModelSpec scalar_model(double A, double B) {
  return ModelSpec(Vector::Zero(1), Matrix::Identity(1, 1), Matrix::Constant(1, 1, A), Matrix::Constant(1, 1, B),
                   LinearGaussianObs{Matrix::Identity(1, 1), Covariance(Matrix::Identity(1, 1))});
}

}  // namespace

TEST_CASE("log_twist arithmetic") {
  CHECK(log_twist(TwistParams::unit(3), vec({1.0, -2.0, 5.0})) == 0.0);
  CHECK(log_twist(twist(vec({-0.5}), vec({0.0}), 0.0), vec({2.0})) == doctest::Approx(-2.0));
  CHECK(log_twist(twist(vec({-1, -1}), vec({1, 0}), 0.5), vec({1, 1})) == doctest::Approx(-0.5));
  Matrix pts(2, 2);
  pts << 1, 0, 1, 2;
  const Vector many = log_twist(twist(vec({-1, -1}), vec({1, 0}), 0.5), pts);
  CHECK(many[0] == doctest::Approx(-0.5));
  CHECK(many[1] == doctest::Approx(-3.5));
}

TEST_CASE("unit twist integrals vanish") {
  const ModelSpec m = make_lg_nondiagonal(3);
  CHECK(log_transition_integral(m, TwistParams::unit(3), vec({1, 2, 3})) == 0.0);
  CHECK(log_initial_integral(m, TwistParams::unit(3)) == 0.0);
  CHECK(TwistParams::unit(2).is_unit());
  CHECK_FALSE(twist(vec({0, 0}), vec({0, 0}), 1e-300).is_unit());
}

TEST_CASE("transition integral against closed values and quadrature") {
  const ModelSpec m = scalar_model(1.0, 1.0);
  const TwistParams psi = twist(vec({-0.5}), vec({0.0}), 0.0);
  CHECK(log_transition_integral(m, psi, vec({0.0})) == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(quadrature_log_twisted_integral(vec({0.0}), Matrix::Identity(1, 1), psi) ==
        doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-8));

  Rng rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelSpec d2 = make_lg_diagonal(2, 0.415);
    const TwistParams p = twist(vec({0.3 * u(rng) - 0.2, 0.3 * u(rng) - 0.2}), vec({u(rng), u(rng)}), u(rng));
    const Vector x = vec({2 * u(rng), 2 * u(rng)});
    const double closed = log_transition_integral(d2, p, x);
    // product of two 1D quadratures
    double quad = p.c;
    for (Index j = 0; j < 2; ++j) {
      const TwistParams pj = twist(vec({p.a[j]}), vec({p.b[j]}), 0.0);
      quad += quadrature_log_twisted_integral(vec({0.415 * x[j]}), Matrix::Identity(1, 1), pj);
    }
    CHECK(std::abs(std::exp(closed - quad) - 1.0) < 1e-8);
  }
}

TEST_CASE("non-diagonal base covariance against 2D quadrature") {
  Matrix B(2, 2);
  B << 1.0, 0.6, 0.6, 0.8;
  const ModelSpec m(Vector::Zero(2), Matrix::Identity(2, 2), Matrix::Identity(2, 2) * 0.5, B,
                    LinearGaussianObs{Matrix::Identity(2, 2), Covariance(Matrix::Identity(2, 2))});
  const TwistParams p = twist(vec({-0.3, 0.2}), vec({0.4, -0.7}), 0.25);
  const Vector x = vec({1.0, -0.5});
  const double closed = log_transition_integral(m, p, x);
  const double quad = quadrature_log_twisted_integral(m.A() * x, B, p, -12, 12, 1201);
  CHECK(std::abs(std::exp(closed - quad) - 1.0) < 1e-6);
}

TEST_CASE("two-dimensional integrals at full quadrature resolution") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Matrix B(2, 2);
    B << 1.0 + 0.3 * u(rng), 0.4 * u(rng), 0.0, 0.8;
    B(1, 0) = B(0, 1);
    const Covariance base(B);
    const TwistParams p{vec({-0.4 * std::abs(u(rng)), 0.2 * u(rng)}), vec({u(rng), u(rng)}), u(rng)};
    const Vector mean = vec({u(rng), u(rng)});
    const double closed = TwistedGaussian(base, p).log_integral(mean)[0];
    const double quad = quadrature_log_twisted_integral(mean, B, p, -12, 12, 4001);
    CHECK(std::abs(std::expm1(closed - quad)) < 1e-6);
  }
}

TEST_CASE("integrability is enforced") {
  const ModelSpec m = scalar_model(1.0, 1.0);
  CHECK_THROWS_AS(log_transition_integral(m, twist(vec({0.5}), vec({0.0}), 0.0), vec({0.0})),
                  TwistIntegrabilityError);
  CHECK_THROWS_AS(log_initial_integral(m, twist(vec({0.75}), vec({0.0}), 0.0)), TwistIntegrabilityError);
  CHECK_NOTHROW(log_transition_integral(m, twist(vec({0.49}), vec({0.0}), 0.0), vec({0.0})));
}

TEST_CASE("twisted sampling moments") {
  Rng rng(23);
  const int n = 100000;
  auto moments = [&](const ModelSpec& m, const TwistParams& p, const Vector& x) {
    double s = 0.0;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = sample_twisted_transition(m, p, x, rng)[0];
      s += v;
      ss += v * v;
    }
    const double mean = s / n;
    return std::pair{mean, ss / n - mean * mean};
  };
  SUBCASE("a = -0.5 halves the variance") {
    const auto [mean, var] = moments(scalar_model(0.0, 1.0), twist(vec({-0.5}), vec({0.0}), 0.0), vec({3.0}));
    CHECK(std::abs(mean) < 4 * std::sqrt(0.5 / n));
    CHECK(std::abs(var - 0.5) < 4 * 0.5 * std::sqrt(2.0 / n));
  }
  SUBCASE("b = 1 shifts the mean") {
    const auto [mean, var] = moments(scalar_model(0.0, 1.0), twist(vec({0.0}), vec({1.0}), 0.0), vec({3.0}));
    CHECK(std::abs(mean - 1.0) < 4 * std::sqrt(1.0 / n));
    CHECK(std::abs(var - 1.0) < 4 * std::sqrt(2.0 / n));
  }
  SUBCASE("unit twist matches the transition") {
    const auto [mean, var] = moments(scalar_model(0.5, 2.0), TwistParams::unit(1), vec({2.0}));
    CHECK(std::abs(mean - 1.0) < 4 * std::sqrt(2.0 / n));
    CHECK(std::abs(var - 2.0) < 4 * 2.0 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("twisted moments agree with quadrature moments") {
  // N(0,1) e^{a x^2 + b x}: mean b/(1-2a), variance 1/(1-2a)
  const double a = -0.3;
  const double b = 0.8;
  const TwistParams p = twist(vec({a}), vec({b}), 0.0);
  const Covariance base(Matrix::Identity(1, 1));
  const TwistedGaussian tg(base, p);
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  const int n = 40001;
  const double h = 24.0 / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double x = -12 + i * h;
    const double w = (i == 0 || i == n - 1 ? 0.5 : 1.0) * std::exp(-0.5 * x * x + a * x * x + b * x);
    z += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  m1 /= z;
  m2 = m2 / z - m1 * m1;
  CHECK(tg.twisted_mean(vec({0.0}))[0] == doctest::Approx(m1).epsilon(1e-10));
  CHECK(tg.twisted_covariance()(0, 0) == doctest::Approx(m2).epsilon(1e-10));
}

TEST_CASE("unit-twist sampling consumes the same draws as the transition") {
  const ModelSpec m = make_lg_nondiagonal(3);
  Rng a(99);
  Rng b(99);
  const Vector x = vec({0.1, -0.2, 0.3});
  CHECK(sample_twisted_transition(m, TwistParams::unit(3), x, a) == sample_transition(m, x, b));
  CHECK(sample_twisted_initial(m, TwistParams::unit(3), a) == sample_initial(m, b));
}

TEST_CASE("default precision floor") {
  Matrix B(2, 2);
  B << 4.0, 0.0, 0.0, 0.5;
  CHECK(default_eps_pd(Covariance(B)) == doctest::Approx(1e-4 * 0.25));
}
