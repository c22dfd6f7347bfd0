#include "orcsmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace orcsmc {

namespace {

const LinearGaussianObs& require_linear_gaussian(const ModelSpec& model) {
  const auto* lg = std::get_if<LinearGaussianObs>(&model.obs());
  if (lg == nullptr) throw UnsupportedOracleError("oracle requires a linear-Gaussian observation model");
  return *lg;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Scalar log_gaussian(const Vector& residual, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Matrix L = llt.matrixL();
  const Vector z = L.triangularView<Eigen::Lower>().solve(residual);
  return -0.5 * (static_cast<Scalar>(residual.size()) * kLog2Pi + 2.0 * L.diagonal().array().log().sum() +
                 z.squaredNorm());
}

}  // namespace

KalmanResult kalman_filter_smoother(const ModelSpec& model, const std::vector<Observation>& ys) {
  const LinearGaussianObs& obs = require_linear_gaussian(model);
  require(!ys.empty(), "kalman_filter_smoother: need at least one observation");
  const std::size_t T = ys.size();
  const Index d = model.dim();
  const Matrix& A = model.A();
  const Matrix& C = obs.C;
  KalmanResult r;
  r.filtered_mean.resize(T);
  r.filtered_cov.resize(T);
  r.predicted_mean.resize(T);
  r.predicted_cov.resize(T);
  r.log_z_path.resize(T);

  Scalar log_z = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    require(ys[t].size() == C.rows(), "kalman_filter_smoother: observation dimension mismatch");
    if (t == 0) {
      r.predicted_mean[t] = model.m();
      r.predicted_cov[t] = model.Sigma().matrix();
    } else {
      r.predicted_mean[t] = A * r.filtered_mean[t - 1];
      r.predicted_cov[t] = symmetrize(A * r.filtered_cov[t - 1] * A.transpose() + model.B().matrix());
    }
    const Matrix& P = r.predicted_cov[t];
    const Matrix S = symmetrize(C * P * C.transpose() + obs.D.matrix());
    const Vector innovation = ys[t] - C * r.predicted_mean[t];
    log_z += log_gaussian(innovation, S);
    r.log_z_path[t] = log_z;
    Eigen::LLT<Matrix> llt(S);
    const Matrix gain = llt.solve(C * P).transpose();  // P C' S^-1
    r.filtered_mean[t] = r.predicted_mean[t] + gain * innovation;
    const Matrix I_KC = Matrix::Identity(d, d) - gain * C;
    // Joseph form keeps the covariance symmetric positive definite.
    r.filtered_cov[t] = symmetrize(I_KC * P * I_KC.transpose() + gain * obs.D.matrix() * gain.transpose());
  }
  r.log_z = log_z;

  r.smoothed_mean.resize(T);
  r.smoothed_cov.resize(T);
  r.smoothed_mean[T - 1] = r.filtered_mean[T - 1];
  r.smoothed_cov[T - 1] = r.filtered_cov[T - 1];
  for (std::size_t i = T - 1; i-- > 0;) {
    Eigen::LLT<Matrix> llt(r.predicted_cov[i + 1]);
    const Matrix J = llt.solve(A * r.filtered_cov[i]).transpose();  // P_f A' P_pred^-1
    r.smoothed_mean[i] = r.filtered_mean[i] + J * (r.smoothed_mean[i + 1] - r.predicted_mean[i + 1]);
    r.smoothed_cov[i] =
        symmetrize(r.filtered_cov[i] + J * (r.smoothed_cov[i + 1] - r.predicted_cov[i + 1]) * J.transpose());
  }
  return r;
}

std::vector<TwistParams> exact_twists(const ModelSpec& model, const std::vector<Observation>& ys) {
  const LinearGaussianObs& obs = require_linear_gaussian(model);
  const auto T = static_cast<Index>(ys.size());
  const Index d = model.dim();
  const Index dy = obs.C.rows();
  const Matrix& A = model.A();
  const Matrix& B = model.B().matrix();
  std::vector<TwistParams> out;
  out.reserve(static_cast<std::size_t>(T));

  for (Index t = 0; t < T; ++t) {
    const Index h = T - t;  // observations y_t..y_T
    // Given x_t: x_{t+k} = A^k x_t + noise_k with Cov(noise_k) = P_k, Cov(noise_j, noise_k) = A^{k-j} P_j (k >= j).
    std::vector<Matrix> powers(static_cast<std::size_t>(h));
    std::vector<Matrix> noise(static_cast<std::size_t>(h));
    powers[0] = Matrix::Identity(d, d);
    noise[0] = Matrix::Zero(d, d);
    for (Index k = 1; k < h; ++k) {
      powers[static_cast<std::size_t>(k)] = A * powers[static_cast<std::size_t>(k - 1)];
      noise[static_cast<std::size_t>(k)] = A * noise[static_cast<std::size_t>(k - 1)] * A.transpose() + B;
    }
    Matrix G(h * dy, d);
    Matrix S = Matrix::Zero(h * dy, h * dy);
    Vector Y(h * dy);
    for (Index k = 0; k < h; ++k) {
      G.block(k * dy, 0, dy, d) = obs.C * powers[static_cast<std::size_t>(k)];
      Y.segment(k * dy, dy) = ys[static_cast<std::size_t>(t + k)];
      for (Index j = 0; j <= k; ++j) {
        // Cov(x_{t+k}, x_{t+j}) = A^{k-j} P_j.
        const Matrix cross = powers[static_cast<std::size_t>(k - j)] * noise[static_cast<std::size_t>(j)];
        Matrix block = obs.C * cross * obs.C.transpose();
        if (j == k) block += obs.D.matrix();
        S.block(k * dy, j * dy, dy, dy) = block;
        S.block(j * dy, k * dy, dy, dy) = block.transpose();
      }
    }
    Eigen::LLT<Matrix> llt(symmetrize(S));
    if (llt.info() != Eigen::Success) throw UnsupportedOracleError("exact_twists: singular stacked covariance");
    const Matrix L = llt.matrixL();
    const Matrix SinvG = llt.solve(G);
    const Vector SinvY = llt.solve(Y);
    const Matrix quad = -0.5 * G.transpose() * SinvG;
    const Scalar scale = std::max(quad.diagonal().cwiseAbs().maxCoeff(), Scalar{1e-300});
    const Matrix off = quad - Matrix(quad.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw UnsupportedOracleError("exact_twists: exact twist is not diagonal");
    TwistParams psi;
    psi.a = quad.diagonal();
    psi.b = G.transpose() * SinvY;
    psi.c = -0.5 * Y.dot(SinvY) - 0.5 * (static_cast<Scalar>(h * dy) * kLog2Pi + 2.0 * L.diagonal().array().log().sum());
    out.push_back(std::move(psi));
  }
  return out;
}

GridSpec default_grid(const ModelSpec& model, Scalar sds, Index points) {
  require(model.dim() == 1, "default_grid: d must be 1");
  const Scalar a = model.A()(0, 0);
  const Scalar b = model.B().matrix()(0, 0);
  Scalar spread = std::sqrt(model.Sigma().matrix()(0, 0));
  if (std::abs(a) < 1.0) {
    spread = std::max(spread, std::sqrt(b / (1.0 - a * a)));
  } else {
    spread = std::max(spread, 10.0 * std::sqrt(b));
  }
  const Scalar centre = model.m()[0];
  return GridSpec{centre - sds * spread, centre + sds * spread, points};
}

Vector trapezoid_weights(Index points, Scalar step) {
  Vector w = Vector::Constant(points, step);
  w[0] *= 0.5;
  w[points - 1] *= 0.5;
  return w;
}

namespace {

GridFilterResult grid_pass(const ModelSpec& model, const std::vector<Observation>& ys, const GridSpec& grid) {
  require(model.dim() == 1, "grid_filter_logz: d must be 1");
  require(grid.points >= 3 && grid.hi > grid.lo, "grid_filter_logz: invalid grid");
  const Index n = grid.points;
  const Scalar h = (grid.hi - grid.lo) / static_cast<Scalar>(n - 1);
  GridFilterResult r;
  r.nodes = Vector::LinSpaced(n, grid.lo, grid.hi);
  const Vector w = trapezoid_weights(n, h);
  const Scalar a = model.A()(0, 0);
  const Scalar sd = std::sqrt(model.B().matrix()(0, 0));
  const Scalar band = 12.0 * sd;
  const Scalar log_norm = -0.5 * kLog2Pi - std::log(sd);

  Vector density(n);
  {
    const Scalar m = model.m()[0];
    const Scalar s0 = std::sqrt(model.Sigma().matrix()(0, 0));
    for (Index i = 0; i < n; ++i) {
      const Scalar z = (r.nodes[i] - m) / s0;
      density[i] = std::exp(-0.5 * z * z - 0.5 * kLog2Pi - std::log(s0));
    }
  }
  Scalar log_z = 0.0;
  Vector log_g(n);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    if (t > 0) {
      Vector predicted = Vector::Zero(n);
      for (Index j = 0; j < n; ++j) {
        const Scalar mass = w[j] * density[j];
        if (mass == 0.0) continue;
        const Scalar centre = a * r.nodes[j];
        const auto i_lo = std::max<Index>(0, static_cast<Index>(std::ceil((centre - band - grid.lo) / h)));
        const auto i_hi = std::min<Index>(n - 1, static_cast<Index>(std::floor((centre + band - grid.lo) / h)));
        for (Index i = i_lo; i <= i_hi; ++i) {
          const Scalar z = (r.nodes[i] - centre) / sd;
          predicted[i] += mass * std::exp(log_norm - 0.5 * z * z);
        }
      }
      density = predicted;
    }
    // Rescale by the largest log-likelihood on the grid to avoid underflow.
    for (Index i = 0; i < n; ++i) log_g[i] = log_obs_density(model, ys[t], r.nodes.segment(i, 1));
    const Scalar shift = log_g.maxCoeff();
    const Vector unnorm = density.cwiseProduct((log_g.array() - shift).exp().matrix());
    const Scalar z_t = w.dot(unnorm);
    if (!(z_t > 0.0)) throw DegenerateWeightsError(static_cast<int>(t + 1), "grid filter mass vanished");
    log_z += std::log(z_t) + shift;
    density = unnorm / z_t;
    r.densities.push_back(density);
  }
  r.log_z = log_z;
  return r;
}

}  // namespace

GridFilterResult grid_filter_logz(const ModelSpec& model, const std::vector<Observation>& ys, const GridSpec& grid,
                                  bool check, Scalar tolerance) {
  GridFilterResult r = grid_pass(model, ys, grid);
  r.richardson_gap = std::numeric_limits<Scalar>::quiet_NaN();
  if (check) {
    GridSpec fine = grid;
    fine.points = 2 * grid.points - 1;
    const GridFilterResult refined = grid_pass(model, ys, fine);
    r.richardson_gap = std::abs(refined.log_z - r.log_z);
    r.coarse_warning = !(r.richardson_gap < tolerance);
  }
  return r;
}

Scalar quadrature_log_twisted_integral(const Vector& mean, const Matrix& cov, const TwistParams& psi, Scalar lo,
                                       Scalar hi, Index points) {
  const Index d = mean.size();
  if (d > 2) throw UnsupportedOracleError("quadrature oracle supports d <= 2");
  require(cov.rows() == d && cov.cols() == d && psi.dim() == d, "quadrature: dimension mismatch");
  const Scalar h = (hi - lo) / static_cast<Scalar>(points - 1);
  const Vector nodes = Vector::LinSpaced(points, lo, hi);
  const Vector log_w = trapezoid_weights(points, h).array().log();
  const Matrix precision = cov.inverse();
  const Scalar log_norm = -0.5 * (static_cast<Scalar>(d) * kLog2Pi + std::log(cov.determinant()));

  // Streaming log-sum-exp over the tensor grid.
  Scalar running_max = -std::numeric_limits<Scalar>::infinity();
  Scalar running_sum = 0.0;
  auto accumulate = [&](Scalar log_term) {
    if (log_term <= running_max) {
      running_sum += std::exp(log_term - running_max);
    } else {
      running_sum = running_sum * std::exp(running_max - log_term) + 1.0;
      running_max = log_term;
    }
  };
  if (d == 1) {
    for (Index i = 0; i < points; ++i) {
      const Scalar x = nodes[i];
      const Scalar r = x - mean[0];
      const Scalar lt = log_norm - 0.5 * precision(0, 0) * r * r + psi.a[0] * x * x + psi.b[0] * x + psi.c;
      accumulate(log_w[i] + lt);
    }
  } else {
    for (Index i = 0; i < points; ++i) {
      const Scalar x0 = nodes[i];
      const Scalar r0 = x0 - mean[0];
      const Scalar row = log_norm + log_w[i] - 0.5 * precision(0, 0) * r0 * r0 + psi.a[0] * x0 * x0 +
                         psi.b[0] * x0 + psi.c;
      for (Index j = 0; j < points; ++j) {
        const Scalar x1 = nodes[j];
        const Scalar r1 = x1 - mean[1];
        const Scalar lt = row - precision(0, 1) * r0 * r1 - 0.5 * precision(1, 1) * r1 * r1 + psi.a[1] * x1 * x1 +
                          psi.b[1] * x1 + log_w[j];
        accumulate(lt);
      }
    }
  }
  return running_max + std::log(running_sum);
}

Scalar normal_cdf(Scalar z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Scalar normal_pdf(Scalar z) { return std::exp(-0.5 * z * z - 0.5 * kLog2Pi); }

Scalar bracket_normal_quantile(Scalar level, Scalar lo, Scalar hi) {
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++iter) {
    const Scalar mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

// Antiderivative of Phi: G(z) = z Phi(z) + phi(z).
Scalar integrated_cdf(Scalar z) { return z * normal_cdf(z) + normal_pdf(z); }

// sd * int_{za}^{zb} |level - Phi(z)| dz with za <= zb.
Scalar segment_distance(Scalar level, Scalar za, Scalar zb, Scalar sd) {
  if (zb <= za) return 0.0;
  auto above = [&](Scalar a, Scalar b) {  // Phi >= level on [a, b]
    return sd * (integrated_cdf(b) - integrated_cdf(a) - level * (b - a));
  };
  auto below = [&](Scalar a, Scalar b) {  // Phi <= level on [a, b]
    return sd * (level * (b - a) - (integrated_cdf(b) - integrated_cdf(a)));
  };
  const Scalar fa = normal_cdf(za);
  const Scalar fb = normal_cdf(zb);
  if (fa >= level) return above(za, zb);
  if (fb <= level) return below(za, zb);
  const Scalar crossing = bracket_normal_quantile(level, za, zb);
  return below(za, crossing) + above(crossing, zb);
}

}  // namespace

Scalar wasserstein1_to_gaussian(const Vector& samples, const Vector& weights, Scalar mean, Scalar sd) {
  require(samples.size() == weights.size() && samples.size() > 0, "wasserstein1: size mismatch");
  require(sd > 0.0, "wasserstein1: sd must be positive");
  const Index n = samples.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return samples[i] < samples[j]; });

  auto z_of = [&](Index k) { return (samples[order[static_cast<std::size_t>(k)]] - mean) / sd; };
  // Lower tail: F_hat = 0 below the first sample.
  Scalar total = sd * integrated_cdf(z_of(0));
  Scalar level = 0.0;
  for (Index k = 0; k + 1 < n; ++k) {
    level += weights[order[static_cast<std::size_t>(k)]];
    total += segment_distance(std::min<Scalar>(level, 1.0), z_of(k), z_of(k + 1), sd);
  }
  // Upper tail: F_hat = 1 above the last sample.
  total += sd * integrated_cdf(-z_of(n - 1));
  return total;
}

Vector standardize_marginal(const Vector& samples, Scalar mean, Scalar sd) {
  require(sd > 0.0, "standardize_marginal: sd must be positive");
  return (samples.array() - mean) / sd;
}

}  // namespace orcsmc
