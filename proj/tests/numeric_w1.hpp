#pragma once

#include "orcsmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace orcsmc::testing {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m));
  const double frm = f(0.5 * (m + b));
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

/// Adaptive Simpson on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-14) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return simpson_step(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 50);
}

/// int |F_hat - Phi| by adaptive quadrature between consecutive atoms, tails cut at 40 sd.
inline double numeric_w1(const Vector& x, const Vector& w, double mean, double sd) {
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return x[i] < x[j]; });
  std::vector<double> knots{x[order.front()] - 40 * sd};
  std::vector<double> levels{0.0};
  double cum = 0.0;
  for (Index i : order) {
    cum += w[i];
    knots.push_back(x[i]);
    levels.push_back(cum);
  }
  knots.push_back(x[order.back()] + 40 * sd);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    if (knots[k + 1] <= knots[k]) continue;
    const double level = levels[k];
    total += adaptive_simpson([&](double z) { return std::abs(level - normal_cdf((z - mean) / sd)); }, knots[k],
                              knots[k + 1]);
  }
  return total;
}

}  // namespace orcsmc::testing
