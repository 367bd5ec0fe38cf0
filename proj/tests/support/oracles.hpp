#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dgpg/common/matrix.hpp"

namespace oracles {

// Minimizes sum_i x_i^2 / mu_i subject to sum_i x_i = total by projected
// gradient descent on the hyperplane, one column at a time.
inline dgpg::Matrix qp_reference(const dgpg::Matrix& mu, const std::vector<double>& total, int iters = 20000) {
  const std::size_t n = mu.rows();
  dgpg::Matrix x(n, mu.cols());
  for (std::size_t k = 0; k < mu.cols(); ++k) {
    double mu_min = mu(0, k);
    for (std::size_t i = 0; i < n; ++i) mu_min = std::min(mu_min, mu(i, k));
    const double step = mu_min / 2.0;
    std::vector<double> col(n, total[k] / static_cast<double>(n));
    std::vector<double> grad(n);
    for (int it = 0; it < iters; ++it) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        grad[i] = 2.0 * col[i] / mu(i, k);
        mean += grad[i];
      }
      mean /= static_cast<double>(n);
      double moved = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = step * (grad[i] - mean);
        col[i] -= d;
        moved = std::max(moved, std::abs(d));
      }
      if (moved < 1e-15 * std::max(1.0, total[k])) break;
    }
    for (std::size_t i = 0; i < n; ++i) x(i, k) = col[i];
  }
  return x;
}

// Grid minimum of f on [0, 1] with the given step, refined by a three-point
// parabola through the best grid point and its neighbours.
template <class F>
double grid_minimum(F f, double step, double* argmin = nullptr) {
  const long n = static_cast<long>(std::llround(1.0 / step));
  long best = 0;
  double best_v = f(0.0);
  for (long i = 1; i <= n; ++i) {
    const double v = f(static_cast<double>(i) * step);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = static_cast<double>(best) * step;
  double v = best_v;
  if (best > 0 && best < n) {
    const double x0 = a - step, x2 = a + step;
    const double f0 = f(x0), f2 = f(x2);
    const double denom = f0 - 2.0 * best_v + f2;
    if (denom > 0.0) {
      const double cand = a + 0.5 * step * (f0 - f2) / denom;
      const double fc = f(cand);
      if (fc <= v) {
        a = cand;
        v = fc;
      }
    }
  }
  if (argmin) *argmin = a;
  return v;
}

}  // namespace oracles
