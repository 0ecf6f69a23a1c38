#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>

#include "invr/errors.hpp"

namespace invr {

using Eigen::Index;
using Eigen::VectorXd;

/// Exact solution of min_x 1/2 ||x - y||^2 + lambda * TV(x) for 1D signals,
/// via Condat's direct taut-string algorithm. O(n) in practice.
inline VectorXd tv_prox_1d(const VectorXd& y, double lambda) {
  if (lambda < 0.0) throw parameter_error("tv_prox_1d: lambda must be >= 0");
  const Index n = y.size();
  if (n == 0) return y;
  if (lambda == 0.0 || n == 1) return y;

  VectorXd x(n);
  Index k = 0, k0 = 0, kminus = 0, kplus = 0;
  double vmin = y(0) - lambda, vmax = y(0) + lambda;
  double umin = lambda, umax = -lambda;

  while (true) {
    if (k == n - 1) {
      // tail segment: flush remaining jumps, then the final plateau
      if (umin < 0.0) {
        for (Index i = k0; i <= kminus; ++i) x(i) = vmin;
        k = k0 = kminus = kminus + 1;
        vmin = y(k);
        umin = lambda;
        umax = y(k) + lambda - vmax;
        continue;
      }
      if (umax > 0.0) {
        for (Index i = k0; i <= kplus; ++i) x(i) = vmax;
        k = k0 = kplus = kplus + 1;
        vmax = y(k);
        umax = -lambda;
        umin = y(k) - lambda - vmin;
        continue;
      }
      const double level = vmin + umin / static_cast<double>(k - k0 + 1);
      for (Index i = k0; i < n; ++i) x(i) = level;
      return x;
    }

    if (y(k + 1) + umin < vmin - lambda) {  // negative jump is necessary
      for (Index i = k0; i <= kminus; ++i) x(i) = vmin;
      k = k0 = kminus = kplus = kminus + 1;
      vmin = y(k);
      vmax = y(k) + 2.0 * lambda;
      umin = lambda;
      umax = -lambda;
    } else if (y(k + 1) + umax > vmax + lambda) {  // positive jump is necessary
      for (Index i = k0; i <= kplus; ++i) x(i) = vmax;
      k = k0 = kminus = kplus = kplus + 1;
      vmin = y(k) - 2.0 * lambda;
      vmax = y(k);
      umin = lambda;
      umax = -lambda;
    } else {  // no jump yet, extend the segment
      k += 1;
      umin += y(k) - vmin;
      umax += y(k) - vmax;
      if (umin >= lambda) {
        vmin += (umin - lambda) / static_cast<double>(k - k0 + 1);
        umin = lambda;
        kminus = k;
      }
      if (umax <= -lambda) {
        vmax += (umax + lambda) / static_cast<double>(k - k0 + 1);
        umax = -lambda;
        kplus = k;
      }
    }
  }
}

/// Denoising map with a stable name for serialization and diagnostics.
struct Denoiser {
  std::string name;
  std::function<VectorXd(const VectorXd&)> apply;

  VectorXd operator()(const VectorXd& x) const { return apply(x); }

  static Denoiser identity() {
    return {"identity", [](const VectorXd& x) { return x; }};
  }

  static Denoiser tv_prox(double lambda) {
    return {"tv-prox", [lambda](const VectorXd& x) { return tv_prox_1d(x, lambda); }};
  }

  /// Centered moving average with clamped boundaries; window must be odd.
  static Denoiser moving_average(Index window) {
    if (window < 1 || window % 2 == 0)
      throw parameter_error("moving_average: window must be odd and >= 1");
    return {"moving-average", [window](const VectorXd& x) {
              const Index n = x.size();
              const Index half = window / 2;
              VectorXd out(n);
              for (Index i = 0; i < n; ++i) {
                const Index lo = std::max<Index>(0, i - half);
                const Index hi = std::min<Index>(n - 1, i + half);
                out(i) = x.segment(lo, hi - lo + 1).mean();
              }
              return out;
            }};
  }
};

}  // namespace invr
