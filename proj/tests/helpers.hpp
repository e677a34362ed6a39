#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dgif/tensor.hpp"
#include "dgif/util.hpp"

namespace testutil {

inline dgif::Tensor random_tensor(dgif::Rng& rng, dgif::Shape shape, double lo = -2.0,
                                  double hi = 2.0, bool requires_grad = true) {
  dgif::Tensor t(std::move(shape), 0.0, requires_grad);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Gauss-Jordan inverse; test-side oracle, independent of the library solver.
inline std::vector<double> invert_dense(std::vector<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a[col * n + j], a[pivot * n + j]);
      std::swap(inv[col * n + j], inv[pivot * n + j]);
    }
    const double d = a[col * n + col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col * n + j] /= d;
      inv[col * n + j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r * n + j] -= f * a[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  return inv;
}

inline std::vector<double> matvec(const std::vector<double>& m, std::size_t n,
                                  const std::vector<double>& x) {
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += m[i * n + j] * x[j];
  return y;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Largest/smallest eigenvalue ratio of an SPD matrix via power iteration and
// inverse iteration on the explicit inverse.
inline double spd_condition(const std::vector<double>& g, std::size_t n) {
  auto power = [n](const std::vector<double>& m) {
    std::vector<double> v(n, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      std::vector<double> w = matvec(m, n, v);
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : w) x /= norm;
      lambda = 0.0;
      std::vector<double> mw = matvec(m, n, w);
      for (std::size_t i = 0; i < n; ++i) lambda += w[i] * mw[i];
      v = std::move(w);
    }
    return lambda;
  };
  const double lmax = power(g);
  const double lmin_inv = power(invert_dense(g, n));
  return lmax * lmin_inv;
}

}  // namespace testutil
