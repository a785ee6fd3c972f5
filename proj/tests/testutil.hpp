#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

#include "featgen/matrix.hpp"
#include "featgen/rng.hpp"

namespace testutil {

// Entry-by-entry reference product the fast kernel is checked against.
inline featgen::Matrix naive_matmul(const featgen::Matrix& a,
                                    const featgen::Matrix& b) {
  featgen::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

// Central finite differences of a scalar function w.r.t. every entry of a
// parameter matrix, perturbed in place.
inline featgen::Matrix fd_gradient(const std::function<double()>& f,
                                   featgen::Matrix& param,
                                   double step = 1e-6) {
  featgen::Matrix grad(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.rows(); ++i)
    for (std::size_t j = 0; j < param.cols(); ++j) {
      const double saved = param(i, j);
      param(i, j) = saved + step;
      const double plus = f();
      param(i, j) = saved - step;
      const double minus = f();
      param(i, j) = saved;
      grad(i, j) = (plus - minus) / (2.0 * step);
    }
  return grad;
}

inline double fd_scalar(const std::function<double()>& f, double& param,
                        double step = 1e-6) {
  const double saved = param;
  param = saved + step;
  const double plus = f();
  param = saved - step;
  const double minus = f();
  param = saved;
  return (plus - minus) / (2.0 * step);
}

// Relative error between two gradients: ||a-b||_2 / (||a||_2 + ||b||_2).
inline double grad_rel_error(const featgen::Matrix& a,
                             const featgen::Matrix& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.raw()[i] - b.raw()[i];
    diff += d * d;
    na += a.raw()[i] * a.raw()[i];
    nb += b.raw()[i] * b.raw()[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

inline featgen::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                     featgen::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
  featgen::Matrix m(rows, cols);
  for (auto& v : m.raw()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace testutil
