#include "featgen/rng.hpp"

#include <cmath>
#include <numbers>

namespace featgen {

double Rng::normal(double mean, double stddev) {
  if (stddev < 0.0) {
    throw std::invalid_argument("Rng::normal: negative stddev");
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean, double stddev) {
  if (stddev < 0.0) {
    throw std::invalid_argument("sample_gaussian: negative stddev");
  }
  Matrix m(rows, cols);
  for (double& v : m.raw()) v = rng.normal(mean, stddev);
  return m;
}

Matrix sample_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo,
                      double hi) {
  if (lo > hi) {
    throw std::invalid_argument("sample_uniform: lo > hi");
  }
  Matrix m(rows, cols);
  for (double& v : m.raw()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace featgen
