#include "featgen/mmd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace featgen {

void KernelSpec::validate() const {
  if (bandwidths.empty()) {
    throw std::invalid_argument("KernelSpec: at least one bandwidth required");
  }
  for (double s : bandwidths) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("KernelSpec: bandwidths must be > 0");
    }
  }
  if (!weights.empty() && weights.size() != bandwidths.size()) {
    throw std::invalid_argument(
        "KernelSpec: weights length must match bandwidths");
  }
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("KernelSpec: weights must be > 0");
    }
  }
}

namespace {

void check_inputs(const Matrix& x, const Matrix& y, const KernelSpec& kernel) {
  kernel.validate();
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("gram: dim mismatch " + x.shape_str() +
                                " vs " + y.shape_str());
  }
  if (x.rows() == 0 || y.rows() == 0) {
    throw std::invalid_argument("gram: empty sample");
  }
}

double kernel_value(double sqdist, const KernelSpec& kernel) {
  double v = 0.0;
  for (std::size_t k = 0; k < kernel.bandwidths.size(); ++k) {
    const double s = kernel.bandwidths[k];
    v += kernel.weight(k) * std::exp(-sqdist / (2.0 * s * s));
  }
  return v;
}

double mean_all(const Matrix& m) {
  double s = 0.0;
  for (double v : m.raw()) s += v;
  return s / static_cast<double>(m.size());
}

}  // namespace

Matrix gram(const Matrix& x, const Matrix& y, const KernelSpec& kernel) {
  check_inputs(x, y, kernel);
  Matrix g(x.rows(), y.rows());
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(x.rows()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < y.rows(); ++j)
      g(i, j) = kernel_value(row_sqdist(x, i, y, j), kernel);
  }
  return g;
}

Matrix gram_serial(const Matrix& x, const Matrix& y, const KernelSpec& kernel) {
  check_inputs(x, y, kernel);
  Matrix g(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j)
      g(i, j) = kernel_value(row_sqdist(x, i, y, j), kernel);
  return g;
}

double mmd2_biased(const Matrix& x, const Matrix& y, const KernelSpec& kernel) {
  check_inputs(x, y, kernel);
  const double v = mean_all(gram(x, x, kernel)) +
                   mean_all(gram(y, y, kernel)) -
                   2.0 * mean_all(gram(x, y, kernel));
  // The V-statistic is non-negative; clip rounding residue near zero.
  return v < 0.0 ? 0.0 : v;
}

Matrix mmd2_gradient(const Matrix& x_generated, const Matrix& y_real,
                     const KernelSpec& kernel) {
  check_inputs(x_generated, y_real, kernel);
  const std::size_t m = x_generated.rows();
  const std::size_t n = y_real.rows();
  const std::size_t d = x_generated.cols();
  Matrix grad(m, d);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* gi = grad.row_ptr(i);
    // d/dx_i of mean(Kxx): the row appears twice by symmetry.
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double sq = row_sqdist(x_generated, i, x_generated, j);
      for (std::size_t k = 0; k < kernel.bandwidths.size(); ++k) {
        const double s2 = kernel.bandwidths[k] * kernel.bandwidths[k];
        const double coeff = -kernel.weight(k) * std::exp(-sq / (2.0 * s2)) /
                             s2 * 2.0 /
                             static_cast<double>(m * m);
        for (std::size_t c = 0; c < d; ++c)
          gi[c] += coeff * (x_generated(i, c) - x_generated(j, c));
      }
    }
    // d/dx_i of -2*mean(Kxy)
    for (std::size_t j = 0; j < n; ++j) {
      const double sq = row_sqdist(x_generated, i, y_real, j);
      for (std::size_t k = 0; k < kernel.bandwidths.size(); ++k) {
        const double s2 = kernel.bandwidths[k] * kernel.bandwidths[k];
        const double coeff = 2.0 * kernel.weight(k) *
                             std::exp(-sq / (2.0 * s2)) / s2 /
                             static_cast<double>(m * n);
        for (std::size_t c = 0; c < d; ++c)
          gi[c] += coeff * (x_generated(i, c) - y_real(j, c));
      }
    }
  }
  return grad;
}

}  // namespace featgen
