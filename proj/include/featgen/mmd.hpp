#pragma once

#include <vector>

#include "featgen/matrix.hpp"

namespace featgen {

// Mixture of Gaussian kernels k(u,v) = sum_k w_k * exp(-|u-v|^2 / (2*s_k^2)).
struct KernelSpec {
  std::vector<double> bandwidths{1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> weights;  // empty = all ones

  void validate() const;
  double weight(std::size_t k) const {
    return weights.empty() ? 1.0 : weights[k];
  }
};

// Cross Gram matrix, entry (i,j) = k(x_i, y_j). OpenMP over rows.
Matrix gram(const Matrix& x, const Matrix& y, const KernelSpec& kernel);

// Reference implementation the parallel kernel is checked against.
Matrix gram_serial(const Matrix& x, const Matrix& y, const KernelSpec& kernel);

// Biased V-statistic: mean(Kxx) + mean(Kyy) - 2*mean(Kxy). Always >= 0.
double mmd2_biased(const Matrix& x, const Matrix& y, const KernelSpec& kernel);

// Analytic gradient of mmd2_biased w.r.t. every row of x_generated; y_real
// is treated as a constant.
Matrix mmd2_gradient(const Matrix& x_generated, const Matrix& y_real,
                     const KernelSpec& kernel);

}  // namespace featgen
