#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace featgen {

// Dense row-major matrix of doubles. Values are immutable by convention once
// returned from an operation; share freely across threads for reading.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data length " +
                                  std::to_string(data_.size()) +
                                  " does not equal " + std::to_string(rows_) +
                                  "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// OpenMP-parallel product. Deterministic: each output entry is written by
// exactly one thread.
Matrix matmul(const Matrix& a, const Matrix& b);

// Plain triple-loop product, kept as the reference the parallel kernel is
// tested and benchmarked against.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// c = a + b, a - b, elementwise product
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Appends the columns of b to the right of a (equal row counts).
Matrix hcat(const Matrix& a, const Matrix& b);
// Stacks the rows of b below a (equal column counts).
Matrix vcat(const Matrix& a, const Matrix& b);

// Squared Euclidean distance between row i of a and row j of b.
double row_sqdist(const Matrix& a, std::size_t i, const Matrix& b,
                  std::size_t j);

bool all_finite(const Matrix& m);

// Solves (A + lambda*I) X = B for symmetric positive definite A via Cholesky.
// Used by the ridge-regression baseline.
Matrix cholesky_solve(const Matrix& a, const Matrix& b, double lambda = 0.0);

}  // namespace featgen
