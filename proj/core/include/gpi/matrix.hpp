#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gpi {

/// Dense row-major matrix of 64-bit floats. The workhorse container for
/// representations, covariates, weights and activations.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::size_t r, std::size_t c,
                          std::span<const double> values);

  double& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  double* row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }
  std::span<const double> row(std::size_t i) const {
    return {row_ptr(i), cols};
  }

  bool empty() const { return rows == 0 || cols == 0; }

  /// Copies the given rows (in order) into a new matrix.
  Matrix gather_rows(std::span<const std::size_t> indices) const;
  Matrix gather_rows(std::span<const int> indices) const;
};

bool all_finite(const Matrix& m);
bool all_finite(std::span<const double> v);

/// C = A (m x k) * B (k x n)
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A (m x k) * B^T with B stored (n x k)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// C = A^T (m x k, stored k x m... A is (k x m)) * B (k x n) -> (m x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// y = M v
std::vector<double> matvec(const Matrix& m, std::span<const double> v);
/// y = M^T v
std::vector<double> matvec_t(const Matrix& m, std::span<const double> v);

void add_row_inplace(Matrix& m, std::span<const double> row_values);
Matrix hconcat(const Matrix& left, const Matrix& right);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Column means / sample standard deviations over the given rows.
std::vector<double> column_means(const Matrix& m, std::span<const int> rows);
std::vector<double> column_sds(const Matrix& m, std::span<const int> rows,
                               std::span<const double> means);

/// Per-column affine standardization (x - mean) / sd, with sd floored at
/// 1e-12 so constant columns pass through as zeros.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  static Standardizer fit(const Matrix& m, std::span<const int> rows);
  Matrix apply(const Matrix& m) const;
  void apply_inplace(Matrix& m) const;
};

}  // namespace gpi
