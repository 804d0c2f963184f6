#include "gpi/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gpi/error.hpp"

namespace gpi {

Matrix Matrix::from_rows(std::size_t r, std::size_t c,
                         std::span<const double> values) {
  require(values.size() == r * c, ErrorKind::Dimension, "matrix",
          "from_rows: value count does not match shape");
  Matrix m(r, c);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::memcpy(out.row_ptr(i), row_ptr(indices[i]), cols * sizeof(double));
  }
  return out;
}

Matrix Matrix::gather_rows(std::span<const int> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::memcpy(out.row_ptr(i), row_ptr(static_cast<std::size_t>(indices[i])),
                cols * sizeof(double));
  }
  return out;
}

bool all_finite(const Matrix& m) { return all_finite(std::span(m.data)); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, ErrorKind::Dimension, "matrix",
          "matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols; ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, ErrorKind::Dimension, "matrix",
          "matmul_nt: inner dimensions differ");
  Matrix c(a.rows, b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, ErrorKind::Dimension, "matrix",
          "matmul_tn: inner dimensions differ");
  Matrix c(a.cols, b.cols, 0.0);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row_ptr(k);
    const double* brow = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < b.cols; ++j) {
        crow[j] += aki * brow[j];
      }
    }
  }
  return c;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> v) {
  require(m.cols == v.size(), ErrorKind::Dimension, "matrix",
          "matvec: dimension mismatch");
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    out[i] = dot(m.row(i), v);
  }
  return out;
}

std::vector<double> matvec_t(const Matrix& m, std::span<const double> v) {
  require(m.rows == v.size(), ErrorKind::Dimension, "matrix",
          "matvec_t: dimension mismatch");
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += vi * row[j];
  }
  return out;
}

void add_row_inplace(Matrix& m, std::span<const double> row_values) {
  require(m.cols == row_values.size(), ErrorKind::Dimension, "matrix",
          "add_row_inplace: dimension mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += row_values[j];
  }
}

Matrix hconcat(const Matrix& left, const Matrix& right) {
  require(left.rows == right.rows, ErrorKind::Dimension, "matrix",
          "hconcat: row counts differ");
  Matrix out(left.rows, left.cols + right.cols);
  for (std::size_t i = 0; i < left.rows; ++i) {
    std::memcpy(out.row_ptr(i), left.row_ptr(i), left.cols * sizeof(double));
    std::memcpy(out.row_ptr(i) + left.cols, right.row_ptr(i),
                right.cols * sizeof(double));
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> column_means(const Matrix& m, std::span<const int> rows) {
  std::vector<double> mean(m.cols, 0.0);
  if (rows.empty()) return mean;
  for (int r : rows) {
    const double* row = m.row_ptr(static_cast<std::size_t>(r));
    for (std::size_t j = 0; j < m.cols; ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

std::vector<double> column_sds(const Matrix& m, std::span<const int> rows,
                               std::span<const double> means) {
  std::vector<double> sd(m.cols, 0.0);
  if (rows.size() < 2) {
    std::fill(sd.begin(), sd.end(), 1.0);
    return sd;
  }
  for (int r : rows) {
    const double* row = m.row_ptr(static_cast<std::size_t>(r));
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double d = row[j] - means[j];
      sd[j] += d * d;
    }
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(rows.size() - 1));
  return sd;
}

Standardizer Standardizer::fit(const Matrix& m, std::span<const int> rows) {
  Standardizer s;
  s.mean = column_means(m, rows);
  s.sd = column_sds(m, rows, s.mean);
  for (double& v : s.sd) {
    if (v <= 1e-12) v = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& m) const {
  Matrix out = m;
  apply_inplace(out);
  return out;
}

void Standardizer::apply_inplace(Matrix& m) const {
  require(m.cols == mean.size(), ErrorKind::Dimension, "matrix",
          "standardizer: column count mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      row[j] = (row[j] - mean[j]) / sd[j];
    }
  }
}

}  // namespace gpi
