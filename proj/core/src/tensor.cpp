#include "plstm/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "plstm/errors.hpp"

namespace plstm {

void Matrix::fill(double v) { std::fill(data.begin(), data.end(), v); }
void Vector::fill(double v) { std::fill(data.begin(), data.end(), v); }

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void gemm_nn_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError(detail::cat("gemm_nn_acc: a is ", a.rows, "x", a.cols,
                                 " but b is ", b.rows, "x", b.cols));
  if (c.rows != a.rows || c.cols != b.cols)
    throw ShapeError(detail::cat("gemm_nn_acc: c is ", c.rows, "x", c.cols,
                                 " but a*b is ", a.rows, "x", b.cols));
  const std::size_t m = a.rows, k = a.cols, n = b.cols;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = arow[l];
      const double* brow = b.row(l);
      for (std::size_t j = 0; j < n; ++j) crow[j] += ail * brow[j];
    }
  }
}

void gemm_tn_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ShapeError(detail::cat("gemm_tn_acc: a is ", a.rows, "x", a.cols,
                                 " but b is ", b.rows, "x", b.cols,
                                 " (row counts must match)"));
  if (c.rows != a.cols || c.cols != b.cols)
    throw ShapeError(detail::cat("gemm_tn_acc: c is ", c.rows, "x", c.cols,
                                 " but a^T*b is ", a.cols, "x", b.cols));
  const std::size_t k = a.rows, m = a.cols, n = b.cols;
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a.row(l);
    const double* brow = b.row(l);
    for (std::size_t i = 0; i < m; ++i) {
      const double ali = arow[i];
      double* crow = c.row(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += ali * brow[j];
    }
  }
}

Matrix transposed(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void add_row_broadcast(Matrix& m, const Vector& v) {
  if (m.cols != v.len())
    throw ShapeError(detail::cat("add_row_broadcast: matrix has ", m.cols,
                                 " cols but vector has len ", v.len()));
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += v[j];
  }
}

void col_sum_acc(Vector& out, const Matrix& m) {
  if (out.len() != m.cols)
    throw ShapeError(detail::cat("col_sum_acc: out has len ", out.len(),
                                 " but matrix has ", m.cols, " cols"));
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j];
  }
}

bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_finite(const Vector& v) {
  for (double x : v.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace plstm
