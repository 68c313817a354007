#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace plstm {

// Dense row-major float64 matrix; the only 2-d container in the engine.
// float64 throughout: the gradient-check tolerance (1e-4 relative over long
// unrolls) is not reachable in float32.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // length rows*cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::initializer_list<double> v)
      : rows(r), cols(c), data(v) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::size_t size() const { return data.size(); }
  void fill(double v);
  void zero() { fill(0.0); }

  static Matrix identity(std::size_t n);
};

struct Vector {
  std::vector<double> data;

  Vector() = default;
  explicit Vector(std::size_t n, double v = 0.0) : data(n, v) {}
  Vector(std::initializer_list<double> v) : data(v) {}

  std::size_t len() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  void fill(double v);
  void zero() { fill(0.0); }
};

// c += a * b, a: m*k, b: k*n, c: m*n. i-k-j loop order so the inner loop runs
// over contiguous rows of b and c; vectorizes without -ffast-math.
void gemm_nn_acc(Matrix& c, const Matrix& a, const Matrix& b);

// c += a^T * b, a: k*m, b: k*n, c: m*n. Inner loop contiguous as above.
void gemm_tn_acc(Matrix& c, const Matrix& a, const Matrix& b);

Matrix transposed(const Matrix& a);

// Every row of m gets v added (bias broadcast).
void add_row_broadcast(Matrix& m, const Vector& v);

// out[j] += sum_i m(i, j)  (bias gradient reduction).
void col_sum_acc(Vector& out, const Matrix& m);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace plstm
