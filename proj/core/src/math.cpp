#include "plstm/math.hpp"

#include <cmath>

#include "plstm/errors.hpp"

namespace plstm {

Vector affine(const Matrix& W, const Vector& x, const Matrix& U,
              const Vector& h, const Vector& b) {
  if (W.cols != x.len())
    throw ShapeError(detail::cat("affine: W has ", W.cols,
                                 " cols but x has len ", x.len()));
  if (U.cols != h.len())
    throw ShapeError(detail::cat("affine: U has ", U.cols,
                                 " cols but h has len ", h.len()));
  if (W.rows != b.len() || U.rows != b.len())
    throw ShapeError(detail::cat("affine: row counts W=", W.rows, " U=", U.rows,
                                 " must equal b len ", b.len()));
  Vector y(b.len());
  for (std::size_t i = 0; i < y.len(); ++i) {
    double acc = b[i];
    const double* wrow = W.row(i);
    for (std::size_t j = 0; j < x.len(); ++j) acc += wrow[j] * x[j];
    const double* urow = U.row(i);
    for (std::size_t j = 0; j < h.len(); ++j) acc += urow[j] * h[j];
    y[i] = acc;
  }
  return y;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
  Vector y(v.len());
  for (std::size_t i = 0; i < v.len(); ++i) y[i] = sigmoid(v[i]);
  return y;
}

double logit(double y) {
  if (!(y > 0.0 && y < 1.0))
    throw ArgumentError(detail::cat("logit: argument ", y, " outside (0,1)"));
  return std::log(y / (1.0 - y));
}

void sigmoid_inplace(Matrix& m) {
  for (double& v : m.data) v = sigmoid(v);
}

void tanh_inplace(Matrix& m) {
  for (double& v : m.data) v = std::tanh(v);
}

double softmax_xent_row(const double* logits, std::size_t n, std::size_t target,
                        double* grad_out) {
  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad_out[i] = std::exp(logits[i] - mx);
    sum += grad_out[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) grad_out[i] *= inv;
  const double loss = std::log(sum) - (logits[target] - mx);
  grad_out[target] -= 1.0;
  return loss;
}

std::pair<double, Vector> softmax_xent(const Vector& logits, std::size_t target) {
  if (target >= logits.len())
    throw ArgumentError(detail::cat("softmax_xent: target ", target,
                                    " out of range for ", logits.len(),
                                    " logits"));
  Vector grad(logits.len());
  double loss =
      softmax_xent_row(logits.data.data(), logits.len(), target, grad.data.data());
  return {loss, std::move(grad)};
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

}  // namespace plstm
