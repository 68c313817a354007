#pragma once

#include <cstddef>
#include <utility>

#include "plstm/tensor.hpp"

namespace plstm {

// y = W*x + U*h + b. Each matrix multiplies the vector that follows it.
Vector affine(const Matrix& W, const Vector& x, const Matrix& U,
              const Vector& h, const Vector& b);

// Numerically stable logistic; never NaN for finite input.
double sigmoid(double v);
Vector sigmoid(const Vector& v);
// sigmoid^-1; argument must lie in (0,1).
double logit(double y);

void sigmoid_inplace(Matrix& m);
void tanh_inplace(Matrix& m);

// loss = -log softmax(logits)[target]; grad = softmax(logits) - onehot(target).
// Max-subtraction keeps the exponentials bounded.
std::pair<double, Vector> softmax_xent(const Vector& logits, std::size_t target);

// Row-wise core shared by the batched loss head; grad_out may alias nothing.
double softmax_xent_row(const double* logits, std::size_t n, std::size_t target,
                        double* grad_out);

// argmax index of a row; first maximum wins ties.
std::size_t argmax_row(const double* row, std::size_t n);

}  // namespace plstm
