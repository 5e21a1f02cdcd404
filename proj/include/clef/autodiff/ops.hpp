#pragma once

#include <span>
#include <vector>

#include "clef/autodiff/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes, rejects
// non-finite results with NonFiniteValue, and records itself on the active
// tape when any input requires a gradient.
namespace clef::ad {

enum class Elementwise { add, subtract, multiply, divide };

/// `b` must match `a` exactly, be a row broadcast along the leading dimension
/// (b.size() == a.cols()), or hold a single value. The result has a's shape.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Exact-erf GELU: x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor softmax_rows(const Tensor& a);

/// Identity forward; backward multiplies the incoming gradient by -lambda.
Tensor gradient_reversal(const Tensor& a, double lambda);

/// Mean over elements of the Huber penalty of (target - pred).
Tensor huber_loss(const Tensor& pred, const Tensor& target, double delta);
/// Mean squared error; with weights, sum(w * r^2) / sum(w).
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor weighted_mse_loss(const Tensor& pred, const Tensor& target, std::span<const double> weights);
/// Mean softmax cross-entropy of logits [m x k] against class labels.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

double gelu_value(double x);
double huber_value(double residual, double delta);

}  // namespace clef::ad
