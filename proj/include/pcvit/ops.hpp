#pragma once

#include <cstddef>

#include "pcvit/tensor.hpp"

// Pure tensor operations. Every result is checked for NaN/Inf before it is
// returned.
namespace pcvit::ops {

/// Matrix product. Accepts m×k · k×n, batched b×m×k · b×k×n, and any
/// (...)×m×k · k×n where the right operand is shared across leading axes.
/// With `transpose_b` the right operand is read as its transpose over the
/// last two axes.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes each last-axis vector to zero mean and unit (population)
/// variance, then applies `gain` and `bias`.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps);

/// GELU, tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
T gelu_scalar(T x);

template <typename T>
T gelu_derivative(T x);

/// Index of the largest entry of each row of a 2-D tensor; the lowest index
/// wins ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& x);

namespace kernel {

/// C (m×n) = op(A) · op(B) (+ C when `accumulate`). All buffers row-major;
/// op(A) is m×k, op(B) is k×n.
template <typename T>
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

}  // namespace kernel

}  // namespace pcvit::ops
