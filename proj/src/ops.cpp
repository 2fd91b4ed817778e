#include "pcvit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace pcvit::ops {

namespace kernel {

template <typename T>
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMajor>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMajor> out(c, mi, ni);
  if (!accumulate) out.setZero();
  ConstMap a_map(a, transpose_a ? ki : mi, transpose_a ? mi : ki);
  ConstMap b_map(b, transpose_b ? ni : ki, transpose_b ? ki : ni);
  if (!transpose_a && !transpose_b) {
    out.noalias() += a_map * b_map;
  } else if (!transpose_a && transpose_b) {
    out.noalias() += a_map * b_map.transpose();
  } else if (transpose_a && !transpose_b) {
    out.noalias() += a_map.transpose() * b_map;
  } else {
    out.noalias() += a_map.transpose() * b_map.transpose();
  }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);

}  // namespace kernel

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  auto mismatch = [&] {
    return ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                      shape_string(b.shape()) + (transpose_b ? " (right transposed)" : ""));
  };
  if (a.rank() < 2 || b.rank() < 2) throw mismatch();
  const std::size_t k = a.shape().back();
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t b_rows = b.shape()[b.rank() - 2];
  const std::size_t b_cols = b.shape().back();
  const std::size_t b_inner = transpose_b ? b_cols : b_rows;
  const std::size_t n = transpose_b ? b_rows : b_cols;
  if (b_inner != k) throw mismatch();

  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);

  if (b.rank() == 2) {
    // Shared right operand: fold every leading axis of `a` into rows.
    const std::size_t rows = a.size() / k;
    kernel::gemm(false, transpose_b, rows, n, k, a.data().data(), b.data().data(),
                 out.data().data(), false);
  } else {
    if (a.rank() != b.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      throw mismatch();
    }
    const std::size_t batch = a.size() / (m * k);
    for (std::size_t i = 0; i < batch; ++i) {
      kernel::gemm(false, transpose_b, m, n, k, a.data().data() + i * m * k,
                   b.data().data() + i * b_rows * b_cols, out.data().data() + i * m * n, false);
    }
  }
  ensure_finite(out, "matmul");
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (x.empty()) throw ValueError("softmax: empty tensor");
  if (axis >= x.rank()) {
    throw ValueError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_string(x.shape()));
  }
  const std::size_t extent = x.dim(axis);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t outer = x.size() / (extent * inner);

  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * extent * inner + in;
      T peak = x[base];
      for (std::size_t j = 1; j < extent; ++j) peak = std::max(peak, x[base + j * inner]);
      T total = 0;
      for (std::size_t j = 0; j < extent; ++j) {
        const T e = std::exp(x[base + j * inner] - peak);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < extent; ++j) out[base + j * inner] /= total;
    }
  }
  ensure_finite(out, "softmax");
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (!(eps > 0)) throw ValueError("layer_norm: eps must be positive");
  if (x.empty()) throw ValueError("layer_norm: empty tensor");
  const std::size_t width = x.shape().back();
  if (gain.rank() != 1 || bias.rank() != 1 || gain.size() != width || bias.size() != width) {
    throw ShapeError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                     shape_string(bias.shape()) + " do not match last axis of " +
                     shape_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  const std::size_t rows = x.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * width;
    T* dst = out.data().data() + r * width;
    T mean = 0;
    for (std::size_t j = 0; j < width; ++j) mean += in[j];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(width);
    const T rstd = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) dst[j] = (in[j] - mean) * rstd * gain[j] + bias[j];
  }
  ensure_finite(out, "layer_norm");
  return out;
}

template <typename T>
T gelu_scalar(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  return T{0.5} * x * (T{1} + std::tanh(c * (x + T{0.044715} * x * x * x)));
}

template <typename T>
T gelu_derivative(T x) {
  constexpr T c = static_cast<T>(0.7978845608028654);
  const T inner = c * (x + T{0.044715} * x * x * x);
  const T t = std::tanh(inner);
  const T d_inner = c * (T{1} + T{3} * T{0.044715} * x * x);
  return T{0.5} * (T{1} + t) + T{0.5} * x * (T{1} - t * t) * d_inner;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu_scalar(x[i]);
  ensure_finite(out, "gelu");
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("argmax_rows: expected 2-D tensor, got " +
                                      shape_string(x.shape()));
  const std::size_t cols = x.dim(1);
  std::vector<int> out(x.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (x[r * cols + c] > x[r * cols + best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

#define PCVIT_INSTANTIATE_OPS(T)                                                     \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&, bool);            \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                      \
  template T gelu_scalar<T>(T);                                                      \
  template T gelu_derivative<T>(T);                                                  \
  template std::vector<int> argmax_rows<T>(const Tensor<T>&);

PCVIT_INSTANTIATE_OPS(float)
PCVIT_INSTANTIATE_OPS(double)

#undef PCVIT_INSTANTIATE_OPS

}  // namespace pcvit::ops
