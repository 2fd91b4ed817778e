#include "pcvit/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "pcvit/ops.hpp"

namespace pcvit {

namespace {

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}
void add_into(std::span<float> dst, std::span<const float> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ValueError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
  }
}

}  // namespace

template <typename T>
void Graph<T>::check(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ValueError("graph: invalid variable handle");
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
Var Graph<T>::push(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn,
                   const char* op) {
  ensure_finite(value, op);
  Node node;
  node.value = std::move(value);
  for (Var in : inputs) node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  if (record_ && node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  ensure_finite(value, "constant");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::parameter(const std::string& name, Tensor<T> value) {
  ensure_finite(value, name);
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_;
  node.param_name = name;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& x = value(a);
  const Tensor<T>& y = value(b);
  if (x.shape() != y.shape()) {
    throw ShapeError("add: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return push(std::move(out), {a, b}, [a, b](Graph& g, const Tensor<T>& gout) {
    if (g.needs_grad(a)) add_into(g.grad_of(a).data(), gout.data());
    if (g.needs_grad(b)) add_into(g.grad_of(b).data(), gout.data());
  }, "add");
}

template <typename T>
Var Graph<T>::add_broadcast(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& x = value(a);
  const Tensor<T>& y = value(b);
  const bool suffix = y.rank() <= x.rank() &&
                      std::equal(y.shape().begin(), y.shape().end(),
                                 x.shape().end() - static_cast<std::ptrdiff_t>(y.rank()));
  if (!suffix) {
    throw ShapeError("add_broadcast: " + shape_string(y.shape()) + " is not a suffix of " +
                     shape_string(x.shape()));
  }
  const std::size_t inner = y.size();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i % inner];
  return push(std::move(out), {a, b}, [a, b, inner](Graph& g, const Tensor<T>& gout) {
    if (g.needs_grad(a)) add_into(g.grad_of(a).data(), gout.data());
    if (g.needs_grad(b)) {
      auto gy = g.grad_of(b).data();
      for (std::size_t i = 0; i < gout.size(); ++i) gy[i % inner] += gout[i];
    }
  }, "add_broadcast");
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor<T>& x = value(a);
  const Tensor<T>& y = value(b);
  if (x.shape() != y.shape()) {
    throw ShapeError("mul: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return push(std::move(out), {a, b}, [a, b](Graph& g, const Tensor<T>& gout) {
    const Tensor<T>& xv = g.value(a);
    const Tensor<T>& yv = g.value(b);
    if (g.needs_grad(a)) {
      auto ga = g.grad_of(a).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * yv[i];
    }
    if (g.needs_grad(b)) {
      auto gb = g.grad_of(b).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * xv[i];
    }
  }, "mul");
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  check(a);
  const Tensor<T>& x = value(a);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return push(std::move(out), {a}, [a, factor](Graph& g, const Tensor<T>& gout) {
    auto ga = g.grad_of(a).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * factor;
  }, "scale");
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b, bool transpose_b) {
  check(a);
  check(b);
  Tensor<T> out = ops::matmul(value(a), value(b), transpose_b);
  return push(std::move(out), {a, b}, [a, b, transpose_b](Graph& g, const Tensor<T>& gout) {
    const Tensor<T>& av = g.value(a);
    const Tensor<T>& bv = g.value(b);
    const std::size_t k = av.shape().back();
    const std::size_t n = gout.shape().back();
    const bool shared = bv.rank() == 2;
    const std::size_t rows = shared ? av.size() / k : av.shape()[av.rank() - 2];
    const std::size_t batch = shared ? 1 : av.size() / (rows * k);
    T* ga = g.needs_grad(a) ? g.grad_of(a).data().data() : nullptr;
    T* gb = g.needs_grad(b) ? g.grad_of(b).data().data() : nullptr;
    for (std::size_t i = 0; i < batch; ++i) {
      const T* go = gout.data().data() + i * rows * n;
      const T* ap = av.data().data() + i * rows * k;
      const T* bp = bv.data().data() + i * k * n;
      if (ga != nullptr) {
        // dA = dC · op(B)^T
        ops::kernel::gemm(false, !transpose_b, rows, k, n, go, bp, ga + i * rows * k, true);
      }
      if (gb != nullptr) {
        if (transpose_b) {
          // B is n×k: dB = dC^T · A
          ops::kernel::gemm(true, false, n, k, rows, go, ap, gb + i * k * n, true);
        } else {
          // dB = A^T · dC
          ops::kernel::gemm(true, false, k, n, rows, ap, go, gb + i * k * n, true);
        }
      }
    }
  }, "matmul");
}

template <typename T>
Var Graph<T>::softmax(Var a) {
  check(a);
  const Tensor<T>& x = value(a);
  if (x.empty()) throw ValueError("softmax: empty tensor");
  Tensor<T> out = ops::softmax(x, x.rank() - 1);
  const std::size_t self = nodes_.size();
  return push(std::move(out), {a}, [a, self](Graph& g, const Tensor<T>& gout) {
    const Tensor<T>& y = g.nodes_[self].value;
    const std::size_t width = y.shape().back();
    auto gx = g.grad_of(a).data();
    for (std::size_t r = 0; r < y.size() / width; ++r) {
      const std::size_t base = r * width;
      T dot = 0;
      for (std::size_t j = 0; j < width; ++j) dot += gout[base + j] * y[base + j];
      for (std::size_t j = 0; j < width; ++j) gx[base + j] += y[base + j] * (gout[base + j] - dot);
    }
  }, "softmax");
}

template <typename T>
Var Graph<T>::layer_norm(Var xv, Var gain, Var bias, T eps) {
  check(xv);
  check(gain);
  check(bias);
  const Tensor<T>& x = value(xv);
  Tensor<T> out = ops::layer_norm(x, value(gain), value(bias), eps);

  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  // Normalized activations and inverse deviations for the backward pass.
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  if (record_) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* in = x.data().data() + r * width;
      T mean = 0;
      for (std::size_t j = 0; j < width; ++j) mean += in[j];
      mean /= static_cast<T>(width);
      T var = 0;
      for (std::size_t j = 0; j < width; ++j) var += (in[j] - mean) * (in[j] - mean);
      var /= static_cast<T>(width);
      (*rstd)[r] = T{1} / std::sqrt(var + eps);
      for (std::size_t j = 0; j < width; ++j) (*xhat)[r * width + j] = (in[j] - mean) * (*rstd)[r];
    }
  }
  return push(std::move(out), {xv, gain, bias},
              [xv, gain, bias, xhat, rstd, width, rows](Graph& g, const Tensor<T>& gout) {
    const Tensor<T>& gamma = g.value(gain);
    if (g.needs_grad(gain)) {
      auto gg = g.grad_of(gain).data();
      for (std::size_t i = 0; i < gout.size(); ++i) gg[i % width] += gout[i] * (*xhat)[i];
    }
    if (g.needs_grad(bias)) {
      auto gbias = g.grad_of(bias).data();
      for (std::size_t i = 0; i < gout.size(); ++i) gbias[i % width] += gout[i];
    }
    if (g.needs_grad(xv)) {
      auto gx = g.grad_of(xv).data();
      std::vector<T> dxhat(width);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * width;
        T mean_d = 0;
        T mean_dx = 0;
        for (std::size_t j = 0; j < width; ++j) {
          dxhat[j] = gout[base + j] * gamma[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * (*xhat)[base + j];
        }
        mean_d /= static_cast<T>(width);
        mean_dx /= static_cast<T>(width);
        for (std::size_t j = 0; j < width; ++j) {
          gx[base + j] += (*rstd)[r] * (dxhat[j] - mean_d - (*xhat)[base + j] * mean_dx);
        }
      }
    }
  }, "layer_norm");
}

template <typename T>
Var Graph<T>::gelu(Var a) {
  check(a);
  Tensor<T> out = ops::gelu(value(a));
  return push(std::move(out), {a}, [a](Graph& g, const Tensor<T>& gout) {
    const Tensor<T>& x = g.value(a);
    auto gx = g.grad_of(a).data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * ops::gelu_derivative(x[i]);
  }, "gelu");
}

template <typename T>
Var Graph<T>::reshape(Var a, Shape shape) {
  check(a);
  Tensor<T> out = value(a).reshaped(std::move(shape));
  return push(std::move(out), {a}, [a](Graph& g, const Tensor<T>& gout) {
    add_into(g.grad_of(a).data(), gout.data());
  }, "reshape");
}

template <typename T>
Var Graph<T>::split_heads(Var a, std::size_t heads) {
  check(a);
  const Tensor<T>& x = value(a);
  if (x.rank() != 3 || heads == 0 || x.dim(2) % heads != 0) {
    throw ShapeError("split_heads: cannot split " + shape_string(x.shape()) + " into " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t batch = x.dim(0), tokens = x.dim(1), width = x.dim(2) / heads;
  Tensor<T> out({batch * heads, tokens, width});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < tokens; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(x.data().data() + (b * tokens + t) * heads * width + h * width, width,
                    out.data().data() + ((b * heads + h) * tokens + t) * width);
  return push(std::move(out), {a}, [a, batch, tokens, heads, width](Graph& g,
                                                                     const Tensor<T>& gout) {
    auto gx = g.grad_of(a).data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < tokens; ++t)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = 0; j < width; ++j)
            gx[(b * tokens + t) * heads * width + h * width + j] +=
                gout[((b * heads + h) * tokens + t) * width + j];
  }, "split_heads");
}

template <typename T>
Var Graph<T>::merge_heads(Var a, std::size_t heads) {
  check(a);
  const Tensor<T>& x = value(a);
  if (x.rank() != 3 || heads == 0 || x.dim(0) % heads != 0) {
    throw ShapeError("merge_heads: cannot merge " + shape_string(x.shape()) + " over " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t batch = x.dim(0) / heads, tokens = x.dim(1), width = x.dim(2);
  Tensor<T> out({batch, tokens, heads * width});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t t = 0; t < tokens; ++t)
        std::copy_n(x.data().data() + ((b * heads + h) * tokens + t) * width, width,
                    out.data().data() + (b * tokens + t) * heads * width + h * width);
  return push(std::move(out), {a}, [a, batch, tokens, heads, width](Graph& g,
                                                                     const Tensor<T>& gout) {
    auto gx = g.grad_of(a).data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < tokens; ++t)
          for (std::size_t j = 0; j < width; ++j)
            gx[((b * heads + h) * tokens + t) * width + j] +=
                gout[(b * tokens + t) * heads * width + h * width + j];
  }, "merge_heads");
}

template <typename T>
Var Graph<T>::prepend_token(Var token, Var seq) {
  check(token);
  check(seq);
  const Tensor<T>& tok = value(token);
  const Tensor<T>& s = value(seq);
  if (s.rank() != 3 || tok.rank() != 1 || tok.size() != s.dim(2)) {
    throw ShapeError("prepend_token: token " + shape_string(tok.shape()) + " vs sequence " +
                     shape_string(s.shape()));
  }
  const std::size_t batch = s.dim(0), count = s.dim(1), width = s.dim(2);
  Tensor<T> out({batch, count + 1, width});
  for (std::size_t b = 0; b < batch; ++b) {
    T* dst = out.data().data() + b * (count + 1) * width;
    std::copy_n(tok.data().data(), width, dst);
    std::copy_n(s.data().data() + b * count * width, count * width, dst + width);
  }
  return push(std::move(out), {token, seq},
              [token, seq, batch, count, width](Graph& g, const Tensor<T>& gout) {
    for (std::size_t b = 0; b < batch; ++b) {
      const T* src = gout.data().data() + b * (count + 1) * width;
      if (g.needs_grad(token)) {
        auto gt = g.grad_of(token).data();
        for (std::size_t j = 0; j < width; ++j) gt[j] += src[j];
      }
      if (g.needs_grad(seq)) {
        T* gs = g.grad_of(seq).data().data() + b * count * width;
        for (std::size_t j = 0; j < count * width; ++j) gs[j] += src[width + j];
      }
    }
  }, "prepend_token");
}

template <typename T>
Var Graph<T>::select_token(Var seq, std::size_t index) {
  check(seq);
  const Tensor<T>& s = value(seq);
  if (s.rank() != 3 || index >= s.dim(1)) {
    throw ShapeError("select_token: index " + std::to_string(index) + " for sequence " +
                     shape_string(s.shape()));
  }
  const std::size_t batch = s.dim(0), count = s.dim(1), width = s.dim(2);
  Tensor<T> out({batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(s.data().data() + (b * count + index) * width, width,
                out.data().data() + b * width);
  }
  return push(std::move(out), {seq},
              [seq, index, batch, count, width](Graph& g, const Tensor<T>& gout) {
    auto gs = g.grad_of(seq).data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j)
        gs[(b * count + index) * width + j] += gout[b * width + j];
  }, "select_token");
}

template <typename T>
Var Graph<T>::slice_rows(Var a, std::size_t begin, std::size_t end) {
  check(a);
  const Tensor<T>& x = value(a);
  if (x.rank() == 0 || begin >= end || end > x.dim(0)) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") of " + shape_string(x.shape()));
  }
  const std::size_t row = x.size() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<T> data(x.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                      x.data().begin() + static_cast<std::ptrdiff_t>(end * row));
  return push(Tensor<T>(std::move(shape), std::move(data)), {a},
              [a, begin, row](Graph& g, const Tensor<T>& gout) {
    auto gx = g.grad_of(a).data();
    for (std::size_t i = 0; i < gout.size(); ++i) gx[begin * row + i] += gout[i];
  }, "slice_rows");
}

template <typename T>
Var Graph<T>::sum(Var a) {
  check(a);
  const Tensor<T>& x = value(a);
  T total = 0;
  for (T v : x.data()) total += v;
  return push(Tensor<T>::scalar(total), {a}, [a](Graph& g, const Tensor<T>& gout) {
    for (T& v : g.grad_of(a).data()) v += gout[0];
  }, "sum");
}

template <typename T>
Var Graph<T>::mean(Var a) {
  check(a);
  const std::size_t n = value(a).size();
  return scale(sum(a), T{1} / static_cast<T>(n));
}

template <typename T>
Var Graph<T>::cross_entropy_logits(Var logits, std::span<const int> labels) {
  check(logits);
  const Tensor<T>& z = value(logits);
  if (z.rank() != 2) throw ShapeError("cross_entropy: logits must be [B, C], got " +
                                      shape_string(z.shape()));
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  check_labels<T>(labels, batch, classes);
  auto probs = std::make_shared<Tensor<T>>(ops::softmax(z, 1));
  T total = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    const T* row = z.data().data() + i * classes;
    const T peak = *std::max_element(row, row + classes);
    T acc = 0;
    for (std::size_t c = 0; c < classes; ++c) acc += std::exp(row[c] - peak);
    total += peak + std::log(acc) - row[labels[i]];
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return push(Tensor<T>::scalar(total / static_cast<T>(batch)), {logits},
              [logits, probs, owned = std::move(owned), batch, classes](Graph& g,
                                                                        const Tensor<T>& gout) {
    auto gz = g.grad_of(logits).data();
    const T factor = gout[0] / static_cast<T>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        const T target = static_cast<int>(c) == owned[i] ? T{1} : T{0};
        gz[i * classes + c] += factor * ((*probs)[i * classes + c] - target);
      }
    }
  }, "cross_entropy");
}

template <typename T>
Var Graph<T>::cross_entropy_probs(Var probs, std::span<const int> labels, T floor) {
  check(probs);
  const Tensor<T>& p = value(probs);
  if (p.rank() != 2) throw ShapeError("cross_entropy: probabilities must be [B, C], got " +
                                      shape_string(p.shape()));
  const std::size_t batch = p.dim(0), classes = p.dim(1);
  check_labels<T>(labels, batch, classes);
  T total = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    total -= std::log(std::max(p[i * classes + labels[i]], floor));
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return push(Tensor<T>::scalar(total / static_cast<T>(batch)), {probs},
              [probs, owned = std::move(owned), batch, classes, floor](Graph& g,
                                                                       const Tensor<T>& gout) {
    const Tensor<T>& pv = g.value(probs);
    auto gp = g.grad_of(probs).data();
    for (std::size_t i = 0; i < batch; ++i) {
      const T v = pv[i * classes + owned[i]];
      if (v > floor) gp[i * classes + owned[i]] -= gout[0] / (static_cast<T>(batch) * v);
    }
  }, "cross_entropy");
}

template <typename T>
GradientMap<T> Graph<T>::backward(Var loss) {
  check(loss);
  if (!record_) throw ValueError("backward: graph was built without recording");
  if (value(loss).size() != 1) {
    throw ValueError("backward: loss must be scalar, got shape " +
                     shape_string(value(loss).shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor<T>();
  if (nodes_[loss.id].requires_grad) {
    grad_of(loss)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (node.grad.empty() || !node.backward) continue;
      node.backward(*this, node.grad);
    }
  }
  GradientMap<T> grads;
  for (const Node& node : nodes_) {
    if (node.param_name.empty()) continue;
    auto [it, inserted] = grads.try_emplace(node.param_name, node.value.shape());
    if (!node.grad.empty()) add_into(it->second.data(), node.grad.data());
  }
  for (const auto& [name, grad] : grads) ensure_finite(grad, "gradient of " + name);
  return grads;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace pcvit
