#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pcvit/tensor.hpp"

namespace pcvit {

/// Gradients keyed by parameter name. Shapes match the registered parameters.
template <typename T>
using GradientMap = std::map<std::string, Tensor<T>>;

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

/// Reverse-mode tape. Operations are recorded in execution order, so the
/// tape is already topologically sorted for the backward sweep.
///
/// A graph built with `record = false` keeps forward values only; it is the
/// inference path and rejects backward().
///
/// Registering the same parameter name more than once is allowed; the
/// gradients of every use are summed under that name.
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var parameter(const std::string& name, Tensor<T> value);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  Var add(Var a, Var b);
  /// x + y where y's shape is a trailing suffix of x's shape.
  Var add_broadcast(Var x, Var y);
  Var mul(Var a, Var b);
  Var scale(Var x, T factor);
  /// Same operand conventions as ops::matmul.
  Var matmul(Var a, Var b, bool transpose_b = false);
  /// Softmax over the last axis.
  Var softmax(Var x);
  Var layer_norm(Var x, Var gain, Var bias, T eps);
  Var gelu(Var x);
  Var reshape(Var x, Shape shape);
  /// [B, T, h·w] -> [B·h, T, w]
  Var split_heads(Var x, std::size_t heads);
  /// [B·h, T, w] -> [B, T, h·w]
  Var merge_heads(Var x, std::size_t heads);
  /// token [d], seq [B, N, d] -> [B, N+1, d] with the token in row 0.
  Var prepend_token(Var token, Var seq);
  /// seq [B, T, d] -> [B, d]
  Var select_token(Var seq, std::size_t index);
  /// Rows [begin, end) of the first axis.
  Var slice_rows(Var x, std::size_t begin, std::size_t end);
  Var sum(Var x);
  Var mean(Var x);

  /// Mean negative log-likelihood from raw logits [B, C] (fused log-softmax).
  Var cross_entropy_logits(Var logits, std::span<const int> labels);
  /// Mean negative log of the true-class probability; probabilities are
  /// clamped below at `floor` before the log.
  Var cross_entropy_probs(Var probs, std::span<const int> labels, T floor = T(1e-12));

  /// Gradients of a scalar `loss` for every registered parameter. Parameters
  /// the loss does not depend on receive zeros.
  GradientMap<T> backward(Var loss);

 private:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::string param_name;
    BackwardFn backward;
  };

  Var push(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn,
           const char* op);
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient buffer of `v`, zero-initialised on first access.
  Tensor<T>& grad_of(Var v);
  void check(Var v) const;

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace pcvit
