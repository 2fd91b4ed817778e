#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcvit/autograd.hpp"
#include "pcvit/tensor.hpp"

namespace pcvit {

enum class NormPlacement { pre, none };
enum class AttentionScale { per_head, full };

struct ModelConfig {
  std::string variant = "base";
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 768;
  std::size_t depth = 12;
  std::size_t heads = 12;
  std::size_t ffn_hidden = 3072;
  std::size_t num_classes = 4;
  NormPlacement norm = NormPlacement::pre;
  /// per_head divides scores by sqrt(embed_dim / heads); full by sqrt(embed_dim).
  AttentionScale attention_scale = AttentionScale::per_head;
  /// Add positional row 0 to the class token.
  bool cls_positional = true;
  double norm_eps = 1e-6;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t tokens() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return 3 * patch_size * patch_size; }
  std::size_t head_dim() const { return embed_dim / heads; }

  /// Throws ValueError when S % P != 0, d % h != 0, or any size is zero.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// "base" (d=768, L=12, h=12) or "tiny" (d=192, L=12, h=3); other fields default.
ModelConfig variant_config(const std::string& name);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named tensors in a fixed insertion order.
template <typename T>
class ParameterSet {
 public:
  void add(const std::string& name, Tensor<T> tensor);

  bool contains(const std::string& name) const { return tensors_.contains(name); }
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;
  const std::vector<std::string>& names() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }
  std::size_t scalar_count() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& name : order_) out.add(name, tensors_.at(name).template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.order_ == b.order_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor<T>> tensors_;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
  enum class Init { trunc_normal, zeros, ones } init;
};

/// Every learnable tensor of the model, in canonical order.
std::vector<ParameterSpec> parameter_layout(const ModelConfig& config);

/// Truncated normal (std 0.02, cut at two standard deviations) for weights and
/// embeddings; zeros for biases and the class token; ones for norm gains.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Throws ShapeError unless `params` matches the layout of `config` exactly.
template <typename T>
void check_parameters(const ParameterSet<T>& params, const ModelConfig& config);

/// Image [3, S, S] -> [N, 3·P²]. Patches are taken row-major over the grid
/// and each is flattened channel-major (c, row, col).
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch_size);

/// Batch [B, 3, S, S] -> [B, N, 3·P²].
template <typename T>
Tensor<T> patchify_batch(const Tensor<T>& batch, std::size_t patch_size);

/// Puts parameters on a graph. Names in `frozen` enter as constants.
template <typename T>
class ParameterBinder {
 public:
  ParameterBinder(Graph<T>& graph, const ParameterSet<T>& params,
                  const std::vector<std::string>* frozen = nullptr);

  Var operator()(const std::string& name);
  Graph<T>& graph() { return graph_; }

 private:
  Graph<T>& graph_;
  const ParameterSet<T>& params_;
  const std::vector<std::string>* frozen_;
  std::map<std::string, Var> bound_;
};

/// patches [B, N, 3·P²] -> z0 [B, N+1, d].
template <typename T>
Var embed(ParameterBinder<T>& bind, Var patches, const ModelConfig& config);

/// Multi-head self-attention of `layer` over z [B, T, d]. When `weights` is
/// given, the post-softmax attention [B·h, T, T] is appended to it.
template <typename T>
Var attention(ParameterBinder<T>& bind, Var z, std::size_t layer, const ModelConfig& config,
              std::vector<Var>* weights = nullptr);

template <typename T>
Var encoder_layer(ParameterBinder<T>& bind, Var z, std::size_t layer, const ModelConfig& config,
                  std::vector<Var>* weights = nullptr);

/// Full network up to the logits [B, C].
template <typename T>
Var forward_logits(ParameterBinder<T>& bind, const Tensor<T>& batch, const ModelConfig& config,
                   std::vector<Var>* weights = nullptr);

template <typename T>
struct ForwardOutput {
  Tensor<T> logits;
  Tensor<T> probabilities;
  /// Per layer, [B·h, T, T]. Filled only on request.
  std::vector<Tensor<T>> attention;
};

/// Inference forward pass (no gradient recording).
template <typename T>
ForwardOutput<T> forward(const Tensor<T>& batch, const ParameterSet<T>& params,
                         const ModelConfig& config, bool keep_attention = false);

}  // namespace pcvit
