#include "pcvit/vit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pcvit/ops.hpp"

namespace pcvit {

void ModelConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || embed_dim == 0 || depth == 0 || heads == 0 ||
      ffn_hidden == 0 || num_classes == 0) {
    throw ValueError("model config: sizes must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ValueError("model config: image size " + std::to_string(image_size) +
                     " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (embed_dim % heads != 0) {
    throw ValueError("model config: embed dim " + std::to_string(embed_dim) +
                     " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (!(norm_eps > 0)) throw ValueError("model config: norm eps must be positive");
}

ModelConfig variant_config(const std::string& name) {
  ModelConfig config;
  config.variant = name;
  if (name == "base") return config;
  if (name == "tiny") {
    config.embed_dim = 192;
    config.heads = 3;
    config.ffn_hidden = 768;
    return config;
  }
  throw ValueError("unknown model variant: " + name + " (expected base or tiny)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"variant", c.variant},
      {"image_size", c.image_size},
      {"patch_size", c.patch_size},
      {"embed_dim", c.embed_dim},
      {"depth", c.depth},
      {"heads", c.heads},
      {"ffn_hidden", c.ffn_hidden},
      {"num_classes", c.num_classes},
      {"norm", c.norm == NormPlacement::pre ? "pre" : "none"},
      {"attention_scale", c.attention_scale == AttentionScale::per_head ? "per_head" : "full"},
      {"cls_positional", c.cls_positional},
      {"norm_eps", c.norm_eps},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = j.at("variant").get<std::string>();
    c.image_size = j.at("image_size").get<std::size_t>();
    c.patch_size = j.at("patch_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    const auto norm = j.at("norm").get<std::string>();
    if (norm != "pre" && norm != "none") throw FormatError("model config: bad norm " + norm);
    c.norm = norm == "pre" ? NormPlacement::pre : NormPlacement::none;
    const auto scale = j.at("attention_scale").get<std::string>();
    if (scale != "per_head" && scale != "full") {
      throw FormatError("model config: bad attention_scale " + scale);
    }
    c.attention_scale = scale == "per_head" ? AttentionScale::per_head : AttentionScale::full;
    c.cls_positional = j.at("cls_positional").get<bool>();
    c.norm_eps = j.at("norm_eps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
void ParameterSet<T>::add(const std::string& name, Tensor<T> tensor) {
  if (tensors_.contains(name)) throw ValueError("duplicate parameter " + name);
  order_.push_back(name);
  tensors_.emplace(name, std::move(tensor));
}

template <typename T>
Tensor<T>& ParameterSet<T>::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValueError("unknown parameter " + name);
  return it->second;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValueError("unknown parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<ParameterSpec> parameter_layout(const ModelConfig& c) {
  c.validate();
  using Init = ParameterSpec::Init;
  const std::size_t d = c.embed_dim;
  std::vector<ParameterSpec> specs{
      {"patch_embed.weight", {c.patch_dim(), d}, Init::trunc_normal},
      {"patch_embed.bias", {d}, Init::zeros},
      {"cls_token", {d}, Init::zeros},
      {"pos_embed", {c.tokens(), d}, Init::trunc_normal},
  };
  const bool norms = c.norm == NormPlacement::pre;
  for (std::size_t i = 0; i < c.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    if (norms) {
      specs.push_back({p + "norm1.weight", {d}, Init::ones});
      specs.push_back({p + "norm1.bias", {d}, Init::zeros});
    }
    for (const char* proj : {"q", "k", "v", "proj"}) {
      specs.push_back({p + "attn." + proj + ".weight", {d, d}, Init::trunc_normal});
      specs.push_back({p + "attn." + proj + ".bias", {d}, Init::zeros});
    }
    if (norms) {
      specs.push_back({p + "norm2.weight", {d}, Init::ones});
      specs.push_back({p + "norm2.bias", {d}, Init::zeros});
    }
    specs.push_back({p + "mlp.fc1.weight", {d, c.ffn_hidden}, Init::trunc_normal});
    specs.push_back({p + "mlp.fc1.bias", {c.ffn_hidden}, Init::zeros});
    specs.push_back({p + "mlp.fc2.weight", {c.ffn_hidden, d}, Init::trunc_normal});
    specs.push_back({p + "mlp.fc2.bias", {d}, Init::zeros});
  }
  if (norms) {
    specs.push_back({"norm.weight", {d}, Init::ones});
    specs.push_back({"norm.bias", {d}, Init::zeros});
  }
  specs.push_back({"head.weight", {d, c.num_classes}, Init::trunc_normal});
  specs.push_back({"head.bias", {c.num_classes}, Init::zeros});
  return specs;
}

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  constexpr double kStd = 0.02;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParameterSet<T> params;
  for (const auto& spec : parameter_layout(config)) {
    Tensor<T> t(spec.shape);
    switch (spec.init) {
      case ParameterSpec::Init::zeros:
        break;
      case ParameterSpec::Init::ones:
        std::fill(t.data().begin(), t.data().end(), T{1});
        break;
      case ParameterSpec::Init::trunc_normal:
        for (T& v : t.data()) {
          double z = normal(rng);
          while (std::abs(z) > 2.0) z = normal(rng);
          v = static_cast<T>(z * kStd);
        }
        break;
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

template <typename T>
void check_parameters(const ParameterSet<T>& params, const ModelConfig& config) {
  const auto layout = parameter_layout(config);
  if (layout.size() != params.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.size()) + " tensors, config " +
                     "expects " + std::to_string(layout.size()));
  }
  for (const auto& spec : layout) {
    if (!params.contains(spec.name)) throw ShapeError("missing parameter " + spec.name);
    const auto& shape = params.at(spec.name).shape();
    if (shape != spec.shape) {
      throw ShapeError("parameter " + spec.name + " has shape " + shape_string(shape) +
                       ", expected " + shape_string(spec.shape));
    }
  }
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch_size) {
  if (image.rank() != 3) throw ShapeError("patchify: expected [C, S, S], got " +
                                          shape_string(image.shape()));
  Tensor<T> batch = patchify_batch(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}),
                                   patch_size);
  return batch.reshaped({batch.dim(1), batch.dim(2)});
}

template <typename T>
Tensor<T> patchify_batch(const Tensor<T>& batch, std::size_t patch_size) {
  if (batch.rank() != 4 || batch.dim(2) != batch.dim(3)) {
    throw ShapeError("patchify: expected [B, C, S, S], got " + shape_string(batch.shape()));
  }
  const std::size_t count = batch.dim(0), channels = batch.dim(1), side = batch.dim(2);
  if (patch_size == 0 || side % patch_size != 0) {
    throw ValueError("patchify: image size " + std::to_string(side) +
                     " is not divisible by patch size " + std::to_string(patch_size));
  }
  const std::size_t grid = side / patch_size;
  const std::size_t plen = channels * patch_size * patch_size;
  Tensor<T> out({count, grid * grid, plen});
  T* dst = out.data().data();
  for (std::size_t b = 0; b < count; ++b) {
    const T* img = batch.data().data() + b * channels * side * side;
    for (std::size_t gy = 0; gy < grid; ++gy) {
      for (std::size_t gx = 0; gx < grid; ++gx) {
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t r = 0; r < patch_size; ++r) {
            const T* src = img + (c * side + gy * patch_size + r) * side + gx * patch_size;
            dst = std::copy_n(src, patch_size, dst);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ParameterBinder<T>::ParameterBinder(Graph<T>& graph, const ParameterSet<T>& params,
                                    const std::vector<std::string>* frozen)
    : graph_(graph), params_(params), frozen_(frozen) {}

template <typename T>
Var ParameterBinder<T>::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  const bool is_frozen =
      frozen_ != nullptr && std::find(frozen_->begin(), frozen_->end(), name) != frozen_->end();
  Var v = is_frozen ? graph_.constant(params_.at(name)) : graph_.parameter(name, params_.at(name));
  bound_.emplace(name, v);
  return v;
}

namespace {

template <typename T>
Var affine(ParameterBinder<T>& bind, Var x, const std::string& prefix) {
  Graph<T>& g = bind.graph();
  return g.add_broadcast(g.matmul(x, bind(prefix + ".weight")), bind(prefix + ".bias"));
}

template <typename T>
Var maybe_norm(ParameterBinder<T>& bind, Var x, const std::string& prefix,
               const ModelConfig& config) {
  if (config.norm == NormPlacement::none) return x;
  return bind.graph().layer_norm(x, bind(prefix + ".weight"), bind(prefix + ".bias"),
                                 static_cast<T>(config.norm_eps));
}

}  // namespace

template <typename T>
Var embed(ParameterBinder<T>& bind, Var patches, const ModelConfig& config) {
  Graph<T>& g = bind.graph();
  const Tensor<T>& p = g.value(patches);
  if (p.rank() != 3 || p.dim(2) != config.patch_dim() || p.dim(1) != config.num_patches()) {
    throw ShapeError("embed: patches " + shape_string(p.shape()) + " do not match config (" +
                     std::to_string(config.num_patches()) + " patches of length " +
                     std::to_string(config.patch_dim()) + ")");
  }
  Var tokens = affine(bind, patches, "patch_embed");
  Var pos = bind("pos_embed");
  if (config.cls_positional) {
    return g.add_broadcast(g.prepend_token(bind("cls_token"), tokens), pos);
  }
  Var patch_pos = g.slice_rows(pos, 1, config.tokens());
  return g.prepend_token(bind("cls_token"), g.add_broadcast(tokens, patch_pos));
}

template <typename T>
Var attention(ParameterBinder<T>& bind, Var z, std::size_t layer, const ModelConfig& config,
              std::vector<Var>* weights) {
  Graph<T>& g = bind.graph();
  const Tensor<T>& zv = g.value(z);
  if (zv.rank() != 3 || zv.dim(2) != config.embed_dim) {
    throw ShapeError("attention: input " + shape_string(zv.shape()) + " vs embed dim " +
                     std::to_string(config.embed_dim));
  }
  const std::string p = "blocks." + std::to_string(layer) + ".attn.";
  const std::size_t heads = config.heads;
  Var q = g.split_heads(affine(bind, z, p + "q"), heads);
  Var k = g.split_heads(affine(bind, z, p + "k"), heads);
  Var v = g.split_heads(affine(bind, z, p + "v"), heads);
  const double width = config.attention_scale == AttentionScale::per_head
                           ? static_cast<double>(config.head_dim())
                           : static_cast<double>(config.embed_dim);
  Var scores = g.scale(g.matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(width)));
  Var probs = g.softmax(scores);
  if (weights != nullptr) weights->push_back(probs);
  Var context = g.merge_heads(g.matmul(probs, v), heads);
  return affine(bind, context, p + "proj");
}

template <typename T>
Var encoder_layer(ParameterBinder<T>& bind, Var z, std::size_t layer, const ModelConfig& config,
                  std::vector<Var>* weights) {
  Graph<T>& g = bind.graph();
  const std::string p = "blocks." + std::to_string(layer) + ".";
  Var attended =
      g.add(z, attention(bind, maybe_norm(bind, z, p + "norm1", config), layer, config, weights));
  Var hidden = g.gelu(affine(bind, maybe_norm(bind, attended, p + "norm2", config), p + "mlp.fc1"));
  return g.add(attended, affine(bind, hidden, p + "mlp.fc2"));
}

template <typename T>
Var forward_logits(ParameterBinder<T>& bind, const Tensor<T>& batch, const ModelConfig& config,
                   std::vector<Var>* weights) {
  config.validate();
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != config.image_size ||
      batch.dim(3) != config.image_size) {
    throw ShapeError("forward: batch " + shape_string(batch.shape()) + " does not match [B, 3, " +
                     std::to_string(config.image_size) + ", " +
                     std::to_string(config.image_size) + "]");
  }
  Graph<T>& g = bind.graph();
  Var z = embed(bind, g.constant(patchify_batch(batch, config.patch_size)), config);
  for (std::size_t layer = 0; layer < config.depth; ++layer) {
    z = encoder_layer(bind, z, layer, config, weights);
  }
  z = maybe_norm(bind, z, "norm", config);
  return affine(bind, g.select_token(z, 0), "head");
}

template <typename T>
ForwardOutput<T> forward(const Tensor<T>& batch, const ParameterSet<T>& params,
                         const ModelConfig& config, bool keep_attention) {
  Graph<T> g(false);
  ParameterBinder<T> bind(g, params);
  std::vector<Var> weights;
  Var logits = forward_logits(bind, batch, config, keep_attention ? &weights : nullptr);
  ForwardOutput<T> out;
  out.logits = g.value(logits);
  out.probabilities = ops::softmax(out.logits, 1);
  for (Var w : weights) out.attention.push_back(g.value(w));
  return out;
}

#define PCVIT_INSTANTIATE_VIT(T)                                                              \
  template class ParameterSet<T>;                                                             \
  template class ParameterBinder<T>;                                                          \
  template ParameterSet<T> init_parameters<T>(const ModelConfig&, std::uint64_t);             \
  template void check_parameters<T>(const ParameterSet<T>&, const ModelConfig&);              \
  template Tensor<T> patchify<T>(const Tensor<T>&, std::size_t);                              \
  template Tensor<T> patchify_batch<T>(const Tensor<T>&, std::size_t);                        \
  template Var embed<T>(ParameterBinder<T>&, Var, const ModelConfig&);                        \
  template Var attention<T>(ParameterBinder<T>&, Var, std::size_t, const ModelConfig&,        \
                            std::vector<Var>*);                                               \
  template Var encoder_layer<T>(ParameterBinder<T>&, Var, std::size_t, const ModelConfig&,    \
                                std::vector<Var>*);                                           \
  template Var forward_logits<T>(ParameterBinder<T>&, const Tensor<T>&, const ModelConfig&,   \
                                 std::vector<Var>*);                                          \
  template ForwardOutput<T> forward<T>(const Tensor<T>&, const ParameterSet<T>&,              \
                                       const ModelConfig&, bool);

PCVIT_INSTANTIATE_VIT(float)
PCVIT_INSTANTIATE_VIT(double)

#undef PCVIT_INSTANTIATE_VIT

}  // namespace pcvit
