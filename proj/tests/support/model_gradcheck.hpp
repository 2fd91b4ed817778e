#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pcvit/vit.hpp"
#include "support/gradcheck.hpp"

namespace pcvit::testkit {

// d=8, L=2, h=2, S=32, P=16, C=4.
inline ModelConfig mini_config() {
  ModelConfig c;
  c.variant = "mini";
  c.image_size = 32;
  c.patch_size = 16;
  c.embed_dim = 8;
  c.depth = 2;
  c.heads = 2;
  c.ffn_hidden = 16;
  c.num_classes = 4;
  return c;
}

inline Tensor<double> random_images(std::size_t batch, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<double> t({batch, 3, size, size});
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Parameters drawn uniformly in [-scale, scale]; norm gains around 1 so the
// check exercises the affine part of layer norm too.
inline ParameterSet<double> random_parameters(const ModelConfig& config, std::uint64_t seed,
                                              double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  ParameterSet<double> params;
  for (const auto& spec : parameter_layout(config)) {
    Tensor<double> t(spec.shape);
    for (auto& v : t.data()) v = u(rng);
    if (spec.init == ParameterSpec::Init::ones) {
      for (auto& v : t.data()) v += 1.0;
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

// Mean cross-entropy of the softmax probabilities, the loss composed
// literally as cross_entropy(forward(x)).
inline double model_loss(const ParameterSet<double>& params, const ModelConfig& config,
                         const Tensor<double>& images, std::span<const int> labels) {
  Graph<double> g(false);
  ParameterBinder<double> bind(g, params);
  Var logits = forward_logits(bind, images, config);
  return g.value(g.cross_entropy_probs(g.softmax(logits), labels)).item();
}

inline GradientMap<double> model_gradients(const ParameterSet<double>& params,
                                           const ModelConfig& config,
                                           const Tensor<double>& images,
                                           std::span<const int> labels) {
  Graph<double> g;
  ParameterBinder<double> bind(g, params);
  Var logits = forward_logits(bind, images, config);
  return g.backward(g.cross_entropy_probs(g.softmax(logits), labels));
}

struct GroupResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central differences for every element of every parameter tensor.
inline std::vector<GroupResult> model_gradient_check(ParameterSet<double> params,
                                                     const ModelConfig& config,
                                                     const Tensor<double>& images,
                                                     std::span<const int> labels,
                                                     double step = 1e-5) {
  const GradientMap<double> analytic = model_gradients(params, config, images, labels);
  std::vector<GroupResult> out;
  for (const auto& name : params.names()) {
    GroupResult r{name};
    Tensor<double>& t = params.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = t[i];
      t[i] = x + step;
      const double up = model_loss(params, config, images, labels);
      t[i] = x - step;
      const double down = model_loss(params, config, images, labels);
      t[i] = x;
      const double numeric = (up - down) / (2 * step);
      r.max_relative_error =
          std::max(r.max_relative_error, relative_error(analytic.at(name)[i], numeric));
      ++r.checked;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace pcvit::testkit
