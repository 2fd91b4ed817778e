#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pcvit/ops.hpp"
#include "pcvit/vit.hpp"
#include "support/model_gradcheck.hpp"

using namespace pcvit;
using testkit::mini_config;
using testkit::random_images;
using testkit::random_parameters;

namespace {

// Straight-line reference for one sequence, written with nested vectors
// and explicit loops.
using Mat = std::vector<std::vector<double>>;

Mat linear(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = b[j];
      for (std::size_t i = 0; i < in; ++i) s += x[t][i] * w.at({i, j});
      y[t][j] = s;
    }
  }
  return y;
}

Mat norm(const Mat& x, const Tensor<double>& gain, const Tensor<double>& bias, double eps) {
  Mat y = x;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double n = static_cast<double>(x[t].size());
    double mean = 0, var = 0;
    for (double v : x[t]) mean += v;
    mean /= n;
    for (double v : x[t]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t i = 0; i < x[t].size(); ++i) {
      y[t][i] = (x[t][i] - mean) / std::sqrt(var + eps) * gain[i] + bias[i];
    }
  }
  return y;
}

double gelu_ref(double x) {
  return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
}

Mat attention_ref(const Mat& z, const ParameterSet<double>& p, std::size_t layer,
                  const ModelConfig& c, std::vector<Mat>* probs_out = nullptr) {
  const std::string pre = "blocks." + std::to_string(layer) + ".attn.";
  const Mat q = linear(z, p.at(pre + "q.weight"), p.at(pre + "q.bias"));
  const Mat k = linear(z, p.at(pre + "k.weight"), p.at(pre + "k.bias"));
  const Mat v = linear(z, p.at(pre + "v.weight"), p.at(pre + "v.bias"));
  const std::size_t n = z.size(), w = c.embed_dim / c.heads;
  const double scale = std::sqrt(c.attention_scale == AttentionScale::per_head
                                     ? static_cast<double>(w)
                                     : static_cast<double>(c.embed_dim));
  Mat ctx(n, std::vector<double>(c.embed_dim, 0.0));
  for (std::size_t h = 0; h < c.heads; ++h) {
    Mat probs(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double peak = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t e = 0; e < w; ++e) s += q[i][h * w + e] * k[j][h * w + e];
        probs[i][j] = s / scale;
        peak = std::max(peak, probs[i][j]);
      }
      double total = 0;
      for (std::size_t j = 0; j < n; ++j) total += (probs[i][j] = std::exp(probs[i][j] - peak));
      for (std::size_t j = 0; j < n; ++j) probs[i][j] /= total;
      for (std::size_t e = 0; e < w; ++e) {
        for (std::size_t j = 0; j < n; ++j) ctx[i][h * w + e] += probs[i][j] * v[j][h * w + e];
      }
    }
    if (probs_out) probs_out->push_back(probs);
  }
  return linear(ctx, p.at(pre + "proj.weight"), p.at(pre + "proj.bias"));
}

Mat encoder_ref(const Mat& z, const ParameterSet<double>& p, std::size_t layer,
                const ModelConfig& c) {
  const std::string pre = "blocks." + std::to_string(layer) + ".";
  auto maybe_norm = [&](const Mat& x, const std::string& n) {
    if (c.norm == NormPlacement::none) return x;
    return norm(x, p.at(pre + n + ".weight"), p.at(pre + n + ".bias"), c.norm_eps);
  };
  Mat a = attention_ref(maybe_norm(z, "norm1"), p, layer, c);
  for (std::size_t t = 0; t < z.size(); ++t)
    for (std::size_t i = 0; i < c.embed_dim; ++i) a[t][i] += z[t][i];
  Mat h = linear(maybe_norm(a, "norm2"), p.at(pre + "mlp.fc1.weight"), p.at(pre + "mlp.fc1.bias"));
  for (auto& row : h)
    for (auto& v : row) v = gelu_ref(v);
  Mat out = linear(h, p.at(pre + "mlp.fc2.weight"), p.at(pre + "mlp.fc2.bias"));
  for (std::size_t t = 0; t < z.size(); ++t)
    for (std::size_t i = 0; i < c.embed_dim; ++i) out[t][i] += a[t][i];
  return out;
}

Mat embed_ref(const Tensor<double>& images, std::size_t b, const ParameterSet<double>& p,
              const ModelConfig& c) {
  const std::size_t P = c.patch_size, S = c.image_size, g = S / P;
  Mat patches;
  for (std::size_t gr = 0; gr < g; ++gr) {
    for (std::size_t gc = 0; gc < g; ++gc) {
      std::vector<double> flat;
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t r = 0; r < P; ++r)
          for (std::size_t col = 0; col < P; ++col)
            flat.push_back(images.at({b, ch, gr * P + r, gc * P + col}));
      patches.push_back(flat);
    }
  }
  Mat tokens = linear(patches, p.at("patch_embed.weight"), p.at("patch_embed.bias"));
  const Tensor<double>& cls = p.at("cls_token");
  const Tensor<double>& pos = p.at("pos_embed");
  Mat z(1, std::vector<double>(cls.data().begin(), cls.data().end()));
  z.insert(z.end(), tokens.begin(), tokens.end());
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (t == 0 && !c.cls_positional) continue;
    for (std::size_t i = 0; i < c.embed_dim; ++i) z[t][i] += pos.at({t, i});
  }
  return z;
}

std::vector<double> logits_ref(const Tensor<double>& images, std::size_t b,
                               const ParameterSet<double>& p, const ModelConfig& c) {
  Mat z = embed_ref(images, b, p, c);
  for (std::size_t l = 0; l < c.depth; ++l) z = encoder_ref(z, p, l, c);
  if (c.norm == NormPlacement::pre) z = norm(z, p.at("norm.weight"), p.at("norm.bias"), c.norm_eps);
  return linear(Mat{z[0]}, p.at("head.weight"), p.at("head.bias"))[0];
}

Tensor<double> to_tensor(const Mat& m) {
  Tensor<double> t({1, m.size(), m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t.at({0, i, j}) = m[i][j];
  return t;
}

ModelConfig small_attention_config(std::size_t d, std::size_t h) {
  ModelConfig c = mini_config();
  c.embed_dim = d;
  c.heads = h;
  return c;
}

ParameterSet<double> identity_attention(std::size_t d) {
  ParameterSet<double> p;
  Tensor<double> eye({d, d});
  for (std::size_t i = 0; i < d; ++i) eye.at({i, i}) = 1;
  for (const char* n : {"q", "k", "v", "proj"}) {
    p.add(std::string("blocks.0.attn.") + n + ".weight", eye);
    p.add(std::string("blocks.0.attn.") + n + ".bias", Tensor<double>::zeros({d}));
  }
  return p;
}

void zero_branches(ParameterSet<double>& p, const ModelConfig& c) {
  for (std::size_t l = 0; l < c.depth; ++l) {
    const std::string pre = "blocks." + std::to_string(l) + ".";
    for (const char* n : {"attn.q", "attn.k", "attn.v", "attn.proj", "mlp.fc1", "mlp.fc2"}) {
      for (const char* s : {".weight", ".bias"}) {
        auto& t = p.at(pre + n + s);
        std::fill(t.data().begin(), t.data().end(), 0.0);
      }
    }
    for (const char* n : {"norm1.weight", "norm2.weight"}) {
      auto& t = p.at(pre + n);
      std::fill(t.data().begin(), t.data().end(), 0.0);
    }
  }
}

}  // namespace

TEST(Patchify, Counts) {
  EXPECT_EQ(patchify(Tensor<float>({3, 224, 224}), 16).shape(), (Shape{196, 768}));
  EXPECT_EQ(patchify(Tensor<float>({3, 32, 32}), 16).shape(), (Shape{4, 768}));
  EXPECT_THROW(patchify(Tensor<float>({3, 30, 30}), 16), Error);
}

TEST(Patchify, ConstantImageGivesIdenticalPatches) {
  const Tensor<double> p = patchify(Tensor<double>({3, 32, 32}, 0.25), 8);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], 0.25);
}

TEST(Patchify, LayoutIsRowMajorGridChannelMajorPatch) {
  Tensor<double> img({3, 4, 4});
  std::iota(img.data().begin(), img.data().end(), 0.0);
  const Tensor<double> p = patchify(img, 2);
  // Patch 1 is grid (0, 1): channel 0 rows 0-1, cols 2-3 first.
  EXPECT_EQ(p.at({1, 0}), img.at({0, 0, 2}));
  EXPECT_EQ(p.at({1, 1}), img.at({0, 0, 3}));
  EXPECT_EQ(p.at({1, 2}), img.at({0, 1, 2}));
  EXPECT_EQ(p.at({1, 4}), img.at({1, 0, 2}));
  EXPECT_EQ(p.at({2, 0}), img.at({0, 2, 0}));
}

TEST(Config, SequenceLengthAndValidation) {
  const ModelConfig base = variant_config("base");
  EXPECT_EQ(base.num_patches(), 196u);
  EXPECT_EQ(base.tokens(), 197u);
  EXPECT_EQ(variant_config("tiny").embed_dim, 192u);
  EXPECT_THROW(variant_config("huge"), ValueError);
  ModelConfig bad = base;
  bad.heads = 7;
  EXPECT_THROW(bad.validate(), ValueError);
  bad = base;
  bad.image_size = 100;
  EXPECT_THROW(bad.validate(), ValueError);
  EXPECT_EQ(model_config_from_json(to_json(mini_config())), mini_config());
}

TEST(Embed, ZeroPatchesAndWeights) {
  const ModelConfig c = mini_config();
  ParameterSet<double> p = init_parameters<double>(c, 1);
  for (const char* n : {"patch_embed.weight", "patch_embed.bias", "pos_embed"}) {
    std::fill(p.at(n).data().begin(), p.at(n).data().end(), 0.0);
  }
  for (std::size_t i = 0; i < c.embed_dim; ++i) p.at("cls_token")[i] = 0.1 * (i + 1);
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  const Tensor<double> z =
      g.value(embed(bind, g.constant(Tensor<double>({2, 4, c.patch_dim()})), c));
  ASSERT_EQ(z.shape(), (Shape{2, 5, 8}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(z.at({b, 0, i}), 0.1 * (i + 1));
    for (std::size_t t = 1; t < 5; ++t)
      for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(z.at({b, t, i}), 0.0);
  }
}

TEST(Attention, SingleTokenIsProjectedValue) {
  const ModelConfig c = small_attention_config(2, 1);
  ParameterSet<double> p = identity_attention(2);
  p.at("blocks.0.attn.v.weight") = Tensor<double>({2, 2}, std::vector<double>{2, 1, 0, 3});
  p.at("blocks.0.attn.proj.bias") = Tensor<double>({2}, std::vector<double>{1, -1});
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  std::vector<Var> weights;
  const Var out =
      attention(bind, g.constant(Tensor<double>({1, 1, 2}, std::vector<double>{1, 2})), 0, c,
                &weights);
  EXPECT_EQ(g.value(weights.at(0)).values(), std::vector<double>{1.0});
  // v = [1, 2] W_v = [2, 7]; proj = identity plus bias.
  EXPECT_EQ(g.value(out).values(), (std::vector<double>{3, 6}));
}

TEST(Attention, IdenticalKeysAttendUniformly) {
  const ModelConfig c = small_attention_config(2, 1);
  ParameterSet<double> p = identity_attention(2);
  std::fill(p.at("blocks.0.attn.k.weight").data().begin(),
            p.at("blocks.0.attn.k.weight").data().end(), 0.0);
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  std::vector<Var> weights;
  attention(bind, g.constant(Tensor<double>({1, 2, 2}, std::vector<double>{1, 0, 0, 1})), 0, c,
            &weights);
  for (double v : g.value(weights.at(0)).data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Attention, HandComputedTwoTokens) {
  // Q = K = V = z = I, scale sqrt(2): row 0 scores (1/sqrt2, 0).
  const ModelConfig c = small_attention_config(2, 1);
  const ParameterSet<double> p = identity_attention(2);
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  const Tensor<double> out = g.value(
      attention(bind, g.constant(Tensor<double>({1, 2, 2}, std::vector<double>{1, 0, 0, 1})), 0, c));
  const double s = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
  EXPECT_NEAR(out.at({0, 0, 0}), s, 1e-12);
  EXPECT_NEAR(out.at({0, 0, 1}), 1 - s, 1e-12);
  EXPECT_NEAR(out.at({0, 1, 0}), 1 - s, 1e-12);
  EXPECT_NEAR(out.at({0, 1, 1}), s, 1e-12);
}

TEST(Attention, MultiHeadMatchesScalarOracle) {
  for (AttentionScale scale : {AttentionScale::per_head, AttentionScale::full}) {
    ModelConfig c = mini_config();
    c.attention_scale = scale;
    const ParameterSet<double> p = random_parameters(c, 3);
    Mat z(5, std::vector<double>(8));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& row : z)
      for (auto& v : row) v = u(rng);
    std::vector<Mat> probs_ref;
    const Mat ref = attention_ref(z, p, 1, c, &probs_ref);
    Graph<double> g(false);
    ParameterBinder<double> bind(g, p);
    std::vector<Var> weights;
    const Tensor<double> out = g.value(attention(bind, g.constant(to_tensor(z)), 1, c, &weights));
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(out.at({0, t, i}), ref[t][i], 1e-12);
    const Tensor<double>& w = g.value(weights.at(0));
    ASSERT_EQ(w.shape(), (Shape{2, 5, 5}));
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(w.at({h, i, j}), probs_ref[h][i][j], 1e-12);
  }
}

TEST(Encoder, ShapePreservedAndScalarOracle) {
  ModelConfig c = small_attention_config(4, 1);
  c.ffn_hidden = 6;
  const ParameterSet<double> p = random_parameters(c, 5);
  Mat z(3, std::vector<double>(4));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& row : z)
    for (auto& v : row) v = u(rng);
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  const Tensor<double> out = g.value(encoder_layer(bind, g.constant(to_tensor(z)), 0, c));
  EXPECT_EQ(out.shape(), (Shape{1, 3, 4}));
  const Mat ref = encoder_ref(z, p, 0, c);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.at({0, t, i}), ref[t][i], 1e-6);
}

TEST(Encoder, ZeroBranchesAreIdentity) {
  const ModelConfig c = mini_config();
  ParameterSet<double> p = random_parameters(c, 7);
  zero_branches(p, c);
  Tensor<double> z8({2, 5, 8});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto& v : z8.data()) v = u(rng);
  Graph<double> g(false);
  ParameterBinder<double> bind(g, p);
  EXPECT_EQ(g.value(encoder_layer(bind, g.constant(z8), 0, c)), z8);
}

TEST(Forward, MatchesScalarOracleEndToEnd) {
  for (bool cls_pos : {true, false}) {
    ModelConfig c = mini_config();
    c.cls_positional = cls_pos;
    const ParameterSet<double> p = random_parameters(c, 10);
    const Tensor<double> x = random_images(2, 32, 11);
    const ForwardOutput<double> y = forward(x, p, c);
    ASSERT_EQ(y.logits.shape(), (Shape{2, 4}));
    for (std::size_t b = 0; b < 2; ++b) {
      const auto ref = logits_ref(x, b, p, c);
      for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(y.logits.at({b, k}), ref[k], 1e-10);
    }
  }
}

TEST(Forward, ResidualIdentityComposesAcrossLayers) {
  const ModelConfig c = mini_config();
  ParameterSet<double> p = random_parameters(c, 12);
  zero_branches(p, c);
  const Tensor<double> x = random_images(2, 32, 13);
  const ForwardOutput<double> y = forward(x, p, c);
  // With identity layers only the class token (plus its position) reaches the head.
  Mat cls(1, std::vector<double>(8));
  for (std::size_t i = 0; i < 8; ++i) cls[0][i] = p.at("cls_token")[i] + p.at("pos_embed").at({0, i});
  const Mat logits = linear(norm(cls, p.at("norm.weight"), p.at("norm.bias"), c.norm_eps),
                            p.at("head.weight"), p.at("head.bias"));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(y.logits.at({b, k}), logits[0][k], 1e-12);
}

TEST(Forward, DefaultConfigShapeAndProbabilities) {
  const ModelConfig c = variant_config("base");
  const ParameterSet<float> p = init_parameters<float>(c, 1);
  EXPECT_EQ(p.scalar_count(), 85801732u);
  Tensor<float> x({2, 3, 224, 224});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.data()) v = u(rng);
  const ForwardOutput<float> y = forward(x, p, c);
  ASSERT_EQ(y.logits.shape(), (Shape{2, 4}));
  for (std::size_t b = 0; b < 2; ++b) {
    float total = 0;
    for (std::size_t k = 0; k < 4; ++k) total += y.probabilities.at({b, k});
    EXPECT_NEAR(total, 1.0f, 1e-5);
  }
}

TEST(Forward, AttentionRowsAreDistributions) {
  const ModelConfig c = mini_config();
  const ForwardOutput<double> y =
      forward(random_images(3, 32, 14), random_parameters(c, 15, 1.5), c, true);
  ASSERT_EQ(y.attention.size(), 2u);
  for (const auto& a : y.attention) {
    ASSERT_EQ(a.shape(), (Shape{6, 5, 5}));
    for (std::size_t r = 0; r < 30; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_GE(a[r * 5 + j], 0.0);
        total += a[r * 5 + j];
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Forward, BatchPermutationPermutesOutputs) {
  const ModelConfig c = mini_config();
  const ParameterSet<double> p = random_parameters(c, 16);
  const Tensor<double> x = random_images(3, 32, 17);
  const std::size_t n = 3 * 32 * 32;
  Tensor<double> swapped(x.shape());
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t b = 0; b < 3; ++b)
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(perm[b] * n), n,
                swapped.data().begin() + static_cast<std::ptrdiff_t>(b * n));
  const auto y = forward(x, p, c), ys = forward(swapped, p, c);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_NEAR(ys.logits.at({b, k}), y.logits.at({perm[b], k}), 1e-12);
}

TEST(Forward, LogitShiftKeepsPredictions) {
  const ModelConfig c = mini_config();
  const auto y = forward(random_images(4, 32, 18), random_parameters(c, 19), c);
  Tensor<double> shifted = y.logits;
  for (auto& v : shifted.data()) v += 123.5;
  EXPECT_EQ(ops::argmax_rows(shifted), ops::argmax_rows(y.logits));
  EXPECT_EQ(ops::argmax_rows(ops::softmax(shifted, 1)), ops::argmax_rows(y.probabilities));
}

TEST(Forward, ShapeTotalOverValidConfigs) {
  for (std::size_t S : {16u, 32u, 48u}) {
    for (std::size_t P : {8u, 16u}) {
      if (S % P != 0) continue;
      for (std::size_t h : {1u, 2u, 4u}) {
        ModelConfig c = mini_config();
        c.image_size = S;
        c.patch_size = P;
        c.heads = h;
        c.depth = 1;
        c.num_classes = 3;
        const auto y = forward(random_images(2, S, 20), random_parameters(c, 21), c);
        EXPECT_EQ(y.logits.shape(), (Shape{2, 3}));
      }
    }
  }
  ModelConfig c = mini_config();
  EXPECT_THROW(forward(random_images(1, 48, 1), random_parameters(c, 1), c), ShapeError);
}

TEST(Init, DeterministicTruncatedAndGainsOne) {
  ModelConfig c = variant_config("tiny");
  c.image_size = 64;
  c.depth = 2;
  const auto a = init_parameters<float>(c, 42);
  const auto b = init_parameters<float>(c, 42);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == init_parameters<float>(c, 43));
  for (const auto& spec : parameter_layout(c)) {
    const auto& t = a.at(spec.name);
    EXPECT_EQ(t.shape(), spec.shape) << spec.name;
    for (float v : t.data()) {
      switch (spec.init) {
        case ParameterSpec::Init::ones: EXPECT_EQ(v, 1.0f) << spec.name; break;
        case ParameterSpec::Init::zeros: EXPECT_EQ(v, 0.0f) << spec.name; break;
        case ParameterSpec::Init::trunc_normal: EXPECT_LE(std::abs(v), 0.04f) << spec.name; break;
      }
    }
  }
  const auto& w = a.at("blocks.0.attn.q.weight");
  double sq = 0;
  for (float v : w.data()) sq += double(v) * v;
  const double sd = std::sqrt(sq / static_cast<double>(w.size()));
  EXPECT_GT(sd, 0.015);
  EXPECT_LT(sd, 0.02);
}

TEST(Init, LayoutHasNoNormsWithoutPreNorm) {
  ModelConfig c = mini_config();
  c.norm = NormPlacement::none;
  for (const auto& spec : parameter_layout(c)) EXPECT_EQ(spec.name.find("norm"), std::string::npos);
  const auto p = init_parameters<double>(c, 1);
  EXPECT_NO_THROW(check_parameters(p, c));
  EXPECT_THROW(check_parameters(p, mini_config()), ShapeError);
}

TEST(Gradients, MiniModelMatchesFiniteDifferences) {
  const ModelConfig c = mini_config();
  const std::vector<int> labels{0, 3};
  const auto groups = testkit::model_gradient_check(random_parameters(c, 22), c,
                                                    random_images(2, 32, 23), labels);
  EXPECT_EQ(groups.size(), parameter_layout(c).size());
  for (const auto& g : groups) EXPECT_LT(g.max_relative_error, 1e-4) << g.name;
}

TEST(Gradients, HeadOnlyBindingFreezesBackbone) {
  const ModelConfig c = mini_config();
  const ParameterSet<double> p = random_parameters(c, 24);
  std::vector<std::string> frozen;
  for (const auto& n : p.names())
    if (n.rfind("head.", 0) != 0) frozen.push_back(n);
  Graph<double> g;
  ParameterBinder<double> bind(g, p, &frozen);
  const std::vector<int> labels{1};
  const auto grads =
      g.backward(g.cross_entropy_logits(forward_logits(bind, random_images(1, 32, 25), c), labels));
  EXPECT_EQ(grads.size(), 2u);
  EXPECT_TRUE(grads.contains("head.weight"));
  EXPECT_TRUE(grads.contains("head.bias"));
}
