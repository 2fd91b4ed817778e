#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "pcvit/metrics.hpp"
#include "pcvit/plot.hpp"
#include "support/tempdir.hpp"

using namespace pcvit;

namespace {

// Mann-Whitney form: fraction of (positive, negative) pairs ranked correctly,
// ties counting one half.
double rank_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  auto flags = std::make_unique<bool[]>(positive.size());
  std::copy(positive.begin(), positive.end(), flags.get());
  return auc(roc_binary(scores, std::span<const bool>(flags.get(), positive.size())));
}

Tensor<double> random_scores(std::size_t n, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<double> s({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t k = 0; k < c; ++k) sum += s[i * c + k] = u(rng);
    for (std::size_t k = 0; k < c; ++k) s[i * c + k] /= sum;
  }
  return s;
}

std::vector<int> random_labels(std::size_t n, int c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, c - 1);
  std::vector<int> out(n);
  for (auto& l : out) l = u(rng);
  return out;
}

const std::vector<std::string> kNames{"glioma", "meningioma", "no_tumor", "pituitary"};

}  // namespace

TEST(Confusion, WorkedExample) {
  const std::vector<int> y{0, 0, 1, 2, 3, 3};
  const std::vector<int> p{0, 1, 1, 2, 3, 2};
  const ConfusionMatrix cm = confusion(y, p, 4);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(3, 2), 1u);
  EXPECT_EQ(cm.trace(), 4u);
  EXPECT_EQ(cm.total(), 6u);
  const PrfSummary s = macro_prf(cm);
  EXPECT_DOUBLE_EQ(s.macro_precision, 0.75);
  EXPECT_DOUBLE_EQ(s.macro_recall, 0.75);
  EXPECT_DOUBLE_EQ(s.per_class[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(s.per_class[0].recall, 0.5);
  EXPECT_NEAR(s.macro_f1, (2.0 / 3 * 4) / 4, 1e-12);
  EXPECT_DOUBLE_EQ(s.f1_of_macro, 0.75);
}

TEST(Confusion, RowsSumToSupportAndTotalToN) {
  std::mt19937_64 rng(1);
  const auto y = random_labels(200, 4, rng);
  const auto p = random_labels(200, 4, rng);
  const ConfusionMatrix cm = confusion(y, p, 4);
  EXPECT_EQ(cm.total(), 200u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(cm.row_sum(c),
              static_cast<std::size_t>(std::count(y.begin(), y.end(), static_cast<int>(c))));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == p[i];
  EXPECT_EQ(cm.trace(), hits);
}

TEST(Confusion, RejectsBadInput) {
  const std::vector<int> a{0, 1}, b{0}, c{0, 4}, empty;
  EXPECT_THROW(confusion(a, b, 4), ValueError);
  EXPECT_THROW(confusion(a, c, 4), ValueError);
  EXPECT_THROW(confusion(empty, empty, 4), ValueError);
}

TEST(Prf, NeverPredictedClassCountsAsZeroAndIsFlagged) {
  const std::vector<int> y{0, 1, 2, 3};
  const std::vector<int> p{0, 1, 2, 2};
  const PrfSummary s = macro_prf(confusion(y, p, 4));
  EXPECT_TRUE(s.per_class[3].precision_undefined);
  EXPECT_EQ(s.per_class[3].precision, 0.0);
  EXPECT_FALSE(s.per_class[3].recall_undefined);
  EXPECT_DOUBLE_EQ(s.macro_precision, (1 + 1 + 0.5 + 0) / 4);
}

TEST(Roc, PerfectSeparation) {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  EXPECT_DOUBLE_EQ(binary_auc(s, {true, true, false, false}), 1.0);
  EXPECT_DOUBLE_EQ(binary_auc(s, {false, false, true, true}), 0.0);
}

TEST(Roc, ReferenceExample) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<bool> pos{false, false, true, true};
  EXPECT_DOUBLE_EQ(binary_auc(s, pos), 0.75);
}

TEST(Roc, AllTiedScoresGiveChance) {
  const std::vector<double> s(6, 0.3);
  const std::vector<bool> pos{true, false, true, false, false, true};
  auto flags = std::make_unique<bool[]>(6);
  std::copy(pos.begin(), pos.end(), flags.get());
  const RocCurve curve = roc_binary(s, std::span<const bool>(flags.get(), 6));
  ASSERT_EQ(curve.fpr.size(), 2u);
  EXPECT_EQ(curve.fpr[1], 1.0);
  EXPECT_EQ(curve.tpr[1], 1.0);
  EXPECT_DOUBLE_EQ(auc(curve), 0.5);
}

TEST(Roc, CurveIsMonotoneFromOriginToOne) {
  std::mt19937_64 rng(2);
  const Tensor<double> s = random_scores(300, 4, rng);
  const auto y = random_labels(300, 4, rng);
  for (std::size_t c = 0; c < 4; ++c) {
    const RocCurve r = roc_ovr(s, y, c);
    EXPECT_EQ(r.fpr.front(), 0.0);
    EXPECT_EQ(r.tpr.front(), 0.0);
    EXPECT_EQ(r.fpr.back(), 1.0);
    EXPECT_EQ(r.tpr.back(), 1.0);
    for (std::size_t i = 1; i < r.fpr.size(); ++i) {
      EXPECT_GE(r.fpr[i], r.fpr[i - 1]);
      EXPECT_GE(r.tpr[i], r.tpr[i - 1]);
    }
  }
}

TEST(Roc, UndefinedWithoutBothClasses) {
  const std::vector<double> s{0.2, 0.4};
  const bool all[] = {true, true};
  const RocCurve r = roc_binary(s, all);
  EXPECT_FALSE(r.defined());
  EXPECT_THROW(auc(r), ValueError);
}

TEST(Auc, MatchesRankSumOracleWithTies) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(60);
    std::vector<bool> pos(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = coarse(rng) / 10.0;
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(binary_auc(s, pos), rank_auc(s, pos), 1e-12);
  }
}

TEST(Auc, RandomScoresNearChance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> s(10000);
  std::vector<bool> pos(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    pos[i] = coin(rng);
  }
  EXPECT_NEAR(binary_auc(s, pos), 0.5, 0.02);
}

TEST(Auc, InvariantUnderMonotoneTransformAndPermutation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(100);
  std::vector<bool> pos(100);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    pos[i] = u(rng) < s[i];
  }
  const double base = binary_auc(s, pos);
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 1.0);
  std::vector<double> t(s.size());
  std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3 * v) - 7; });
  EXPECT_NEAR(binary_auc(t, pos), base, 1e-12);

  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> ps(s.size());
  std::vector<bool> ppos(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    ps[i] = s[perm[i]];
    ppos[i] = pos[perm[i]];
  }
  EXPECT_NEAR(binary_auc(ps, ppos), base, 1e-12);
}

TEST(Report, AccuracyEqualsTraceAndSampleCount) {
  std::mt19937_64 rng(6);
  const Tensor<double> s = random_scores(250, 4, rng);
  const auto y = random_labels(250, 4, rng);
  const EvaluationReport r = full_report(s, y, kNames);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double* row = &s[i * 4];
    hits += static_cast<int>(std::max_element(row, row + 4) - row) == y[i];
  }
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(hits) / 250);
  EXPECT_EQ(r.confusion.trace(), hits);
  EXPECT_EQ(r.samples, 250u);
  for (const auto& a : r.class_auc) ASSERT_TRUE(a.has_value());
  double mean = 0;
  for (const auto& a : r.class_auc) mean += *a / 4;
  EXPECT_NEAR(r.macro_auc, mean, 1e-12);
}

TEST(Report, RelabelingClassesPermutesPerClassResults) {
  std::mt19937_64 rng(7);
  const Tensor<double> s = random_scores(120, 4, rng);
  const auto y = random_labels(120, 4, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // old class c becomes perm[c]
  Tensor<double> s2({120, 4});
  std::vector<int> y2(120);
  for (std::size_t i = 0; i < 120; ++i) {
    for (std::size_t c = 0; c < 4; ++c) s2[i * 4 + perm[c]] = s[i * 4 + c];
    y2[i] = static_cast<int>(perm[static_cast<std::size_t>(y[i])]);
  }
  const EvaluationReport a = full_report(s, y, kNames);
  const EvaluationReport b = full_report(s2, y2, kNames);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(*a.class_auc[c], *b.class_auc[perm[c]], 1e-12);
    EXPECT_NEAR(a.prf.per_class[c].recall, b.prf.per_class[perm[c]].recall, 1e-12);
  }
  EXPECT_NEAR(a.macro_auc, b.macro_auc, 1e-12);
  EXPECT_NEAR(a.accuracy, b.accuracy, 1e-12);
}

TEST(Report, MissingClassExcludedFromMacroAucWithWarning) {
  Tensor<double> s({4, 4}, std::vector<double>{0.7, 0.1, 0.1, 0.1,  //
                                               0.1, 0.7, 0.1, 0.1,  //
                                               0.1, 0.1, 0.7, 0.1,  //
                                               0.6, 0.2, 0.1, 0.1});
  const std::vector<int> y{0, 1, 2, 0};
  const EvaluationReport r = full_report(s, y, kNames);
  EXPECT_FALSE(r.class_auc[3].has_value());
  EXPECT_DOUBLE_EQ(r.macro_auc, 1.0);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Report, JsonRoundTripAndFiles) {
  std::mt19937_64 rng(8);
  const Tensor<double> s = random_scores(80, 4, rng);
  const auto y = random_labels(80, 4, rng);
  const EvaluationReport r = full_report(s, y, kNames);
  testkit::TempDir dir;
  write_report(dir.path(), r);
  const EvaluationReport back = read_report(dir.path());
  EXPECT_EQ(back.class_names, r.class_names);
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.macro_auc, r.macro_auc);
  EXPECT_EQ(back.prf.macro_f1, r.prf.macro_f1);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(back.roc[c].fpr, r.roc[c].fpr);
    EXPECT_EQ(back.roc[c].tpr, r.roc[c].tpr);
    EXPECT_EQ(back.class_auc[c], r.class_auc[c]);
  }
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());

  for (const char* f : {"report.json", "confusion_matrix.csv", "per_class_metrics.csv",
                        "roc_points.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const std::string per_class = testkit::read_file(dir / "per_class_metrics.csv");
  EXPECT_EQ(std::count(per_class.begin(), per_class.end(), '\n'), 6);  // header, 4 classes, macro
  EXPECT_NE(per_class.find("\nmacro,"), std::string::npos);
  for (const auto& name : kNames) EXPECT_NE(per_class.find(name), std::string::npos);
}

TEST(Report, MalformedJsonNamesField) {
  std::mt19937_64 rng(9);
  const EvaluationReport r =
      full_report(random_scores(20, 4, rng), random_labels(20, 4, rng), kNames);
  nlohmann::json j = to_json(r);
  j.erase("macro_auc");
  testkit::TempDir dir;
  testkit::write_file(dir / "report.json", j.dump());
  try {
    read_report(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("macro_auc"), std::string::npos) << e.what();
  }
  j = to_json(r);
  j["accuracy"] = "high";
  testkit::write_file(dir / "report.json", j.dump());
  try {
    read_report(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("accuracy"), std::string::npos) << e.what();
  }
}

TEST(Plot, RocSvgHasOneCurvePerClassAndIsDeterministic) {
  Tensor<double> s({4, 4}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) s[i * 4 + i] = 1.0;
  const std::vector<int> y{0, 1, 2, 3};
  const EvaluationReport r = full_report(s, y, kNames);
  const std::string svg = roc_svg(r);
  std::size_t curves = 0;
  for (std::size_t pos = svg.find("class=\"roc\""); pos != std::string::npos;
       pos = svg.find("class=\"roc\"", pos + 1)) {
    ++curves;
  }
  EXPECT_EQ(curves, 4u);
  EXPECT_EQ(svg, roc_svg(r));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  for (const auto& name : kNames) EXPECT_NE(svg.find(name), std::string::npos);
  // Perfect scores put every curve through the top-left corner.
  for (const auto& curve : r.roc) {
    bool corner = false;
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      corner = corner || (curve.fpr[i] == 0.0 && curve.tpr[i] == 1.0);
    }
    EXPECT_TRUE(corner);
  }
  const std::string cm = confusion_svg(r);
  EXPECT_EQ(cm, confusion_svg(r));
  EXPECT_NE(cm.find("</svg>"), std::string::npos);
}
