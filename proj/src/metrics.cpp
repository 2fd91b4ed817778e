#include "pcvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "pcvit/ops.hpp"
#include "pcvit/tensor_file.hpp"

namespace fs = std::filesystem;

namespace pcvit {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ValueError("confusion matrix needs at least one class");
}

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= classes_ || predicted >= classes_) throw ValueError("confusion index out of range");
  return counts_[truth * classes_ + predicted];
}

void ConfusionMatrix::increment(std::size_t truth, std::size_t predicted) {
  if (truth >= classes_ || predicted >= classes_) throw ValueError("confusion index out of range");
  ++counts_[truth * classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < classes_; ++i) t += counts_[i * classes_ + i];
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          std::size_t classes) {
  if (labels.empty()) throw ValueError("confusion: empty input");
  if (labels.size() != predictions.size()) {
    throw ValueError("confusion: " + std::to_string(labels.size()) + " labels but " +
                     std::to_string(predictions.size()) + " predictions");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes ||
        static_cast<std::size_t>(p) >= classes) {
      throw ValueError("confusion: class out of range at sample " + std::to_string(i));
    }
    cm.increment(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return cm;
}

PrfSummary macro_prf(const ConfusionMatrix& cm) {
  PrfSummary out;
  const std::size_t classes = cm.classes();
  for (std::size_t c = 0; c < classes; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double predicted = static_cast<double>(cm.column_sum(c));
    const double actual = static_cast<double>(cm.row_sum(c));
    ClassMetrics m;
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = m.precision_undefined ? 0.0 : tp / predicted;
    m.recall = m.recall_undefined ? 0.0 : tp / actual;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    out.macro_precision += m.precision;
    out.macro_recall += m.recall;
    out.macro_f1 += m.f1;
    out.per_class.push_back(m);
  }
  const auto n = static_cast<double>(classes);
  out.macro_precision /= n;
  out.macro_recall /= n;
  out.macro_f1 /= n;
  const double pr = out.macro_precision + out.macro_recall;
  out.f1_of_macro = pr > 0 ? 2 * out.macro_precision * out.macro_recall / pr : 0.0;
  return out;
}

RocCurve roc_binary(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.empty()) throw ValueError("roc: no samples");
  if (scores.size() != positive.size()) throw ValueError("roc: scores and labels differ in length");
  RocCurve curve;
  for (bool p : positive) (p ? curve.positives : curve.negatives)++;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  if (!curve.defined()) return curve;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<double>(curve.positives);
  const auto neg = static_cast<double>(curve.negatives);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (positive[order[i]] ? tp : fp)++;
      ++i;
    }
    curve.fpr.push_back(static_cast<double>(fp) / neg);
    curve.tpr.push_back(static_cast<double>(tp) / pos);
    curve.thresholds.push_back(threshold);
  }
  return curve;
}

RocCurve roc_ovr(const Tensor<double>& scores, std::span<const int> labels, std::size_t c) {
  if (scores.rank() != 2) throw ShapeError("roc: scores must be [N, C]");
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  if (labels.size() != n) throw ValueError("roc: scores and labels differ in length");
  if (c >= classes) throw ValueError("roc: class " + std::to_string(c) + " out of range");
  std::vector<double> column(n);
  // std::vector<bool> is not contiguous, so flags live in a plain array.
  auto flags = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < n; ++i) {
    column[i] = scores[i * classes + c];
    flags[i] = labels[i] == static_cast<int>(c);
  }
  RocCurve curve = roc_binary(column, std::span<const bool>(flags.get(), n));
  curve.class_index = c;
  return curve;
}

double auc(const RocCurve& curve) {
  if (!curve.defined()) {
    throw ValueError("AUC undefined for class " + std::to_string(curve.class_index) +
                     " (needs positives and negatives)");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
    area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
  }
  return area;
}

EvaluationReport full_report(const Tensor<double>& scores, std::span<const int> labels,
                             const std::vector<std::string>& class_names) {
  if (scores.rank() != 2 || scores.dim(1) != class_names.size()) {
    throw ShapeError("report: scores " + shape_string(scores.shape()) + " for " +
                     std::to_string(class_names.size()) + " classes");
  }
  EvaluationReport r;
  r.class_names = class_names;
  r.samples = labels.size();
  const auto predictions = ops::argmax_rows(scores);
  r.confusion = confusion(labels, predictions, class_names.size());
  r.accuracy = static_cast<double>(r.confusion.trace()) / static_cast<double>(r.samples);
  r.prf = macro_prf(r.confusion);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (r.prf.per_class[c].precision_undefined) {
      r.warnings.push_back("precision undefined for class " + class_names[c] +
                           " (never predicted); counted as 0");
    }
    if (r.prf.per_class[c].recall_undefined) {
      r.warnings.push_back("recall undefined for class " + class_names[c] +
                           " (no samples); counted as 0");
    }
  }
  double auc_sum = 0.0;
  std::size_t auc_count = 0;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    r.roc.push_back(roc_ovr(scores, labels, c));
    if (r.roc.back().defined()) {
      r.class_auc.push_back(auc(r.roc.back()));
      auc_sum += *r.class_auc.back();
      ++auc_count;
    } else {
      r.class_auc.push_back(std::nullopt);
      r.warnings.push_back("AUC undefined for class " + class_names[c] +
                           "; excluded from macro AUC");
    }
  }
  r.macro_auc = auc_count > 0 ? auc_sum / static_cast<double>(auc_count) : 0.0;
  return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& m = r.prf.per_class[c];
    const auto& roc = r.roc[c];
    nlohmann::json thresholds = nlohmann::json::array();
    for (double t : roc.thresholds) {
      if (std::isinf(t)) {
        thresholds.push_back("inf");
      } else {
        thresholds.push_back(t);
      }
    }
    classes.push_back({
        {"name", r.class_names[c]},
        {"support", r.confusion.row_sum(c)},
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"precision_undefined", m.precision_undefined},
        {"recall_undefined", m.recall_undefined},
        {"auc", r.class_auc[c] ? nlohmann::json(*r.class_auc[c]) : nlohmann::json(nullptr)},
        {"roc", {{"fpr", roc.fpr},
                 {"tpr", roc.tpr},
                 {"thresholds", thresholds},
                 {"positives", roc.positives},
                 {"negatives", roc.negatives}}},
    });
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t i = 0; i < r.confusion.classes(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < r.confusion.classes(); ++j) row.push_back(r.confusion.at(i, j));
    matrix.push_back(row);
  }
  return {
      {"samples", r.samples},
      {"accuracy", r.accuracy},
      {"macro_precision", r.prf.macro_precision},
      {"macro_recall", r.prf.macro_recall},
      {"macro_f1", r.prf.macro_f1},
      {"f1_of_macro_precision_recall", r.prf.f1_of_macro},
      {"macro_auc", r.macro_auc},
      {"confusion_matrix", matrix},
      {"classes", classes},
      {"warnings", r.warnings},
  };
}

namespace {

const nlohmann::json& field(const nlohmann::json& j, const std::string& key,
                            const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError("report: missing field '" + where + key + "'");
  }
  return j.at(key);
}

template <typename V>
V get_field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  try {
    return field(j, key, where).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("report: field '" + where + key + "' has the wrong type");
  }
}

}  // namespace

EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.samples = get_field<std::size_t>(j, "samples", "");
  r.accuracy = get_field<double>(j, "accuracy", "");
  r.prf.macro_precision = get_field<double>(j, "macro_precision", "");
  r.prf.macro_recall = get_field<double>(j, "macro_recall", "");
  r.prf.macro_f1 = get_field<double>(j, "macro_f1", "");
  r.prf.f1_of_macro = get_field<double>(j, "f1_of_macro_precision_recall", "");
  r.macro_auc = get_field<double>(j, "macro_auc", "");
  r.warnings = get_field<std::vector<std::string>>(j, "warnings", "");
  const auto matrix = get_field<std::vector<std::vector<std::size_t>>>(j, "confusion_matrix", "");
  const auto& classes = field(j, "classes", "");
  if (!classes.is_array() || classes.size() != matrix.size() || matrix.empty()) {
    throw FormatError("report: field 'classes' does not match 'confusion_matrix'");
  }
  r.confusion = ConfusionMatrix(matrix.size());
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (matrix[i].size() != matrix.size()) {
      throw FormatError("report: field 'confusion_matrix' is not square");
    }
    for (std::size_t k = 0; k < matrix.size(); ++k) {
      for (std::size_t n = 0; n < matrix[i][k]; ++n) r.confusion.increment(i, k);
    }
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cj = classes[c];
    const std::string where = "classes[" + std::to_string(c) + "].";
    r.class_names.push_back(get_field<std::string>(cj, "name", where));
    ClassMetrics m;
    m.precision = get_field<double>(cj, "precision", where);
    m.recall = get_field<double>(cj, "recall", where);
    m.f1 = get_field<double>(cj, "f1", where);
    m.precision_undefined = get_field<bool>(cj, "precision_undefined", where);
    m.recall_undefined = get_field<bool>(cj, "recall_undefined", where);
    r.prf.per_class.push_back(m);
    const auto& auc_field = field(cj, "auc", where);
    r.class_auc.push_back(auc_field.is_null() ? std::nullopt
                                              : std::optional<double>(get_field<double>(
                                                    cj, "auc", where)));
    const auto& rj = field(cj, "roc", where);
    RocCurve curve;
    curve.class_index = c;
    curve.fpr = get_field<std::vector<double>>(rj, "fpr", where + "roc.");
    curve.tpr = get_field<std::vector<double>>(rj, "tpr", where + "roc.");
    curve.positives = get_field<std::size_t>(rj, "positives", where + "roc.");
    curve.negatives = get_field<std::size_t>(rj, "negatives", where + "roc.");
    for (const auto& t : field(rj, "thresholds", where + "roc.")) {
      curve.thresholds.push_back(t.is_string() ? std::numeric_limits<double>::infinity()
                                               : t.get<double>());
    }
    if (curve.fpr.size() != curve.tpr.size() || curve.fpr.empty()) {
      throw FormatError("report: field '" + where + "roc' has mismatched fpr/tpr");
    }
    r.roc.push_back(std::move(curve));
  }
  return r;
}

void write_report(const fs::path& dir, const EvaluationReport& r) {
  fs::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");

  char buf[256];
  std::ostringstream cm;
  cm << "true\\predicted";
  for (const auto& name : r.class_names) cm << "," << name;
  cm << "\n";
  for (std::size_t i = 0; i < r.class_names.size(); ++i) {
    cm << r.class_names[i];
    for (std::size_t j = 0; j < r.class_names.size(); ++j) cm << "," << r.confusion.at(i, j);
    cm << "\n";
  }
  write_file_atomic(dir / "confusion_matrix.csv", cm.str());

  std::ostringstream pc;
  pc << "class,support,precision,recall,f1,auc\n";
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& m = r.prf.per_class[c];
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,", r.confusion.row_sum(c), m.precision,
                  m.recall, m.f1);
    pc << r.class_names[c] << "," << buf;
    if (r.class_auc[c]) {
      std::snprintf(buf, sizeof(buf), "%.9g", *r.class_auc[c]);
      pc << buf;
    } else {
      pc << "nan";
    }
    pc << "\n";
  }
  std::snprintf(buf, sizeof(buf), "macro,%zu,%.9g,%.9g,%.9g,%.9g\n", r.samples,
                r.prf.macro_precision, r.prf.macro_recall, r.prf.macro_f1, r.macro_auc);
  pc << buf;
  write_file_atomic(dir / "per_class_metrics.csv", pc.str());

  std::ostringstream roc;
  roc << "class,threshold,fpr,tpr\n";
  for (const auto& curve : r.roc) {
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g\n", curve.thresholds[i], curve.fpr[i],
                    curve.tpr[i]);
      roc << r.class_names[curve.class_index] << buf;
    }
  }
  write_file_atomic(dir / "roc_points.csv", roc.str());
}

EvaluationReport read_report(const fs::path& dir) {
  const fs::path file = dir / "report.json";
  std::ifstream in(file);
  if (!in) throw IoError("cannot read report " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("report: " + file.string() + " is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

}  // namespace pcvit
