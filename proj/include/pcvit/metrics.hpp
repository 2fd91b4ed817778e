#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcvit/tensor.hpp"

namespace pcvit {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const noexcept { return classes_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  void increment(std::size_t truth, std::size_t predicted);
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t column_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

/// Throws ValueError on empty input, unequal lengths or a class >= `classes`.
ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          std::size_t classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when TP + FP (resp. TP + FN) is zero and the value was taken as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct PrfSummary {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  /// Unweighted mean of per-class F1.
  double macro_f1 = 0.0;
  /// Harmonic mean of macro precision and macro recall.
  double f1_of_macro = 0.0;
};

PrfSummary macro_prf(const ConfusionMatrix& cm);

struct RocCurve {
  std::size_t class_index = 0;
  std::vector<double> fpr;
  std::vector<double> tpr;
  /// Threshold that produced each point; +inf for (0, 0).
  std::vector<double> thresholds;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  /// False when the class has no positives or no negatives.
  bool defined() const noexcept { return positives > 0 && negatives > 0; }
};

/// One-vs-rest ROC for class `c` from scores [N, C]. Tied scores form a
/// single vertex. Curves for classes without both positives and negatives
/// are returned undefined and hold only (0, 0).
RocCurve roc_ovr(const Tensor<double>& scores, std::span<const int> labels, std::size_t c);

/// Same, from one score column.
RocCurve roc_binary(std::span<const double> scores, std::span<const bool> positive);

/// Trapezoidal area. Throws ValueError for an undefined curve.
double auc(const RocCurve& curve);

struct EvaluationReport {
  std::vector<std::string> class_names;
  std::size_t samples = 0;
  ConfusionMatrix confusion{1};
  double accuracy = 0.0;
  PrfSummary prf;
  std::vector<RocCurve> roc;
  /// Per class; empty when the class AUC is undefined.
  std::vector<std::optional<double>> class_auc;
  /// Mean over classes with a defined AUC.
  double macro_auc = 0.0;
  std::vector<std::string> warnings;
};

/// Argmax predictions (lowest index on ties) then every metric above.
EvaluationReport full_report(const Tensor<double>& scores, std::span<const int> labels,
                             const std::vector<std::string>& class_names);

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

/// report.json, confusion_matrix.csv, per_class_metrics.csv, roc_points.csv.
void write_report(const std::filesystem::path& dir, const EvaluationReport& report);
/// Reads report.json. Throws FormatError naming the offending field.
EvaluationReport read_report(const std::filesystem::path& dir);

}  // namespace pcvit
