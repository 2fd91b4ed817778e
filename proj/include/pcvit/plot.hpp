#pragma once

#include <string>

#include "pcvit/metrics.hpp"

namespace pcvit {

/// One-vs-rest ROC curves, one polyline per class, with the chance diagonal
/// and a legend of per-class AUC values.
std::string roc_svg(const EvaluationReport& report);

/// Confusion matrix heat map with counts printed in each cell.
std::string confusion_svg(const EvaluationReport& report);

}  // namespace pcvit
