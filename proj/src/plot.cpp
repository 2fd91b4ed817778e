#include "pcvit/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace pcvit {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string roc_svg(const EvaluationReport& report) {
  constexpr double kLeft = 60, kTop = 30, kSize = 400;
  auto x = [&](double fpr) { return kLeft + fpr * kSize; };
  auto y = [&](double tpr) { return kTop + (1.0 - tpr) * kSize; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"500\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"720\" height=\"500\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + kSize / 2) << "\" y=\"18\" text-anchor=\"middle\" "
         "font-size=\"14\">One-vs-rest ROC</text>\n";
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(kSize)
      << "\" height=\"" << fmt(kSize) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    svg << "<text x=\"" << fmt(x(t)) << "\" y=\"" << fmt(kTop + kSize + 16)
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y(t) + 4)
        << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + kSize / 2) << "\" y=\"" << fmt(kTop + kSize + 34)
      << "\" text-anchor=\"middle\">False positive rate</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(kTop + kSize / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << fmt(kTop + kSize / 2) << ")\">True positive rate</text>\n";
  svg << "<line class=\"chance\" x1=\"" << fmt(x(0)) << "\" y1=\"" << fmt(y(0)) << "\" x2=\""
      << fmt(x(1)) << "\" y2=\"" << fmt(y(1))
      << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";

  for (std::size_t c = 0; c < report.roc.size(); ++c) {
    const auto& curve = report.roc[c];
    const char* colour = kPalette[c % kPalette.size()];
    svg << "<polyline class=\"roc\" data-class=\"" << escape(report.class_names[c])
        << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      if (i > 0) svg << " ";
      svg << fmt(x(curve.fpr[i])) << "," << fmt(y(curve.tpr[i]));
    }
    svg << "\"/>\n";
    const double ly = kTop + 20 + 20 * static_cast<double>(c);
    svg << "<line x1=\"480\" y1=\"" << fmt(ly - 4) << "\" x2=\"500\" y2=\"" << fmt(ly - 4)
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    char auc_text[64];
    if (report.class_auc[c]) {
      std::snprintf(auc_text, sizeof(auc_text), "AUC = %.4f", *report.class_auc[c]);
    } else {
      std::snprintf(auc_text, sizeof(auc_text), "AUC undefined");
    }
    svg << "<text x=\"506\" y=\"" << fmt(ly) << "\">" << escape(report.class_names[c]) << " ("
        << auc_text << ")</text>\n";
  }
  char macro[64];
  std::snprintf(macro, sizeof(macro), "macro AUC = %.4f", report.macro_auc);
  svg << "<text x=\"480\" y=\"" << fmt(kTop + 30 + 20 * static_cast<double>(report.roc.size()))
      << "\">" << macro << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string confusion_svg(const EvaluationReport& report) {
  const std::size_t n = report.confusion.classes();
  constexpr double kCell = 80, kLeft = 120, kTop = 60;
  std::size_t peak = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, report.confusion.at(i, j));

  const double width = kLeft + kCell * static_cast<double>(n) + 20;
  const double height = kTop + kCell * static_cast<double>(n) + 50;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + kCell * static_cast<double>(n) / 2)
      << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">Confusion matrix "
         "(rows: true, columns: predicted)</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double row_y = kTop + kCell * static_cast<double>(i);
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(row_y + kCell / 2 + 4)
        << "\" text-anchor=\"end\">" << escape(report.class_names[i]) << "</text>\n";
    svg << "<text x=\"" << fmt(kLeft + kCell * (static_cast<double>(i) + 0.5)) << "\" y=\""
        << fmt(kTop - 8) << "\" text-anchor=\"middle\">" << escape(report.class_names[i])
        << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t count = report.confusion.at(i, j);
      const double shade = static_cast<double>(count) / static_cast<double>(peak);
      const int level = static_cast<int>(255.0 - 200.0 * shade);
      char fill[16];
      std::snprintf(fill, sizeof(fill), "#%02x%02xff", level, level);
      const double cx = kLeft + kCell * static_cast<double>(j);
      svg << "<rect class=\"cell\" x=\"" << fmt(cx) << "\" y=\"" << fmt(row_y) << "\" width=\""
          << fmt(kCell) << "\" height=\"" << fmt(kCell) << "\" fill=\"" << fill
          << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << fmt(cx + kCell / 2) << "\" y=\"" << fmt(row_y + kCell / 2 + 4)
          << "\" text-anchor=\"middle\" fill=\"" << (shade > 0.6 ? "white" : "black") << "\">"
          << count << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pcvit
