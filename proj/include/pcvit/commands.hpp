#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcvit/run_config.hpp"

namespace pcvit {

/// Output and diagnostic streams of a command. Data goes to `out`,
/// everything else to `err`.
struct CommandStreams {
  std::ostream& out;
  std::ostream& err;
};

/// Scans `<data_root>/{train,test}` and writes `<out_dir>/<split>.tensors`
/// and `<out_dir>/<split>_manifest.tsv`. Returns the exit code.
int cmd_preprocess(const RunConfig& config, CommandStreams io);

/// Trains from the corpus (or the archive directory when set) and writes
/// resolved_config.ini, best.ckpt and history.csv under `out_dir`.
int cmd_train(const RunConfig& config, CommandStreams io);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data_root;
  std::string split = "test";
  std::filesystem::path out_dir;
  bool svg = false;
};

/// Evaluates a checkpoint on `<data_root>/<split>` and writes the report
/// files (plus roc.svg and confusion_matrix.svg with `svg`).
int cmd_evaluate(const EvaluateOptions& options, CommandStreams io);

/// Prints `path<TAB>class<TAB>p_0 ... p_{C-1}` per readable image.
int cmd_predict(const std::filesystem::path& checkpoint,
                const std::vector<std::filesystem::path>& images, CommandStreams io);

/// Renders roc.svg and confusion_matrix.svg from a report directory.
int cmd_plot(const std::filesystem::path& report_dir, const std::filesystem::path& out_dir,
             CommandStreams io);

}  // namespace pcvit
