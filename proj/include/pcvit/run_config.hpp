#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcvit/training.hpp"
#include "pcvit/vit.hpp"

namespace pcvit {

/// Effective settings of a run. Defaults: ViT-Base/16 at 224², batch 32,
/// 50 epochs, Adam at 1e-4, patience 15, shuffled training batches.
struct RunConfig {
  ModelConfig model;
  TrainingConfig training;
  std::string data_root;
  /// Sorted class folder names; empty means discover them on disk.
  std::vector<std::string> classes;
  /// Directory written by `preprocess`; when set, tensors come from there.
  std::string archive_dir;
  double val_fraction = 0.0;
  std::string out_dir;
  std::string device = "auto";
  bool save_optimizer = false;
};

/// `section.key` -> value, as given on the command line.
using ConfigOverrides = std::map<std::string, std::string>;

/// Environment variable consulted for the default output directory.
inline constexpr const char* kOutDirEnv = "PCVIT_OUT_DIR";

/// Defaults, then the INI file (if any), then `overrides`. Unknown keys and
/// unparsable values throw FormatError naming the key.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const ConfigOverrides& overrides);

/// Every effective key, INI formatted, in a fixed order.
std::string resolved_config_ini(const RunConfig& config);

}  // namespace pcvit
