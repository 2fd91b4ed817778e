#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcvit/training.hpp"
#include "pcvit/vit.hpp"

namespace pcvit {

struct CheckpointMetadata {
  std::size_t epoch = 0;
  double best_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::size_t eval_batch_size = 32;

  friend bool operator==(const CheckpointMetadata&, const CheckpointMetadata&) = default;
};

/// Everything needed to rebuild a trained model. Parameters are stored as
/// float32 under "param/<name>", optimizer moments under "adam.m/<name>" and
/// "adam.v/<name>".
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> class_names;
  ParameterSet<float> parameters;
  std::optional<AdamState<float>> optimizer;
  CheckpointMetadata metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws VersionMismatchError, TruncatedFileError, UnknownTensorError for a
/// tensor the config does not declare, and ValueError when
/// `expected_classes` differs from the stored class count.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_classes = std::nullopt);

}  // namespace pcvit
