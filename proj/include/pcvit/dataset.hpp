#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcvit/tensor.hpp"

namespace pcvit {

/// Class folders of the four-class tumor corpus, in label order.
const std::vector<std::string>& default_class_names();

struct ManifestEntry {
  std::string path;
  int label = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::string split;
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return entries.size(); }
  /// Entries per class, indexed by label.
  std::vector<std::size_t> class_counts() const;
};

/// Lists `root/split/<class>/*.png`. Labels follow the order of
/// `class_names`, which must be sorted; when absent, the class folders found
/// on disk are used in sorted order. Entries are ordered by path.
/// Throws CorpusLayoutError for a missing split or class folder or an
/// unexpected extra folder. Empty class folders are recorded as warnings.
DatasetManifest scan_corpus(const std::filesystem::path& root, const std::string& split,
                            const std::optional<std::vector<std::string>>& class_names =
                                default_class_names());

/// Tab-separated text: header comment lines, then `path<TAB>label<TAB>class`.
void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& file);

/// Seeded split of [0, n) into (kept, held-out) index lists, each ascending;
/// the held-out part has round(fraction * n) elements.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                             double fraction,
                                                                             std::uint64_t seed);

/// Splits off the last `fraction` of a seeded permutation as a held-out set.
/// Both halves keep manifest order.
std::pair<DatasetManifest, DatasetManifest> split_validation(const DatasetManifest& manifest,
                                                             double fraction, std::uint64_t seed);

/// Random-access labelled samples, each a [3, S, S] tensor.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t index) const = 0;
  virtual Tensor<float> tensor(std::size_t index) const = 0;
};

/// Samples held in memory.
class InMemorySource : public SampleSource {
 public:
  InMemorySource() = default;
  InMemorySource(std::vector<Tensor<float>> tensors, std::vector<int> labels);

  void add(Tensor<float> tensor, int label);
  std::size_t size() const override { return tensors_.size(); }
  int label(std::size_t index) const override { return labels_.at(index); }
  Tensor<float> tensor(std::size_t index) const override { return tensors_.at(index); }

 private:
  std::vector<Tensor<float>> tensors_;
  std::vector<int> labels_;
};

/// Loads and preprocesses manifest images on demand.
class ManifestSource : public SampleSource {
 public:
  ManifestSource(DatasetManifest manifest, std::size_t image_size);

  std::size_t size() const override { return manifest_.size(); }
  int label(std::size_t index) const override { return manifest_.entries.at(index).label; }
  Tensor<float> tensor(std::size_t index) const override;
  const DatasetManifest& manifest() const noexcept { return manifest_; }

 private:
  DatasetManifest manifest_;
  std::size_t image_size_;
};

/// A view of selected samples of another source.
class SubsetSource : public SampleSource {
 public:
  SubsetSource(const SampleSource& base, std::vector<std::size_t> indices);

  std::size_t size() const override { return indices_.size(); }
  int label(std::size_t index) const override { return base_.label(indices_.at(index)); }
  Tensor<float> tensor(std::size_t index) const override {
    return base_.tensor(indices_.at(index));
  }

 private:
  const SampleSource& base_;
  std::vector<std::size_t> indices_;
};

/// Preprocesses every manifest entry into memory, in manifest order.
InMemorySource preprocess_all(const DatasetManifest& manifest, std::size_t image_size);

struct Batch {
  Tensor<float> images;  // [B, 3, S, S]
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Mini-batches over a source for one epoch. With shuffling the order is a
/// permutation drawn from `seed`; otherwise it is source order. The final
/// batch may be short.
class BatchIterator {
 public:
  BatchIterator(const SampleSource& source, std::size_t batch_size, bool shuffle,
                std::uint64_t seed);

  bool has_next() const noexcept { return cursor_ < order_.size(); }
  Batch next();
  std::size_t batch_count() const noexcept;
  const std::vector<std::size_t>& order() const noexcept { return order_; }

 private:
  const SampleSource& source_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Preprocessed tensors of a manifest in a tensor file (kind "archive"),
/// one tensor per entry named by its zero-padded index, labels and class
/// names in the header.
void save_archive(const std::filesystem::path& path, const DatasetManifest& manifest,
                  const InMemorySource& samples, std::size_t image_size);
InMemorySource load_archive(const std::filesystem::path& path,
                            std::vector<std::string>* class_names = nullptr);

/// Seed for `epoch` derived from a run seed.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

}  // namespace pcvit
