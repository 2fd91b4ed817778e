#include "pcvit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pcvit/image_io.hpp"
#include "pcvit/pseudocolor.hpp"

namespace fs = std::filesystem;

namespace pcvit {

namespace {

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return ext == ".png";
}

}  // namespace

const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names{"glioma", "meningioma", "no_tumor", "pituitary"};
  return names;
}

std::vector<std::size_t> DatasetManifest::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& e : entries) counts.at(static_cast<std::size_t>(e.label))++;
  return counts;
}

DatasetManifest scan_corpus(const fs::path& root, const std::string& split,
                            const std::optional<std::vector<std::string>>& class_names) {
  const fs::path split_dir = root / split;
  if (!fs::is_directory(split_dir)) {
    throw CorpusLayoutError("corpus split directory not found: " + split_dir.string());
  }
  std::set<std::string> found;
  for (const auto& entry : fs::directory_iterator(split_dir)) {
    if (entry.is_directory()) found.insert(entry.path().filename().string());
  }

  DatasetManifest manifest;
  manifest.split = split;
  if (class_names) {
    manifest.class_names = *class_names;
    if (!std::is_sorted(manifest.class_names.begin(), manifest.class_names.end())) {
      throw ValueError("class names must be in alphabetical order: " +
                       join(manifest.class_names));
    }
    std::vector<std::string> missing;
    for (const auto& name : manifest.class_names) {
      if (!found.contains(name)) missing.push_back(name);
    }
    if (!missing.empty()) {
      throw CorpusLayoutError("missing class folder(s) in " + split_dir.string() + ": " +
                              join(missing));
    }
    std::vector<std::string> extra;
    for (const auto& name : found) {
      if (std::find(manifest.class_names.begin(), manifest.class_names.end(), name) ==
          manifest.class_names.end()) {
        extra.push_back(name);
      }
    }
    if (!extra.empty()) {
      throw CorpusLayoutError("unexpected folder(s) in " + split_dir.string() + ": " +
                              join(extra));
    }
  } else {
    manifest.class_names.assign(found.begin(), found.end());
    if (manifest.class_names.empty()) {
      throw CorpusLayoutError("no class folders in " + split_dir.string());
    }
  }

  for (std::size_t label = 0; label < manifest.class_names.size(); ++label) {
    const fs::path dir = split_dir / manifest.class_names[label];
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image(entry.path())) files.push_back(entry.path().string());
    }
    if (files.empty()) {
      manifest.warnings.push_back("empty class folder: " + dir.string());
    }
    for (auto& f : files) manifest.entries.push_back({std::move(f), static_cast<int>(label)});
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return manifest;
}

void save_manifest(const fs::path& file, const DatasetManifest& manifest) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + file.string());
  out << "# classes\t" << join(manifest.class_names, ",") << "\n";
  out << "# split\t" << manifest.split << "\n";
  out << "# seed\t" << manifest.seed << "\n";
  for (const auto& w : manifest.warnings) out << "# warning\t" << w << "\n";
  for (const auto& e : manifest.entries) {
    out << e.path << "\t" << e.label << "\t"
        << manifest.class_names.at(static_cast<std::size_t>(e.label)) << "\n";
  }
  if (!out) throw IoError("error writing manifest " + file.string());
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read manifest " + file.string());
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_classes = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": missing tab");
    }
    const std::string key = line.substr(0, tab);
    const std::string rest = line.substr(tab + 1);
    if (key == "# classes") {
      m.class_names = split_list(rest);
      have_classes = true;
    } else if (key == "# split") {
      m.split = rest;
    } else if (key == "# seed") {
      m.seed = std::stoull(rest);
    } else if (key == "# warning") {
      m.warnings.push_back(rest);
    } else {
      const auto tab2 = rest.find('\t');
      if (!have_classes || tab2 == std::string::npos) {
        throw FormatError(file.string() + ":" + std::to_string(line_no) + ": malformed entry");
      }
      const int label = std::stoi(rest.substr(0, tab2));
      const std::string name = rest.substr(tab2 + 1);
      if (label < 0 || static_cast<std::size_t>(label) >= m.class_names.size() ||
          m.class_names[static_cast<std::size_t>(label)] != name) {
        throw FormatError(file.string() + ":" + std::to_string(line_no) + ": label " +
                          std::to_string(label) + " does not map to class " + name);
      }
      m.entries.push_back({key, label});
    }
  }
  if (!have_classes) throw FormatError(file.string() + ": missing classes header");
  return m;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                             double fraction,
                                                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValueError("validation fraction must be in (0, 1), got " + std::to_string(fraction));
  }
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (held == 0 || held >= n) {
    throw ValueError("validation fraction " + std::to_string(fraction) + " of " +
                     std::to_string(n) + " samples leaves an empty split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> kept(order.begin(), order.end() - static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(kept.begin(), kept.end());
  std::sort(val.begin(), val.end());
  return {std::move(kept), std::move(val)};
}

std::pair<DatasetManifest, DatasetManifest> split_validation(const DatasetManifest& manifest,
                                                             double fraction, std::uint64_t seed) {
  const auto [kept, held] = split_indices(manifest.size(), fraction, seed);
  DatasetManifest train = manifest, val = manifest;
  train.entries.clear();
  val.entries.clear();
  val.split = manifest.split + "-val";
  for (std::size_t i : kept) train.entries.push_back(manifest.entries[i]);
  for (std::size_t i : held) val.entries.push_back(manifest.entries[i]);
  return {std::move(train), std::move(val)};
}

SubsetSource::SubsetSource(const SampleSource& base, std::vector<std::size_t> indices)
    : base_(base), indices_(std::move(indices)) {
  for (std::size_t i : indices_) {
    if (i >= base_.size()) throw ValueError("subset index " + std::to_string(i) + " out of range");
  }
}

InMemorySource::InMemorySource(std::vector<Tensor<float>> tensors, std::vector<int> labels)
    : tensors_(std::move(tensors)), labels_(std::move(labels)) {
  if (tensors_.size() != labels_.size()) {
    throw ValueError("InMemorySource: " + std::to_string(tensors_.size()) + " tensors but " +
                     std::to_string(labels_.size()) + " labels");
  }
}

void InMemorySource::add(Tensor<float> tensor, int label) {
  tensors_.push_back(std::move(tensor));
  labels_.push_back(label);
}

ManifestSource::ManifestSource(DatasetManifest manifest, std::size_t image_size)
    : manifest_(std::move(manifest)), image_size_(image_size) {}

Tensor<float> ManifestSource::tensor(std::size_t index) const {
  const auto& entry = manifest_.entries.at(index);
  try {
    return preprocess(load_png(entry.path), image_size_);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(entry.path + ": " + e.what());
  }
}

InMemorySource preprocess_all(const DatasetManifest& manifest, std::size_t image_size) {
  ManifestSource lazy(manifest, image_size);
  InMemorySource out;
  for (std::size_t i = 0; i < lazy.size(); ++i) out.add(lazy.tensor(i), lazy.label(i));
  return out;
}

BatchIterator::BatchIterator(const SampleSource& source, std::size_t batch_size, bool shuffle,
                             std::uint64_t seed)
    : source_(source), batch_size_(batch_size), order_(source.size()) {
  if (batch_size == 0) throw ValueError("batch size must be at least 1");
  if (source.size() == 0) throw ValueError("cannot batch an empty dataset");
  std::iota(order_.begin(), order_.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::size_t BatchIterator::batch_count() const noexcept {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

Batch BatchIterator::next() {
  if (!has_next()) throw ValueError("BatchIterator exhausted");
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
  Batch batch;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t index = order_[cursor_ + i];
    Tensor<float> t = source_.tensor(index);
    if (batch.images.empty()) {
      Shape shape{count};
      shape.insert(shape.end(), t.shape().begin(), t.shape().end());
      batch.images = Tensor<float>(shape);
    } else if (t.size() * count != batch.images.size()) {
      throw ShapeError("sample " + std::to_string(index) + " has shape " +
                       shape_string(t.shape()) + ", batch expects " +
                       shape_string(batch.images.shape()));
    }
    std::copy(t.data().begin(), t.data().end(), batch.images.data().begin() +
                                                     static_cast<std::ptrdiff_t>(i * t.size()));
    batch.labels.push_back(source_.label(index));
    batch.indices.push_back(index);
  }
  cursor_ += count;
  return batch;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  // splitmix64 finaliser over (seed, epoch).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pcvit
