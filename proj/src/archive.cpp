#include <cstdio>

#include "pcvit/dataset.hpp"
#include "pcvit/tensor_file.hpp"

namespace pcvit {

void save_archive(const std::filesystem::path& path, const DatasetManifest& manifest,
                  const InMemorySource& samples, std::size_t image_size) {
  if (samples.size() != manifest.size()) {
    throw ValueError("archive: " + std::to_string(samples.size()) + " tensors for " +
                     std::to_string(manifest.size()) + " manifest entries");
  }
  TensorFile file;
  file.kind = "archive";
  std::vector<int> labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu", i);
    file.tensors.push_back({name, samples.tensor(i)});
    labels.push_back(samples.label(i));
  }
  file.meta = {{"class_names", manifest.class_names},
               {"split", manifest.split},
               {"image_size", image_size},
               {"labels", labels}};
  write_tensor_file(path, file);
}

InMemorySource load_archive(const std::filesystem::path& path,
                            std::vector<std::string>* class_names) {
  TensorFile file = read_tensor_file(path);
  if (file.kind != "archive") {
    throw FormatError(path.string() + ": expected an archive, found kind '" + file.kind + "'");
  }
  std::vector<int> labels;
  try {
    labels = file.meta.at("labels").get<std::vector<int>>();
    if (class_names != nullptr) {
      *class_names = file.meta.at("class_names").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed archive header: " + e.what());
  }
  if (labels.size() != file.tensors.size()) {
    throw FormatError(path.string() + ": label count does not match tensor count");
  }
  std::vector<Tensor<float>> tensors;
  for (auto& named : file.tensors) tensors.push_back(std::move(named.tensor));
  return InMemorySource(std::move(tensors), std::move(labels));
}

}  // namespace pcvit
