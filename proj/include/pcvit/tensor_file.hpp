#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcvit/tensor.hpp"

namespace pcvit {

// Binary container for named float32 tensors.
//
//   bytes 0..7    magic "PCVITTF\0"
//   bytes 8..11   format version, uint32 little-endian
//   bytes 12..19  header length H, uint64 little-endian
//   next H bytes  UTF-8 JSON header:
//                   {"kind": ..., "meta": {...},
//                    "tensors": [{"name", "shape", "offset", "count"}, ...]}
//   remainder     payload; tensor values as float32 little-endian, `offset`
//                 counted in bytes from the start of the payload.

inline constexpr char kTensorFileMagic[8] = {'P', 'C', 'V', 'I', 'T', 'T', 'F', '\0'};
inline constexpr std::uint32_t kTensorFileVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

struct TensorFile {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
};

/// Writes to a temporary sibling and renames it over `path`.
void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);

/// Throws FormatError (bad magic or header), VersionMismatchError or
/// TruncatedFileError.
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Writes `bytes` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace pcvit
