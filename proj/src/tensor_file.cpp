#include "pcvit/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace fs = std::filesystem;

namespace pcvit {

namespace {

template <typename U>
void append_le(std::string& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U read_le(const std::string& in, std::size_t pos) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return value;
}

constexpr std::size_t kPreamble = sizeof(kTensorFileMagic) + 4 + 8;

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                        ec.message());
}

void write_tensor_file(const fs::path& path, const TensorFile& file) {
  nlohmann::json directory = nlohmann::json::array();
  std::uint64_t offset = 0;
  std::set<std::string> seen;
  for (const auto& [name, tensor] : file.tensors) {
    if (!seen.insert(name).second) throw ValueError("duplicate tensor name " + name);
    directory.push_back({{"name", name},
                         {"shape", tensor.shape()},
                         {"offset", offset},
                         {"count", tensor.size()}});
    offset += tensor.size() * sizeof(float);
  }
  const nlohmann::json header{{"kind", file.kind}, {"meta", file.meta}, {"tensors", directory}};
  const std::string text = header.dump();

  std::string bytes(kTensorFileMagic, sizeof(kTensorFileMagic));
  append_le<std::uint32_t>(bytes, kTensorFileVersion);
  append_le<std::uint64_t>(bytes, text.size());
  bytes += text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& named : file.tensors) {
    for (float v : named.tensor.data()) append_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
  }
  write_file_atomic(path, bytes);
}

TensorFile read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kTensorFileMagic) ||
      std::memcmp(bytes.data(), kTensorFileMagic, sizeof(kTensorFileMagic)) != 0) {
    if (bytes.size() < sizeof(kTensorFileMagic)) {
      throw TruncatedFileError(path.string() + ": truncated before magic bytes");
    }
    throw FormatError(path.string() + ": not a pcvit tensor file (bad magic)");
  }
  if (bytes.size() < kPreamble) throw TruncatedFileError(path.string() + ": truncated preamble");
  const auto version = read_le<std::uint32_t>(bytes, sizeof(kTensorFileMagic));
  if (version != kTensorFileVersion) {
    throw VersionMismatchError(path.string() + ": format version " + std::to_string(version) +
                               ", this build reads version " +
                               std::to_string(kTensorFileVersion));
  }
  const auto header_len = read_le<std::uint64_t>(bytes, sizeof(kTensorFileMagic) + 4);
  if (bytes.size() - kPreamble < header_len) {
    throw TruncatedFileError(path.string() + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPreamble, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  const std::size_t payload = kPreamble + header_len;
  const std::size_t payload_size = bytes.size() - payload;

  TensorFile file;
  try {
    file.kind = header.at("kind").get<std::string>();
    file.meta = header.at("meta");
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (shape_numel(shape) != count) {
        throw FormatError(path.string() + ": tensor " + name + " count does not match shape");
      }
      if (offset > payload_size || count * sizeof(float) > payload_size - offset) {
        throw TruncatedFileError(path.string() + ": payload of tensor " + name + " is truncated");
      }
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(
            read_le<std::uint32_t>(bytes, payload + offset + i * sizeof(float)));
      }
      file.tensors.push_back({name, Tensor<float>(shape, std::move(values))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return file;
}

}  // namespace pcvit
