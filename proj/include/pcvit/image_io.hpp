#pragma once

#include <filesystem>

#include "pcvit/pseudocolor.hpp"

namespace pcvit {

/// Reads a PNG. Colour images are reduced to grayscale by the rounded mean of
/// the R, G and B channels; alpha is ignored. Throws IoError naming the file.
GrayscaleImage load_png(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG.
void save_png(const std::filesystem::path& path, const GrayscaleImage& img);

}  // namespace pcvit
