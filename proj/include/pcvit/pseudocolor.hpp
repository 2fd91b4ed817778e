#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcvit/tensor.hpp"

namespace pcvit {

/// Single-channel image with integer intensities in [0, 255], row-major.
struct GrayscaleImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> pixels;

  int at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Real-valued single-channel raster, row-major.
struct ScalarField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

struct Rgb {
  double r = 0;
  double g = 0;
  double b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Per-channel piecewise-linear anchors (position, value), positions
/// ascending from 0 to 1.
struct ColormapSegments {
  std::vector<std::pair<double, double>> red;
  std::vector<std::pair<double, double>> green;
  std::vector<std::pair<double, double>> blue;
};

const ColormapSegments& jet_segments();

/// Evaluates a segment colormap at v in [0, 1].
Rgb evaluate_segments(const ColormapSegments& segments, double v);

/// Jet colormap. Throws ValueError outside [0, 1].
Rgb jet(double v);

/// 256-entry lookup table sampled at i / 255.
class ColormapLut {
 public:
  static constexpr std::size_t kEntries = 256;

  explicit ColormapLut(const ColormapSegments& segments);

  const Rgb& operator[](std::size_t i) const { return entries_[i]; }
  /// Entry round(v * 255) for v in [0, 1].
  const Rgb& lookup(double v) const;

 private:
  std::array<Rgb, kEntries> entries_{};
};

/// Adds a named colormap. Names are unique; "jet" is registered at startup.
void register_colormap(const std::string& name, ColormapSegments segments);
const ColormapLut& colormap(const std::string& name);

void validate(const GrayscaleImage& img);

/// Pixel / 255. Throws ValueError on intensities outside [0, 255].
ScalarField normalize_intensity(const GrayscaleImage& img);

/// Bilinear resampling with half-pixel centres (align-corners false).
ScalarField resize_bilinear(const ScalarField& field, std::size_t target_height,
                            std::size_t target_width);

ScalarField to_field(const GrayscaleImage& img);

/// resize -> normalize -> colormap -> channel-first [3, size, size] tensor.
Tensor<float> preprocess(const GrayscaleImage& img, std::size_t size,
                         const ColormapLut& lut = colormap("jet"));

}  // namespace pcvit
