#include "pcvit/pseudocolor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace pcvit {

namespace {

double interpolate(const std::vector<std::pair<double, double>>& anchors, double v) {
  if (v <= anchors.front().first) return anchors.front().second;
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    const auto [x1, y1] = anchors[i];
    if (v <= x1) {
      const auto [x0, y0] = anchors[i - 1];
      return y0 + (y1 - y0) * (v - x0) / (x1 - x0);
    }
  }
  return anchors.back().second;
}

void check_segments(const std::string& name, const ColormapSegments& s) {
  for (const auto* channel : {&s.red, &s.green, &s.blue}) {
    if (channel->size() < 2 || channel->front().first != 0.0 || channel->back().first != 1.0) {
      throw ValueError("colormap " + name + ": anchors must span [0, 1]");
    }
    for (std::size_t i = 1; i < channel->size(); ++i) {
      if (!((*channel)[i].first > (*channel)[i - 1].first)) {
        throw ValueError("colormap " + name + ": anchor positions must increase");
      }
    }
  }
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::unique_ptr<ColormapLut>> maps;

  Registry() { maps.emplace("jet", std::make_unique<ColormapLut>(jet_segments())); }
};

Registry& registry() {
  static Registry instance;
  return instance;
}

}  // namespace

const ColormapSegments& jet_segments() {
  static const ColormapSegments segments{
      {{0.0, 0.0}, {0.35, 0.0}, {0.66, 1.0}, {0.89, 1.0}, {1.0, 0.5}},
      {{0.0, 0.0}, {0.125, 0.0}, {0.375, 1.0}, {0.64, 1.0}, {0.91, 0.0}, {1.0, 0.0}},
      {{0.0, 0.5}, {0.11, 1.0}, {0.34, 1.0}, {0.65, 0.0}, {1.0, 0.0}},
  };
  return segments;
}

Rgb evaluate_segments(const ColormapSegments& segments, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValueError("colormap input " + std::to_string(v) + " outside [0, 1]");
  }
  return {interpolate(segments.red, v), interpolate(segments.green, v),
          interpolate(segments.blue, v)};
}

Rgb jet(double v) { return evaluate_segments(jet_segments(), v); }

ColormapLut::ColormapLut(const ColormapSegments& segments) {
  for (std::size_t i = 0; i < kEntries; ++i) {
    entries_[i] = evaluate_segments(segments, static_cast<double>(i) / 255.0);
  }
}

const Rgb& ColormapLut::lookup(double v) const {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValueError("colormap input " + std::to_string(v) + " outside [0, 1]");
  }
  const auto index = static_cast<std::size_t>(std::lround(v * 255.0));
  return entries_[std::min<std::size_t>(index, kEntries - 1)];
}

void register_colormap(const std::string& name, ColormapSegments segments) {
  check_segments(name, segments);
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  if (reg.maps.contains(name)) throw ValueError("colormap " + name + " already registered");
  reg.maps.emplace(name, std::make_unique<ColormapLut>(segments));
}

const ColormapLut& colormap(const std::string& name) {
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  auto it = reg.maps.find(name);
  if (it == reg.maps.end()) throw ValueError("unknown colormap: " + name);
  return *it->second;
}

void validate(const GrayscaleImage& img) {
  if (img.height == 0 || img.width == 0) throw ValueError("image has zero size");
  if (img.pixels.size() != img.height * img.width) {
    throw ValueError("image pixel count " + std::to_string(img.pixels.size()) +
                     " does not match " + std::to_string(img.height) + "x" +
                     std::to_string(img.width));
  }
  for (int p : img.pixels) {
    if (p < 0 || p > 255) {
      throw ValueError("intensity " + std::to_string(p) + " outside [0, 255]");
    }
  }
}

ScalarField to_field(const GrayscaleImage& img) {
  validate(img);
  ScalarField field{img.height, img.width, {}};
  field.values.assign(img.pixels.begin(), img.pixels.end());
  return field;
}

ScalarField normalize_intensity(const GrayscaleImage& img) {
  ScalarField field = to_field(img);
  for (double& v : field.values) v /= 255.0;
  return field;
}

ScalarField resize_bilinear(const ScalarField& field, std::size_t target_height,
                            std::size_t target_width) {
  if (target_height == 0 || target_width == 0) throw ValueError("resize: zero target size");
  if (field.height == 0 || field.width == 0) throw ValueError("resize: empty source");
  if (field.height == target_height && field.width == target_width) return field;

  // Source coordinate and blend weight per output row / column.
  struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      result[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return result;
  };
  const auto rows = taps(field.height, target_height);
  const auto cols = taps(field.width, target_width);

  ScalarField out{target_height, target_width, std::vector<double>(target_height * target_width)};
  for (std::size_t y = 0; y < target_height; ++y) {
    const Tap& ry = rows[y];
    for (std::size_t x = 0; x < target_width; ++x) {
      const Tap& cx = cols[x];
      const double top = field.at(ry.lo, cx.lo) * (1.0 - cx.frac) + field.at(ry.lo, cx.hi) * cx.frac;
      const double bottom =
          field.at(ry.hi, cx.lo) * (1.0 - cx.frac) + field.at(ry.hi, cx.hi) * cx.frac;
      out.values[y * target_width + x] = top * (1.0 - ry.frac) + bottom * ry.frac;
    }
  }
  return out;
}

Tensor<float> preprocess(const GrayscaleImage& img, std::size_t size, const ColormapLut& lut) {
  if (size == 0) throw ValueError("preprocess: zero target size");
  ScalarField field = resize_bilinear(to_field(img), size, size);
  const std::size_t plane = size * size;
  Tensor<float> out({3, size, size});
  auto data = out.data();
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = std::clamp(field.values[i] / 255.0, 0.0, 1.0);
    const Rgb& c = lut.lookup(v);
    data[i] = static_cast<float>(c.r);
    data[plane + i] = static_cast<float>(c.g);
    data[2 * plane + i] = static_cast<float>(c.b);
  }
  return out;
}

}  // namespace pcvit
