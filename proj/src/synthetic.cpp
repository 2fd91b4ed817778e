#include "pcvit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pcvit/image_io.hpp"

namespace fs = std::filesystem;

namespace pcvit {

GrayscaleImage synthetic_image(int cls, std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 6.0);
  const double s = static_cast<double>(size);
  const double centre = s / 2.0;
  const double head_rx = s * (0.38 + 0.06 * unit(rng));
  const double head_ry = s * (0.42 + 0.05 * unit(rng));
  const double head_level = 45.0 + 15.0 * unit(rng);

  const int shape = cls % 4;
  double rx = 0, ry = 0, level = 0;
  switch (shape) {
    case 0:
      rx = ry = s * (0.18 + 0.06 * unit(rng));
      level = 130.0 + 20.0 * unit(rng);
      break;
    case 1:
      rx = ry = s * (0.07 + 0.03 * unit(rng));
      level = 230.0 + 25.0 * unit(rng);
      break;
    case 3:
      rx = s * (0.2 + 0.05 * unit(rng));
      ry = s * (0.06 + 0.02 * unit(rng));
      level = 185.0 + 20.0 * unit(rng);
      break;
    default:
      break;
  }
  const double bx = centre + s * 0.15 * (2.0 * unit(rng) - 1.0);
  const double by = centre + s * 0.15 * (2.0 * unit(rng) - 1.0);

  GrayscaleImage img{size, size, std::vector<int>(size * size)};
  for (std::size_t row = 0; row < size; ++row) {
    for (std::size_t col = 0; col < size; ++col) {
      const double x = static_cast<double>(col) + 0.5;
      const double y = static_cast<double>(row) + 0.5;
      double v = 0.0;
      const double hx = (x - centre) / head_rx, hy = (y - centre) / head_ry;
      if (hx * hx + hy * hy <= 1.0) v = head_level + noise(rng);
      if (shape != 2) {
        const double dx = (x - bx) / rx, dy = (y - by) / ry;
        if (dx * dx + dy * dy <= 1.0) v = level + noise(rng);
      }
      img.pixels[row * size + col] = static_cast<int>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

void write_toy_corpus(const ToyCorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::pair<const char*, std::size_t> splits[] = {{"train", spec.train_per_class},
                                                        {"test", spec.test_per_class}};
  for (const auto& [split, count] : splits) {
    for (std::size_t c = 0; c < spec.class_names.size(); ++c) {
      const fs::path dir = spec.root / split / spec.class_names[c];
      fs::create_directories(dir);
      for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu.png", i);
        save_png(dir / name, synthetic_image(static_cast<int>(c), spec.image_size, rng));
      }
    }
  }
}

}  // namespace pcvit
