#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pcvit/pseudocolor.hpp"

namespace pcvit {

/// Grayscale "scan": a noisy elliptical head region plus a class-dependent
/// blob. Class 0 a large dim disc, 1 a small bright disc, 2 no blob, 3 a flat
/// elongated ellipse; classes beyond 3 reuse these shapes modulo 4.
GrayscaleImage synthetic_image(int cls, std::size_t size, std::mt19937_64& rng);

struct ToyCorpusSpec {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 25;
  std::size_t image_size = 64;
  std::uint64_t seed = 7;
};

/// Writes `root/{train,test}/<class>/NNNN.png`.
void write_toy_corpus(const ToyCorpusSpec& spec);

}  // namespace pcvit
