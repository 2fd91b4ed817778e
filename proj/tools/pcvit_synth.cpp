// pcvit-synth: writes a synthetic four-class grayscale corpus.

#include <iostream>

#include "CLI11.hpp"
#include "pcvit/dataset.hpp"
#include "pcvit/error.hpp"
#include "pcvit/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic train/test corpus of class-dependent blobs"};
  pcvit::ToyCorpusSpec spec;
  spec.class_names = pcvit::default_class_names();
  std::string root;
  app.add_option("--out", root, "Corpus root to create")->required();
  app.add_option("--train-per-class", spec.train_per_class, "Training images per class");
  app.add_option("--test-per-class", spec.test_per_class, "Test images per class");
  app.add_option("--size", spec.image_size, "Image side length");
  app.add_option("--seed", spec.seed, "Generator seed");
  app.add_option("--classes", spec.class_names, "Class folder names, sorted")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  spec.root = root;
  try {
    pcvit::write_toy_corpus(spec);
  } catch (const pcvit::Error& e) {
    std::cerr << "pcvit-synth: error: " << e.what() << "\n";
    return 1;
  }
  std::cout << spec.root.string() << "\n";
  return 0;
}
