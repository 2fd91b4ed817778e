#include "pcvit/commands.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include "pcvit/checkpoint.hpp"
#include "pcvit/dataset.hpp"
#include "pcvit/image_io.hpp"
#include "pcvit/metrics.hpp"
#include "pcvit/ops.hpp"
#include "pcvit/plot.hpp"
#include "pcvit/pseudocolor.hpp"
#include "pcvit/tensor_file.hpp"
#include "pcvit/training.hpp"

namespace fs = std::filesystem;

namespace pcvit {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, text);
}

std::optional<std::vector<std::string>> wanted_classes(const RunConfig& config) {
  if (config.classes.empty()) return std::nullopt;
  return config.classes;
}

void print_counts(std::ostream& out, const std::string& split,
                  const std::vector<std::string>& names, const std::vector<std::size_t>& counts) {
  out << split << ":";
  std::size_t total = 0;
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << " " << names[c] << "=" << counts[c];
    total += counts[c];
  }
  out << " total=" << total << "\n";
}

template <typename Body>
int guarded(std::ostream& err, const char* command, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "pcvit " << command << ": error: " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    err << "pcvit " << command << ": error: " << e.what() << "\n";
  }
  return 1;
}

std::vector<std::size_t> label_counts(const SampleSource& source, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < source.size(); ++i) {
    counts.at(static_cast<std::size_t>(source.label(i)))++;
  }
  return counts;
}

}  // namespace

int cmd_preprocess(const RunConfig& config, CommandStreams io) {
  return guarded(io.err, "preprocess", [&] {
    if (config.data_root.empty()) throw ValueError("no data root given");
    const fs::path out_dir = config.out_dir;
    fs::create_directories(out_dir);
    std::optional<std::vector<std::string>> classes = wanted_classes(config);
    for (const std::string split : {"train", "test"}) {
      DatasetManifest manifest = scan_corpus(config.data_root, split, classes);
      for (const auto& w : manifest.warnings) io.err << "warning: " << w << "\n";
      classes = manifest.class_names;
      InMemorySource samples = preprocess_all(manifest, config.model.image_size);
      save_archive(out_dir / (split + ".tensors"), manifest, samples, config.model.image_size);
      save_manifest(out_dir / (split + "_manifest.tsv"), manifest);
      print_counts(io.out, split, manifest.class_names, manifest.class_counts());
    }
    return 0;
  });
}

int cmd_train(const RunConfig& config, CommandStreams io) {
  return guarded(io.err, "train", [&] {
    const fs::path out_dir = config.out_dir;
    fs::create_directories(out_dir);
    write_text(out_dir / "resolved_config.ini", resolved_config_ini(config));

    std::vector<std::string> class_names;
    std::unique_ptr<SampleSource> train_all;
    std::unique_ptr<SampleSource> test_set;
    if (!config.archive_dir.empty()) {
      const fs::path dir = config.archive_dir;
      std::vector<std::string> test_names;
      train_all = std::make_unique<InMemorySource>(load_archive(dir / "train.tensors", &class_names));
      test_set = std::make_unique<InMemorySource>(load_archive(dir / "test.tensors", &test_names));
      if (test_names != class_names) {
        throw CorpusLayoutError("archive class order differs: train [" + join(class_names) +
                                "], test [" + join(test_names) + "]");
      }
      if (!config.classes.empty() && config.classes != class_names) {
        throw CorpusLayoutError("archive classes [" + join(class_names) + "] but config lists [" +
                                join(config.classes) + "]");
      }
      if (train_all->size() > 0) {
        const Tensor<float> first = train_all->tensor(0);
        if (first.shape() != Shape{3, config.model.image_size, config.model.image_size}) {
          throw ShapeError("archive tensors have shape " + shape_string(first.shape()) +
                           " but model.image_size is " + std::to_string(config.model.image_size));
        }
      }
    } else {
      if (config.data_root.empty()) throw ValueError("no data root given");
      DatasetManifest train_manifest = scan_corpus(config.data_root, "train", wanted_classes(config));
      for (const auto& w : train_manifest.warnings) io.err << "warning: " << w << "\n";
      class_names = train_manifest.class_names;
      DatasetManifest test_manifest = scan_corpus(config.data_root, "test", class_names);
      for (const auto& w : test_manifest.warnings) io.err << "warning: " << w << "\n";
      train_all = std::make_unique<ManifestSource>(std::move(train_manifest), config.model.image_size);
      test_set = std::make_unique<ManifestSource>(std::move(test_manifest), config.model.image_size);
    }

    ModelConfig model = config.model;
    model.num_classes = class_names.size();
    model.validate();

    std::unique_ptr<SampleSource> train_view;
    std::unique_ptr<SampleSource> eval_view;
    const SampleSource* train_set = train_all.get();
    const SampleSource* eval_set = test_set.get();
    if (config.val_fraction > 0.0) {
      auto [kept, held] = split_indices(train_all->size(), config.val_fraction, config.training.seed);
      train_view = std::make_unique<SubsetSource>(*train_all, std::move(kept));
      eval_view = std::make_unique<SubsetSource>(*train_all, std::move(held));
      train_set = train_view.get();
      eval_set = eval_view.get();
      io.err << "monitoring a held-out " << eval_set->size() << "-sample validation subset\n";
    }
    print_counts(io.err, "train", class_names, label_counts(*train_set, class_names.size()));

    const fs::path checkpoint_path = out_dir / "best.ckpt";
    BestModelSink<float> on_best = [&](std::size_t epoch, double accuracy,
                                       const ParameterSet<float>& params,
                                       const AdamState<float>& state) {
      Checkpoint ckpt;
      ckpt.config = model;
      ckpt.class_names = class_names;
      ckpt.parameters = params;
      if (config.save_optimizer) ckpt.optimizer = state;
      ckpt.metadata = {epoch, accuracy, config.training.seed, config.training.eval_batch_size};
      save_checkpoint(checkpoint_path, ckpt);
    };
    auto progress = [&](const EpochRecord& r) {
      char line[128];
      std::snprintf(line, sizeof(line), "epoch %zu loss %.6f accuracy %.6f%s\n", r.epoch,
                    r.train_loss, r.eval_accuracy, r.is_best ? " *" : "");
      io.err << line << std::flush;
    };
    const TrainingConfig& training = config.training;
    TrainingResult<float> result =
        train(init_parameters<float>(model, training.seed), model, training, *train_set, *eval_set,
              on_best, progress);
    write_history_csv(out_dir / "history.csv", result.history);
    char summary[160];
    std::snprintf(summary, sizeof(summary), "best_epoch=%zu best_accuracy=%.6f epochs_run=%zu\n",
                  result.best_epoch, result.best_accuracy, result.history.size());
    io.out << summary;
    if (result.best_epoch == 0) {
      io.err << "warning: no epoch improved on zero accuracy; no checkpoint written\n";
    }
    return 0;
  });
}

int cmd_evaluate(const EvaluateOptions& options, CommandStreams io) {
  return guarded(io.err, "evaluate", [&] {
    if (options.data_root.empty()) throw ValueError("no data root given");
    Checkpoint ckpt = load_checkpoint(options.checkpoint);
    DatasetManifest manifest = scan_corpus(options.data_root, options.split, std::nullopt);
    if (manifest.class_names != ckpt.class_names) {
      throw CorpusLayoutError("class order mismatch: checkpoint [" + join(ckpt.class_names) +
                              "], corpus [" + join(manifest.class_names) + "]");
    }
    for (const auto& w : manifest.warnings) io.err << "warning: " << w << "\n";
    ManifestSource source(manifest, ckpt.config.image_size);
    const std::size_t batch = ckpt.metadata.eval_batch_size > 0 ? ckpt.metadata.eval_batch_size : 32;
    Predictions predictions = predict(ckpt.parameters, ckpt.config, source, batch);
    EvaluationReport report =
        full_report(predictions.probabilities, predictions.labels, ckpt.class_names);
    for (const auto& w : report.warnings) io.err << "warning: " << w << "\n";
    fs::create_directories(options.out_dir);
    write_report(options.out_dir, report);
    if (options.svg) {
      write_text(options.out_dir / "roc.svg", roc_svg(report));
      write_text(options.out_dir / "confusion_matrix.svg", confusion_svg(report));
    }
    char line[160];
    std::snprintf(line, sizeof(line), "samples=%zu accuracy=%.6f macro_f1=%.6f macro_auc=%.6f\n",
                  report.samples, report.accuracy, report.prf.macro_f1, report.macro_auc);
    io.out << line;
    return 0;
  });
}

int cmd_predict(const fs::path& checkpoint, const std::vector<fs::path>& images,
                CommandStreams io) {
  return guarded(io.err, "predict", [&] {
    if (images.empty()) throw ValueError("no images given");
    Checkpoint ckpt = load_checkpoint(checkpoint);
    bool failed = false;
    for (const auto& path : images) {
      try {
        Tensor<float> x = preprocess(load_png(path), ckpt.config.image_size);
        Shape shape{1};
        shape.insert(shape.end(), x.shape().begin(), x.shape().end());
        ForwardOutput<float> y = forward(x.reshaped(shape), ckpt.parameters, ckpt.config);
        const auto c = static_cast<std::size_t>(ops::argmax_rows(y.probabilities).at(0));
        io.out << path.string() << "\t" << ckpt.class_names.at(c);
        for (std::size_t k = 0; k < ckpt.class_names.size(); ++k) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "\t%.6f", static_cast<double>(y.probabilities[k]));
          io.out << buf;
        }
        io.out << "\n";
      } catch (const Error& e) {
        io.err << "pcvit predict: " << path.string() << ": " << e.what() << "\n";
        failed = true;
      }
    }
    return failed ? 1 : 0;
  });
}

int cmd_plot(const fs::path& report_dir, const fs::path& out_dir, CommandStreams io) {
  return guarded(io.err, "plot", [&] {
    EvaluationReport report = read_report(report_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "roc.svg", roc_svg(report));
    write_text(out_dir / "confusion_matrix.svg", confusion_svg(report));
    io.out << (out_dir / "roc.svg").string() << "\n"
           << (out_dir / "confusion_matrix.svg").string() << "\n";
    return 0;
  });
}

}  // namespace pcvit
