// pcvit: preprocess, train, evaluate, predict, plot.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcvit/commands.hpp"
#include "pcvit/error.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string data_root;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> patience;
  std::optional<double> val_fraction;
  bool head_only = false;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--data-root", f.data_root, "Corpus root holding train/ and test/");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--variant", f.variant, "Model variant")->check(CLI::IsMember({"base", "tiny"}));
  cmd->add_option("--epochs", f.epochs, "Maximum epochs");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--patience", f.patience, "Early-stopping patience");
  cmd->add_option("--val-fraction", f.val_fraction,
                  "Hold out this fraction of train for early stopping");
  cmd->add_flag("--head-only", f.head_only, "Train only the classifier head");
  cmd->add_option("--set", f.sets, "Override any key, as section.key=value");
}

template <typename V>
std::string text(const V& v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

pcvit::RunConfig resolve(const RunFlags& f) {
  pcvit::ConfigOverrides overrides;
  for (const auto& item : f.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || item.find('.') > eq) {
      throw pcvit::FormatError("--set expects section.key=value, got '" + item + "'");
    }
    overrides[item.substr(0, eq)] = item.substr(eq + 1);
  }
  if (!f.data_root.empty()) overrides["data.root"] = f.data_root;
  if (!f.out.empty()) overrides["output.dir"] = f.out;
  if (f.seed) overrides["training.seed"] = text(*f.seed);
  if (!f.variant.empty()) overrides["model.variant"] = f.variant;
  if (f.epochs) overrides["training.epochs"] = text(*f.epochs);
  if (f.batch_size) overrides["training.batch_size"] = text(*f.batch_size);
  if (f.lr) overrides["training.learning_rate"] = text(*f.lr);
  if (f.patience) overrides["training.patience"] = text(*f.patience);
  if (f.val_fraction) overrides["training.val_fraction"] = text(*f.val_fraction);
  if (f.head_only) overrides["training.head_only"] = "true";
  std::optional<std::filesystem::path> file;
  if (!f.config.empty()) file = f.config;
  return pcvit::resolve_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-color Vision Transformer classifier"};
  app.require_subcommand(1);

  RunFlags pre_flags;
  auto* pre = app.add_subcommand("preprocess", "Build tensor archives and manifests");
  add_run_flags(pre, pre_flags);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Train and keep the best checkpoint");
  add_run_flags(train, train_flags);

  pcvit::EvaluateOptions eval_opts;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Write metrics for a checkpoint");
  evaluate->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--data-root", eval_opts.data_root, "Corpus root")->required();
  evaluate->add_option("--split", eval_opts.split, "Split folder to evaluate");
  evaluate->add_option("--out", eval_out, "Report directory");
  evaluate->add_flag("--svg", eval_opts.svg, "Also write ROC and confusion SVGs");

  std::string predict_ckpt;
  std::vector<std::string> predict_images;
  auto* predict = app.add_subcommand("predict", "Classify individual images");
  predict->add_option("--checkpoint", predict_ckpt, "Checkpoint file")->required();
  predict->add_option("images", predict_images, "PNG images")->required();

  std::string plot_report;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from a report");
  plot->add_option("--report", plot_report, "Report directory")->required();
  plot->add_option("--out", plot_out, "Output directory (default: the report directory)");

  CLI11_PARSE(app, argc, argv);

  pcvit::CommandStreams io{std::cout, std::cerr};
  try {
    if (pre->parsed()) return pcvit::cmd_preprocess(resolve(pre_flags), io);
    if (train->parsed()) return pcvit::cmd_train(resolve(train_flags), io);
    if (evaluate->parsed()) {
      if (eval_out.empty()) eval_out = resolve(RunFlags{}).out_dir;
      eval_opts.out_dir = eval_out;
      return pcvit::cmd_evaluate(eval_opts, io);
    }
    if (predict->parsed()) {
      std::vector<std::filesystem::path> images(predict_images.begin(), predict_images.end());
      return pcvit::cmd_predict(predict_ckpt, images, io);
    }
    if (plot->parsed()) {
      return pcvit::cmd_plot(plot_report, plot_out.empty() ? plot_report : plot_out, io);
    }
  } catch (const pcvit::Error& e) {
    std::cerr << "pcvit: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
