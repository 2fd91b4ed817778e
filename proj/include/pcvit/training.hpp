#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcvit/autograd.hpp"
#include "pcvit/dataset.hpp"
#include "pcvit/vit.hpp"

namespace pcvit {

/// Mean over the batch of -log(max(p[i, y_i], floor)).
template <typename T>
T cross_entropy(const Tensor<T>& probabilities, std::span<const int> labels, T floor = T(1e-12));

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::map<std::string, Tensor<T>> first_moment;
  std::map<std::string, Tensor<T>> second_moment;
};

/// One bias-corrected Adam update of every parameter named in `grads`.
/// Throws NonFiniteError on a NaN/Inf gradient and ShapeError on a shape
/// mismatch; nothing is modified in either case.
template <typename T>
void adam_step(ParameterSet<T>& params, const GradientMap<T>& grads, AdamState<T>& state);

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_gradient_norm(GradientMap<T>& grads, double max_norm);

/// Best-accuracy tracking with patience; improvement is strict.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Records one evaluation; true when it beats the best so far.
  bool observe(double accuracy);
  bool exhausted() const noexcept { return stale_ >= patience_; }
  double best() const noexcept { return best_; }
  std::size_t stale() const noexcept { return stale_; }
  std::size_t patience() const noexcept { return patience_; }

 private:
  std::size_t patience_;
  double best_ = 0.0;
  std::size_t stale_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  bool is_best = false;
};

struct LoopCallbacks {
  /// Runs one training epoch (1-based) and returns its mean loss.
  std::function<double(std::size_t epoch)> train_epoch;
  std::function<double(std::size_t epoch)> evaluate;
  /// Called when `epoch` sets a new best accuracy.
  std::function<void(std::size_t epoch, double accuracy)> save_best;
  /// Optional; called after each epoch's record is final.
  std::function<void(const EpochRecord&)> epoch_done;
};

/// Epoch loop with early stopping: train, evaluate, keep the strict best,
/// stop after `patience` epochs without improvement or after `epochs`.
std::vector<EpochRecord> run_training_loop(std::size_t epochs, std::size_t patience,
                                           const LoopCallbacks& callbacks);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::string history_csv(const std::vector<EpochRecord>& history);

enum class LossMode { fused, literal };

struct TrainingConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t patience = 15;
  AdamHyper adam;
  std::uint64_t seed = 42;
  bool shuffle = true;
  bool head_only = false;
  LossMode loss = LossMode::fused;
  /// Global-norm clipping threshold; 0 disables clipping.
  double clip_norm = 0.0;
  std::size_t eval_batch_size = 32;
};

/// Parameters the optimizer leaves untouched in head-only mode.
std::vector<std::string> frozen_parameters(const ModelConfig& config, bool head_only);

/// One forward/backward/update on a batch. Returns the batch loss.
template <typename T>
double train_step(ParameterSet<T>& params, AdamState<T>& state, const ModelConfig& config,
                  const TrainingConfig& training, const Tensor<T>& images,
                  std::span<const int> labels);

struct Predictions {
  Tensor<double> probabilities;  // [N, C]
  std::vector<int> labels;
};

/// Class probabilities for every sample, in source order.
template <typename T>
Predictions predict(const ParameterSet<T>& params, const ModelConfig& config,
                    const SampleSource& source, std::size_t batch_size);

/// Fraction of samples whose argmax prediction equals the label.
template <typename T>
double evaluate_accuracy(const ParameterSet<T>& params, const ModelConfig& config,
                         const SampleSource& source, std::size_t batch_size);

template <typename T>
struct TrainingResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;
  ParameterSet<T> best_parameters;
  AdamState<T> optimizer;
};

/// Called with the epoch, accuracy and parameters of each new best.
template <typename T>
using BestModelSink =
    std::function<void(std::size_t epoch, double accuracy, const ParameterSet<T>& params,
                       const AdamState<T>& state)>;

/// Full training run from `initial`. Errors raised inside an epoch are
/// rethrown with the epoch and batch number prepended.
template <typename T>
TrainingResult<T> train(ParameterSet<T> initial, const ModelConfig& config,
                        const TrainingConfig& training, const SampleSource& train_set,
                        const SampleSource& eval_set, const BestModelSink<T>& on_best = {},
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace pcvit
