#include "pcvit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pcvit/ops.hpp"
#include "pcvit/tensor_file.hpp"

namespace pcvit {

template <typename T>
T cross_entropy(const Tensor<T>& probabilities, std::span<const int> labels, T floor) {
  Graph<T> g(false);
  return g.value(g.cross_entropy_probs(g.constant(probabilities), labels, floor)).item();
}

template <typename T>
void adam_step(ParameterSet<T>& params, const GradientMap<T>& grads, AdamState<T>& state) {
  for (const auto& [name, grad] : grads) {
    if (grad.shape() != params.at(name).shape()) {
      throw ShapeError("adam: gradient of " + name + " has shape " + shape_string(grad.shape()) +
                       ", parameter has " + shape_string(params.at(name).shape()));
    }
    ensure_finite(grad, "adam gradient of " + name);
  }
  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T correction1 = static_cast<T>(1.0 - std::pow(h.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(h.beta2, t));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T lr = static_cast<T>(h.learning_rate), eps = static_cast<T>(h.epsilon);

  for (const auto& [name, grad] : grads) {
    Tensor<T>& theta = params.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, theta.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, theta.shape());
    auto m = m_it->second.data();
    auto v = v_it->second.data();
    auto p = theta.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
double clip_gradient_norm(GradientMap<T>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (T v : g.data()) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [name, g] : grads) {
      for (T& v : g.data()) v *= factor;
    }
  }
  return norm;
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw ValueError("patience must be at least 1");
}

bool EarlyStopping::observe(double accuracy) {
  if (accuracy > best_) {
    best_ = accuracy;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::vector<EpochRecord> run_training_loop(std::size_t epochs, std::size_t patience,
                                           const LoopCallbacks& callbacks) {
  if (epochs == 0) throw ValueError("epochs must be at least 1");
  EarlyStopping stopper(patience);
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = callbacks.train_epoch(epoch);
    record.eval_accuracy = callbacks.evaluate(epoch);
    record.is_best = stopper.observe(record.eval_accuracy);
    if (record.is_best && callbacks.save_best) callbacks.save_best(epoch, record.eval_accuracy);
    history.push_back(record);
    if (callbacks.epoch_done) callbacks.epoch_done(record);
    if (stopper.exhausted()) break;
  }
  return history;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,eval_accuracy,is_best\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%d\n", r.epoch, r.train_loss, r.eval_accuracy,
                  r.is_best ? 1 : 0);
    out << buf;
  }
  return out.str();
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  write_file_atomic(path, history_csv(history));
}

std::vector<std::string> frozen_parameters(const ModelConfig& config, bool head_only) {
  std::vector<std::string> frozen;
  if (!head_only) return frozen;
  for (const auto& spec : parameter_layout(config)) {
    if (spec.name.rfind("head.", 0) != 0) frozen.push_back(spec.name);
  }
  return frozen;
}

template <typename T>
double train_step(ParameterSet<T>& params, AdamState<T>& state, const ModelConfig& config,
                  const TrainingConfig& training, const Tensor<T>& images,
                  std::span<const int> labels) {
  const auto frozen = frozen_parameters(config, training.head_only);
  Graph<T> g;
  ParameterBinder<T> bind(g, params, &frozen);
  Var logits = forward_logits(bind, images, config);
  Var loss = training.loss == LossMode::fused
                 ? g.cross_entropy_logits(logits, labels)
                 : g.cross_entropy_probs(g.softmax(logits), labels);
  const double value = static_cast<double>(g.value(loss).item());
  GradientMap<T> grads = g.backward(loss);
  if (training.clip_norm > 0.0) clip_gradient_norm(grads, training.clip_norm);
  adam_step(params, grads, state);
  return value;
}

template <typename T>
Predictions predict(const ParameterSet<T>& params, const ModelConfig& config,
                    const SampleSource& source, std::size_t batch_size) {
  if (source.size() == 0) throw ValueError("cannot evaluate an empty dataset");
  Predictions out;
  out.probabilities = Tensor<double>({source.size(), config.num_classes});
  BatchIterator batches(source, batch_size, false, 0);
  std::size_t row = 0;
  while (batches.has_next()) {
    Batch batch = batches.next();
    Tensor<T> images;
    if constexpr (std::is_same_v<T, float>) {
      images = std::move(batch.images);
    } else {
      images = batch.images.template cast<T>();
    }
    const ForwardOutput<T> fwd = forward(images, params, config);
    for (std::size_t i = 0; i < fwd.probabilities.size(); ++i) {
      out.probabilities[row * config.num_classes + i] = static_cast<double>(fwd.probabilities[i]);
    }
    row += batch.labels.size();
    out.labels.insert(out.labels.end(), batch.labels.begin(), batch.labels.end());
  }
  return out;
}

template <typename T>
double evaluate_accuracy(const ParameterSet<T>& params, const ModelConfig& config,
                         const SampleSource& source, std::size_t batch_size) {
  const Predictions p = predict(params, config, source, batch_size);
  const auto predicted = ops::argmax_rows(p.probabilities);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == p.labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

template <typename T>
TrainingResult<T> train(ParameterSet<T> initial, const ModelConfig& config,
                        const TrainingConfig& training, const SampleSource& train_set,
                        const SampleSource& eval_set, const BestModelSink<T>& on_best,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  check_parameters(initial, config);
  if (training.batch_size == 0) throw ValueError("batch size must be at least 1");
  TrainingResult<T> result;
  ParameterSet<T> params = std::move(initial);
  AdamState<T> state;
  state.hyper = training.adam;

  LoopCallbacks callbacks;
  callbacks.train_epoch = [&](std::size_t epoch) {
    BatchIterator batches(train_set, training.batch_size, training.shuffle,
                          epoch_seed(training.seed, epoch));
    double total = 0.0;
    std::size_t seen = 0;
    std::size_t batch_no = 0;
    while (batches.has_next()) {
      ++batch_no;
      try {
        Batch batch = batches.next();
        Tensor<T> images;
        if constexpr (std::is_same_v<T, float>) {
          images = std::move(batch.images);
        } else {
          images = batch.images.template cast<T>();
        }
        const double loss = train_step(params, state, config, training, images, batch.labels);
        total += loss * static_cast<double>(batch.labels.size());
        seen += batch.labels.size();
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no) + ": " + e.what());
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) +
                    ": " + e.what());
      }
    }
    return total / static_cast<double>(seen);
  };
  callbacks.evaluate = [&](std::size_t) {
    return evaluate_accuracy(params, config, eval_set, training.eval_batch_size);
  };
  callbacks.save_best = [&](std::size_t epoch, double accuracy) {
    result.best_epoch = epoch;
    result.best_accuracy = accuracy;
    result.best_parameters = params;
    if (on_best) on_best(epoch, accuracy, params, state);
  };
  callbacks.epoch_done = on_epoch;
  result.history = run_training_loop(training.epochs, training.patience, callbacks);
  if (result.best_epoch == 0) result.best_parameters = params;
  result.optimizer = std::move(state);
  return result;
}

#define PCVIT_INSTANTIATE_TRAINING(T)                                                          \
  template T cross_entropy<T>(const Tensor<T>&, std::span<const int>, T);                      \
  template void adam_step<T>(ParameterSet<T>&, const GradientMap<T>&, AdamState<T>&);          \
  template double clip_gradient_norm<T>(GradientMap<T>&, double);                              \
  template double train_step<T>(ParameterSet<T>&, AdamState<T>&, const ModelConfig&,           \
                                const TrainingConfig&, const Tensor<T>&, std::span<const int>); \
  template Predictions predict<T>(const ParameterSet<T>&, const ModelConfig&,                  \
                                  const SampleSource&, std::size_t);                           \
  template double evaluate_accuracy<T>(const ParameterSet<T>&, const ModelConfig&,             \
                                       const SampleSource&, std::size_t);                      \
  template TrainingResult<T> train<T>(ParameterSet<T>, const ModelConfig&,                     \
                                      const TrainingConfig&, const SampleSource&,              \
                                      const SampleSource&, const BestModelSink<T>&,          \
                                      const std::function<void(const EpochRecord&)>&);

PCVIT_INSTANTIATE_TRAINING(float)
PCVIT_INSTANTIATE_TRAINING(double)

#undef PCVIT_INSTANTIATE_TRAINING

}  // namespace pcvit
