#include "pcvit/checkpoint.hpp"

#include <set>

#include "pcvit/tensor_file.hpp"

namespace pcvit {

namespace {

constexpr const char* kKind = "checkpoint";
constexpr const char* kParamPrefix = "param/";
constexpr const char* kFirstMomentPrefix = "adam.m/";
constexpr const char* kSecondMomentPrefix = "adam.v/";

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  check_parameters(ckpt.parameters, ckpt.config);
  if (ckpt.class_names.size() != ckpt.config.num_classes) {
    throw ValueError("checkpoint: " + std::to_string(ckpt.class_names.size()) +
                     " class names for a " + std::to_string(ckpt.config.num_classes) +
                     "-class model");
  }
  TensorFile file;
  file.kind = kKind;
  file.meta = {
      {"config", to_json(ckpt.config)},
      {"class_names", ckpt.class_names},
      {"epoch", ckpt.metadata.epoch},
      {"best_accuracy", ckpt.metadata.best_accuracy},
      {"seed", ckpt.metadata.seed},
      {"eval_batch_size", ckpt.metadata.eval_batch_size},
  };
  for (const auto& name : ckpt.parameters.names()) {
    file.tensors.push_back({kParamPrefix + name, ckpt.parameters.at(name)});
  }
  if (ckpt.optimizer) {
    const auto& opt = *ckpt.optimizer;
    file.meta["optimizer"] = {
        {"step", opt.step},
        {"learning_rate", opt.hyper.learning_rate},
        {"beta1", opt.hyper.beta1},
        {"beta2", opt.hyper.beta2},
        {"epsilon", opt.hyper.epsilon},
    };
    for (const auto& [name, m] : opt.first_moment) {
      file.tensors.push_back({kFirstMomentPrefix + name, m});
    }
    for (const auto& [name, v] : opt.second_moment) {
      file.tensors.push_back({kSecondMomentPrefix + name, v});
    }
  }
  write_tensor_file(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_classes) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  TensorFile file = read_tensor_file(path);
  if (file.kind != kKind) {
    throw FormatError(path.string() + ": expected a checkpoint, found kind '" + file.kind + "'");
  }
  Checkpoint ckpt;
  try {
    ckpt.config = model_config_from_json(file.meta.at("config"));
    ckpt.class_names = file.meta.at("class_names").get<std::vector<std::string>>();
    ckpt.metadata.epoch = file.meta.at("epoch").get<std::size_t>();
    ckpt.metadata.best_accuracy = file.meta.at("best_accuracy").get<double>();
    ckpt.metadata.seed = file.meta.at("seed").get<std::uint64_t>();
    ckpt.metadata.eval_batch_size = file.meta.at("eval_batch_size").get<std::size_t>();
    if (file.meta.contains("optimizer")) {
      const auto& o = file.meta["optimizer"];
      AdamState<float> state;
      state.step = o.at("step").get<std::uint64_t>();
      state.hyper.learning_rate = o.at("learning_rate").get<double>();
      state.hyper.beta1 = o.at("beta1").get<double>();
      state.hyper.beta2 = o.at("beta2").get<double>();
      state.hyper.epsilon = o.at("epsilon").get<double>();
      ckpt.optimizer = std::move(state);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint metadata: " + e.what());
  }
  if (ckpt.class_names.size() != ckpt.config.num_classes) {
    throw FormatError(path.string() + ": " + std::to_string(ckpt.class_names.size()) +
                      " class names for a " + std::to_string(ckpt.config.num_classes) +
                      "-class model");
  }
  if (expected_classes && *expected_classes != ckpt.config.num_classes) {
    throw ValueError(path.string() + ": expected " + std::to_string(*expected_classes) +
                     " classes, checkpoint has " + std::to_string(ckpt.config.num_classes));
  }

  std::set<std::string> known;
  for (const auto& spec : parameter_layout(ckpt.config)) known.insert(spec.name);
  for (auto& [full_name, tensor] : file.tensors) {
    std::string name;
    bool is_param = false, is_m = false;
    if (starts_with(full_name, kParamPrefix)) {
      name = full_name.substr(std::char_traits<char>::length(kParamPrefix));
      is_param = true;
    } else if (ckpt.optimizer && starts_with(full_name, kFirstMomentPrefix)) {
      name = full_name.substr(std::char_traits<char>::length(kFirstMomentPrefix));
      is_m = true;
    } else if (ckpt.optimizer && starts_with(full_name, kSecondMomentPrefix)) {
      name = full_name.substr(std::char_traits<char>::length(kSecondMomentPrefix));
    } else {
      throw UnknownTensorError(path.string() + ": unknown tensor " + full_name);
    }
    if (!known.contains(name)) {
      throw UnknownTensorError(path.string() + ": tensor " + full_name +
                               " is not a parameter of this model");
    }
    if (is_param) {
      ckpt.parameters.add(name, std::move(tensor));
    } else if (is_m) {
      ckpt.optimizer->first_moment.emplace(name, std::move(tensor));
    } else {
      ckpt.optimizer->second_moment.emplace(name, std::move(tensor));
    }
  }
  try {
    check_parameters(ckpt.parameters, ckpt.config);
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace pcvit
