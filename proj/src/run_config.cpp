#include "pcvit/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "pcvit/dataset.hpp"

namespace pcvit {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("config: cannot parse " + key + " = '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw FormatError("config: " + key + " expects true or false, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename V>
Key size_key(const char* name, V RunConfig::*group, std::size_t V::*field) {
  return {name,
          [group, field](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*group).*field = parse_number<std::size_t>(k, v);
          },
          [group, field](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"model.variant", [](RunConfig&, const std::string&, const std::string&) {},
       [](const RunConfig& c) { return c.model.variant; }},
      size_key("model.image_size", &RunConfig::model, &ModelConfig::image_size),
      size_key("model.patch_size", &RunConfig::model, &ModelConfig::patch_size),
      size_key("model.embed_dim", &RunConfig::model, &ModelConfig::embed_dim),
      size_key("model.depth", &RunConfig::model, &ModelConfig::depth),
      size_key("model.heads", &RunConfig::model, &ModelConfig::heads),
      size_key("model.ffn_hidden", &RunConfig::model, &ModelConfig::ffn_hidden),
      size_key("model.num_classes", &RunConfig::model, &ModelConfig::num_classes),
      {"model.norm",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "pre" && v != "none") throw FormatError("config: " + k + " expects pre|none");
         c.model.norm = v == "pre" ? NormPlacement::pre : NormPlacement::none;
       },
       [](const RunConfig& c) {
         return std::string(c.model.norm == NormPlacement::pre ? "pre" : "none");
       }},
      {"model.attention_scale",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "per_head" && v != "full") {
           throw FormatError("config: " + k + " expects per_head|full");
         }
         c.model.attention_scale =
             v == "per_head" ? AttentionScale::per_head : AttentionScale::full;
       },
       [](const RunConfig& c) {
         return std::string(c.model.attention_scale == AttentionScale::per_head ? "per_head"
                                                                                : "full");
       }},
      {"model.cls_positional",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.cls_positional = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.model.cls_positional ? "true" : "false"); }},
      {"model.norm_eps",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.model.norm_eps = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.model.norm_eps); }},
      size_key("training.epochs", &RunConfig::training, &TrainingConfig::epochs),
      size_key("training.batch_size", &RunConfig::training, &TrainingConfig::batch_size),
      size_key("training.eval_batch_size", &RunConfig::training,
               &TrainingConfig::eval_batch_size),
      size_key("training.patience", &RunConfig::training, &TrainingConfig::patience),
      {"training.learning_rate",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.adam.learning_rate = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.training.adam.learning_rate); }},
      {"training.beta1",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.adam.beta1 = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.training.adam.beta1); }},
      {"training.beta2",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.adam.beta2 = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.training.adam.beta2); }},
      {"training.epsilon",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.adam.epsilon = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.training.adam.epsilon); }},
      {"training.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.training.seed); }},
      {"training.shuffle",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.shuffle = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.training.shuffle ? "true" : "false"); }},
      {"training.head_only",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.head_only = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.training.head_only ? "true" : "false"); }},
      {"training.loss",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "fused" && v != "literal") {
           throw FormatError("config: " + k + " expects fused|literal");
         }
         c.training.loss = v == "fused" ? LossMode::fused : LossMode::literal;
       },
       [](const RunConfig& c) {
         return std::string(c.training.loss == LossMode::fused ? "fused" : "literal");
       }},
      {"training.clip_norm",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.clip_norm = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.training.clip_norm); }},
      {"training.val_fraction",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.val_fraction = parse_number<double>(k, v);
       },
       [](const RunConfig& c) { return format_double(c.val_fraction); }},
      {"training.save_optimizer",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.save_optimizer = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.save_optimizer ? "true" : "false"); }},
      {"data.root",
       [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = v; },
       [](const RunConfig& c) { return c.data_root; }},
      {"data.classes",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.classes = v == "auto" ? std::vector<std::string>{} : parse_list(v);
       },
       [](const RunConfig& c) { return c.classes.empty() ? std::string("auto") : join(c.classes); }},
      {"data.archive",
       [](RunConfig& c, const std::string&, const std::string& v) { c.archive_dir = v; },
       [](const RunConfig& c) { return c.archive_dir; }},
      {"output.dir",
       [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
      {"runtime.device",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "auto" && v != "cpu") throw FormatError("config: " + k + " expects auto|cpu");
         c.device = v;
       },
       [](const RunConfig& c) { return c.device; }},
  };
  return table;
}

}  // namespace

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const ConfigOverrides& overrides) {
  std::map<std::string, std::string> values;
  if (file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw FormatError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        throw FormatError("config: key '" + section + "' must be inside a [section]");
      }
      for (const auto& [key, node] : body) values[section + "." + key] = node.data();
    }
  }
  for (const auto& [key, value] : overrides) values[key] = value;

  for (const auto& [key, value] : values) {
    bool known = false;
    for (const auto& k : keys()) known = known || key == k.name;
    if (!known) throw FormatError("config: unknown key '" + key + "'");
  }

  RunConfig config;
  config.model = variant_config(values.contains("model.variant") ? values["model.variant"]
                                                                  : std::string("base"));
  config.classes = default_class_names();
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    config.out_dir = env;
  } else {
    config.out_dir = "runs";
  }
  for (const auto& k : keys()) {
    if (auto it = values.find(k.name); it != values.end()) k.set(config, k.name, it->second);
  }
  if (!config.classes.empty()) {
    if (values.contains("model.num_classes") &&
        config.model.num_classes != config.classes.size()) {
      throw FormatError("config: model.num_classes = " + values["model.num_classes"] +
                        " but data.classes lists " + std::to_string(config.classes.size()));
    }
    config.model.num_classes = config.classes.size();
  }
  if (!(config.training.adam.learning_rate > 0)) {
    throw FormatError("config: training.learning_rate must be positive");
  }
  if (config.training.epochs == 0) throw FormatError("config: training.epochs must be >= 1");
  if (config.training.patience == 0) throw FormatError("config: training.patience must be >= 1");
  if (config.training.batch_size == 0) {
    throw FormatError("config: training.batch_size must be >= 1");
  }
  config.model.validate();
  return config;
}

std::string resolved_config_ini(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << name.substr(dot + 1) << " = " << k.get(config) << "\n";
  }
  return out.str();
}

}  // namespace pcvit
