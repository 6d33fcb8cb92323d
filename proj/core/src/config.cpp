#include "gopro/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gopro/errors.hpp"

namespace gopro {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<RunConfig::KeySpec>& RunConfig::registry() {
  using T = Type;
  static const std::vector<KeySpec> kRegistry = {
      {"seed", T::Int, "0", {}, "root seed fanned out to every module"},
      {"threads", T::Int, "1", {}, "intra-op thread count (1 = deterministic)"},

      {"backbone.kind", T::Enum, "toy", {"toy", "adapter"}, "frozen dual encoder implementation"},
      {"backbone.toy.image_size", T::Int, "32", {}, "expected input resolution of the toy vision encoder"},
      {"backbone.toy.layer_dims", T::Str, "8,16,32", {}, "channel widths of the toy vision encoder layers"},
      {"backbone.toy.text_embed_dim", T::Int, "32", {}, "token embedding width of the toy text encoder"},
      {"backbone.toy.text_output_dim", T::Int, "32", {}, "final embedding width of the toy text encoder"},
      {"backbone.toy.context_capacity", T::Int, "16", {}, "max token positions of the toy text encoder"},
      {"backbone.toy.weight_seed", T::Int, "1234", {}, "seed for the fixed toy backbone weights"},
      {"backbone.toy.norm_mean", T::Str, "0.5,0.5,0.5", {}, "per-channel normalization means"},
      {"backbone.toy.norm_std", T::Str, "0.25,0.25,0.25", {}, "per-channel normalization stds"},
      {"backbone.adapter.vision_path", T::Str, "", {}, "TorchScript vision encoder file"},
      {"backbone.adapter.text_path", T::Str, "", {}, "TorchScript text encoder file"},
      {"backbone.adapter.image_size", T::Int, "224", {}, "expected input resolution of the adapter"},
      {"backbone.adapter.layer_taps", T::Str, "all", {}, "'all' or comma list of 1-based encoder layers to expose"},
      {"backbone.adapter.norm_mean", T::Str, "0.48145466,0.4578275,0.40821073", {}, "per-channel normalization means"},
      {"backbone.adapter.norm_std", T::Str, "0.26862954,0.26130258,0.27577711", {}, "per-channel normalization stds"},

      {"features.content_layers", T::Str, "all", {}, "'all' or comma list of 1-based layers feeding the content vector"},
      {"features.d_seed", T::Int, "0", {}, "prompt seed width after rescaling (0 = text embedding width)"},
      {"features.std_epsilon", T::Float, "1e-05", {}, "epsilon inside the style std sqrt"},
      {"features.frg_mode", T::Enum, "seeded", {"seeded", "identity"}, "fixed rescale projection kind"},

      {"rho.context_length", T::Int, "4", {}, "number of learned context tokens M"},
      {"rho.init", T::Enum, "manual", {"manual", "random", "none"}, "context token initialization strategy"},
      {"rho.template", T::Str, "a photo of a", {}, "template words for manual initialization"},
      {"rho.hidden_width", T::Int, "0", {}, "bottleneck width H (0 = max(16, d_seed/16))"},
      {"rho.ctx_base_width", T::Int, "0", {}, "encoder output width (0 = token embedding width)"},
      {"rho.init_seed", T::Int, "77", {}, "seed for trainable prompt-learner initialization"},

      {"pv.d_joint", T::Int, "0", {}, "joint space width (0 = text output width)"},
      {"pv.bn_momentum", T::Float, "0.1", {}, "batch-norm running stat momentum"},
      {"pv.bn_epsilon", T::Float, "1e-05", {}, "batch-norm epsilon"},
      {"pv.init_seed", T::Int, "78", {}, "seed for trainable projector initialization"},

      {"augment.crop_scale_min", T::Float, "0.2", {}, "random resized crop minimum area fraction"},
      {"augment.crop_scale_max", T::Float, "1", {}, "random resized crop maximum area fraction"},
      {"augment.flip_prob", T::Float, "0.5", {}, "horizontal flip probability"},
      {"augment.jitter_prob", T::Float, "0.8", {}, "color jitter probability"},
      {"augment.jitter_brightness", T::Float, "0.4", {}, "brightness jitter strength"},
      {"augment.jitter_contrast", T::Float, "0.4", {}, "contrast jitter strength"},
      {"augment.jitter_saturation", T::Float, "0.2", {}, "saturation jitter strength"},
      {"augment.jitter_hue", T::Float, "0.1", {}, "hue jitter strength"},
      {"augment.grayscale_prob", T::Float, "0.2", {}, "random grayscale probability"},
      {"augment.blur_prob", T::Float, "0.5", {}, "gaussian blur probability"},
      {"augment.solarize_prob", T::Float, "0.2", {}, "solarize probability"},
      {"augment.augmix_width", T::Int, "3", {}, "number of mixed augmentation chains k"},
      {"augment.augmix_depth_min", T::Int, "1", {}, "minimum ops per chain"},
      {"augment.augmix_depth_max", T::Int, "3", {}, "maximum ops per chain"},
      {"augment.augmix_alpha", T::Float, "1", {}, "Dirichlet/Beta concentration"},
      {"augment.augmix_severity", T::Int, "3", {}, "op severity ceiling, 1..10"},

      {"loss.enable_con", T::Bool, "true", {}, "enable the visual contrastive term"},
      {"loss.enable_ce", T::Bool, "true", {}, "enable the image-text cross-entropy term"},
      {"loss.enable_sem", T::Bool, "true", {}, "enable the prompt consistency term"},
      {"loss.sem_use_x1", T::Bool, "true", {}, "consistency against the geometric view"},
      {"loss.sem_use_x2", T::Bool, "true", {}, "consistency against the compositional view"},
      {"loss.temperature", T::Float, "0.07", {}, "softmax/contrastive temperature tau"},

      {"train.epochs", T::Int, "50", {}, "training epochs"},
      {"train.batch_size", T::Int, "4", {}, "samples per step"},
      {"train.shots", T::Int, "16", {}, "labeled samples per class (0 = all)"},
      {"train.lr", T::Float, "0.002", {}, "SGD learning rate"},
      {"train.momentum", T::Float, "0.9", {}, "SGD momentum"},
      {"train.warmup_epochs", T::Int, "1", {}, "linear warmup epochs"},
      {"train.schedule", T::Enum, "cosine", {"cosine", "constant"}, "learning rate schedule"},
      {"train.clip_norm", T::Float, "5", {}, "global gradient norm clip (0 = off)"},
      {"train.seeds", T::Str, "0,1,2", {}, "comma list of run seeds"},
      {"train.checkpoint_every", T::Int, "0", {}, "epochs between checkpoints (0 = final only)"},

      {"data.dataset", T::Str, "toy2", {}, "builtin name, manifest path, or class-per-folder directory"},
      {"data.targets", T::Str, "", {}, "comma list of target datasets for cross-dataset / domain runs"},
      {"data.protocol", T::Enum, "base_to_new", {"base_to_new", "cross_dataset", "domain_generalization"}, "evaluation protocol"},
      {"data.split_seed", T::Int, "0", {}, "seed for the class split"},

      {"out.dir", T::Str, "runs/out", {}, "output directory for manifests, checkpoints, results"},
      {"out.overwrite", T::Bool, "false", {}, "allow writing into a non-empty output directory"},
  };
  return kRegistry;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const auto& spec : registry()) {
    cfg.values_[spec.key] = spec.default_value;
  }
  return cfg;
}

const RunConfig::KeySpec& RunConfig::spec_for(const std::string& key) const {
  for (const auto& spec : registry()) {
    if (spec.key == key) return spec;
  }
  throw ConfigError(fmt::format("unknown config key: '{}'", key));
}

std::string RunConfig::canonicalize(const KeySpec& spec, const std::string& raw) const {
  const std::string v = trim(raw);
  switch (spec.type) {
    case Type::Int: {
      std::int64_t parsed = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
      if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(fmt::format("config key '{}': expected integer, got '{}'", spec.key, v));
      }
      return fmt::format("{}", parsed);
    }
    case Type::Float: {
      try {
        std::size_t pos = 0;
        double parsed = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return fmt::format("{}", parsed);
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("config key '{}': expected number, got '{}'", spec.key, v));
      }
    }
    case Type::Bool: {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return "true";
      if (v == "false" || v == "0" || v == "no" || v == "off") return "false";
      throw ConfigError(fmt::format("config key '{}': expected boolean, got '{}'", spec.key, v));
    }
    case Type::Enum: {
      if (std::find(spec.enum_values.begin(), spec.enum_values.end(), v) == spec.enum_values.end()) {
        throw ConfigError(fmt::format("config key '{}': '{}' is not one of [{}]", spec.key, v,
                                      fmt::join(spec.enum_values, ", ")));
      }
      return v;
    }
    case Type::Str:
      return v;
  }
  throw ConfigError("unreachable");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& spec = spec_for(key);
  values_[key] = canonicalize(spec, value);
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

void RunConfig::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

namespace {

void flatten_yaml(const YAML::Node& node, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      flatten_yaml(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.IsSequence()) {
    std::string joined;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i) joined += ",";
      joined += node[i].as<std::string>();
    }
    out.emplace_back(prefix, joined);
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.as<std::string>());
  } else if (node.IsNull()) {
    out.emplace_back(prefix, "");
  }
}

}  // namespace

void RunConfig::load_yaml_string(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("{}: YAML parse error: {}", origin, e.what()));
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) {
    throw ConfigError(fmt::format("{}: top-level YAML node must be a map", origin));
  }
  std::vector<std::pair<std::string, std::string>> flat;
  flatten_yaml(root, "", flat);

  std::vector<std::string> unknown;
  for (const auto& [key, value] : flat) {
    bool known = false;
    for (const auto& spec : registry()) {
      if (spec.key == key) {
        known = true;
        break;
      }
    }
    if (!known) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    throw ConfigError(fmt::format("{}: unknown config keys: [{}]", origin, fmt::join(unknown, ", ")));
  }
  for (const auto& [key, value] : flat) set(key, value);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  load_yaml_string(ss.str(), path);
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != Type::Int) throw ConfigError(fmt::format("config key '{}' is not an integer", key));
  return std::stoll(values_.at(key));
}

double RunConfig::get_double(const std::string& key) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != Type::Float && spec.type != Type::Int) {
    throw ConfigError(fmt::format("config key '{}' is not numeric", key));
  }
  return std::stod(values_.at(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != Type::Bool) throw ConfigError(fmt::format("config key '{}' is not a boolean", key));
  return values_.at(key) == "true";
}

const std::string& RunConfig::get_str(const std::string& key) const {
  spec_for(key);
  return values_.at(key);
}

std::vector<std::string> RunConfig::get_str_list(const std::string& key) const {
  const std::string& raw = get_str(key);
  std::vector<std::string> out;
  if (trim(raw).empty()) return out;
  for (const auto& part : split(raw, ',')) {
    const std::string p = trim(part);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::vector<std::int64_t> RunConfig::get_int_list(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& part : get_str_list(key)) {
    try {
      out.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("config key '{}': '{}' is not an integer", key, part));
    }
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : get_str_list(key)) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("config key '{}': '{}' is not a number", key, part));
    }
  }
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const {
  std::string blob;
  for (const auto& [k, v] : values_) {  // std::map: already sorted
    blob += k;
    blob += '=';
    blob += v;
    blob += '\n';
  }
  return fnv1a64(blob.data(), blob.size());
}

std::string RunConfig::hash_hex() const { return fmt::format("{:016x}", hash()); }

std::string RunConfig::to_yaml() const {
  // Emit a nested document by hand: keys are sorted (std::map) and values are
  // canonical strings, so the output is byte-stable.
  std::string out;
  std::vector<std::string> open;  // current section path
  for (const auto& [key, value] : values_) {
    auto parts = split(key, '.');
    std::size_t common = 0;
    while (common < open.size() && common + 1 < parts.size() && open[common] == parts[common]) ++common;
    open.resize(common);
    while (open.size() + 1 < parts.size()) {
      out += fmt::format("{:{}}{}:\n", "", 2 * open.size(), parts[open.size()]);
      open.push_back(parts[open.size()]);
    }
    const std::string& leaf = parts.back();
    if (value.empty()) {
      out += fmt::format("{:{}}{}: \"\"\n", "", 2 * open.size(), leaf);
    } else {
      out += fmt::format("{:{}}{}: \"{}\"\n", "", 2 * open.size(), leaf, value);
    }
  }
  return out;
}

}  // namespace gopro
