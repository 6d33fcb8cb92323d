#include "gopro/features.hpp"

#include <fmt/format.h>

#include <ATen/ATen.h>

#include "gopro/config.hpp"
#include "gopro/errors.hpp"
#include "gopro/rng.hpp"
#include "gopro/tensor_util.hpp"

namespace gopro {

torch::Tensor content_features(const FeatureStack& stack,
                               const std::vector<std::int64_t>& layers) {
  if (stack.per_layer.empty()) throw ConfigError("feature stack has no layers");
  const auto layer_count = static_cast<std::int64_t>(stack.per_layer.size());
  std::vector<torch::Tensor> pooled;
  if (layers.empty()) {
    for (const auto& map : stack.per_layer) pooled.push_back(map.mean(1));
  } else {
    for (auto one_based : layers) {
      if (one_based < 1 || one_based > layer_count) {
        throw ConfigError(fmt::format("content layer {} outside 1..{}", one_based, layer_count));
      }
      pooled.push_back(stack.per_layer[one_based - 1].mean(1));
    }
  }
  return at::cat(pooled, 0);
}

StyleVector style_features(const FeatureStack& stack, double epsilon) {
  if (stack.per_layer.empty()) throw ConfigError("feature stack has no layers");
  const auto& last = stack.per_layer.back();  // [C_L, P]
  if (last.size(1) < 2) {
    throw NumericError(fmt::format(
        "style statistics need at least 2 positions in the last layer, got {}", last.size(1)));
  }
  StyleVector style;
  style.mu = last.mean(1);
  auto var = (last - style.mu.unsqueeze(1)).pow(2).mean(1);  // population convention
  style.sigma = at::sqrt(var + epsilon);
  return style;
}

FrgLayer::FrgLayer(std::int64_t input_width, std::int64_t seed_width, Mode mode,
                   std::uint64_t seed)
    : input_width_(input_width), seed_width_(seed_width) {
  if (input_width < 1 || seed_width < 1) throw ConfigError("rescale widths must be positive");
  if (mode == Mode::Identity) {
    if (input_width != seed_width) {
      throw ConfigError(fmt::format(
          "identity rescale needs matching widths, got input {} vs seed {}", input_width,
          seed_width));
    }
    projection_ = at::eye(input_width);
  } else {
    projection_ = seeded_normal({seed_width, input_width}, seed, 0.0,
                                1.0 / std::sqrt(static_cast<double>(input_width)));
  }
}

torch::Tensor FrgLayer::apply(const torch::Tensor& content, const StyleVector& style) const {
  const bool batched = content.dim() == 2;
  auto cat_dim = batched ? 1 : 0;
  auto joined = at::cat({content, style.mu, style.sigma}, cat_dim);
  if (joined.size(-1) != input_width_) {
    throw ConfigError(fmt::format("rescale input width {} does not match configured {}",
                                  joined.size(-1), input_width_));
  }
  return at::matmul(joined, projection_.t());
}

torch::Tensor PromptSeedExtractor::operator()(const FeatureStack& stack) const {
  auto content = content_features(stack, content_layers);
  auto style = style_features(stack, std_epsilon);
  return frg->apply(content, style);
}

PromptSeedExtractor make_prompt_seed_extractor(const RunConfig& config,
                                               const VisionBackbone& vision,
                                               const TextBackbone& text) {
  PromptSeedExtractor ex;
  const std::string& layer_sel = config.get_str("features.content_layers");
  std::int64_t content_width = 0;
  if (layer_sel == "all") {
    for (auto d : vision.per_layer_dims()) content_width += d;
  } else {
    ex.content_layers = config.get_int_list("features.content_layers");
    if (ex.content_layers.empty()) {
      throw ConfigError("features.content_layers must be 'all' or a non-empty layer list");
    }
    for (auto one_based : ex.content_layers) {
      if (one_based < 1 || one_based > vision.layer_count()) {
        throw ConfigError(fmt::format("features.content_layers entry {} outside 1..{}", one_based,
                                      vision.layer_count()));
      }
      content_width += vision.per_layer_dims()[one_based - 1];
    }
  }
  ex.std_epsilon = config.get_double("features.std_epsilon");

  std::int64_t d_seed = config.get_int("features.d_seed");
  if (d_seed == 0) d_seed = text.embed_dim();
  const std::int64_t input_width = content_width + 2 * vision.per_layer_dims().back();
  const auto mode = config.get_str("features.frg_mode") == "identity" ? FrgLayer::Mode::Identity
                                                                      : FrgLayer::Mode::Seeded;
  const auto seed = split_seed(static_cast<std::uint64_t>(config.get_int("seed")), {0xf26});
  ex.frg = std::make_shared<FrgLayer>(input_width, d_seed, mode, seed);
  return ex;
}

}  // namespace gopro
