#pragma once

#include <torch/types.h>

#include <cstdint>
#include <vector>

#include "gopro/backbone.hpp"

namespace gopro {

class RunConfig;

// Channel-wise statistics of the last encoder layer: the style vector
// [mu_L; sigma_L]. sigma uses the population convention with an epsilon
// inside the square root.
struct StyleVector {
  torch::Tensor mu;     // [C_L]
  torch::Tensor sigma;  // [C_L], entries >= 0
};

// Concatenation of position-pooled per-layer features in layer order. The
// optional layer selection (1-based) defaults to all layers.
torch::Tensor content_features(const FeatureStack& stack,
                               const std::vector<std::int64_t>& layers = {});

StyleVector style_features(const FeatureStack& stack, double epsilon = 1e-5);

// Fixed rescaling of [content; mu_L; sigma_L] to the prompt seed width.
// Parameter-free so the only trainable units downstream stay the prompt
// learner and the vision projector.
class FrgLayer {
 public:
  enum class Mode { Seeded, Identity };

  FrgLayer(std::int64_t input_width, std::int64_t seed_width, Mode mode, std::uint64_t seed);

  // content: [W_c] or [N, W_c]; style parts [C_L] or [N, C_L].
  torch::Tensor apply(const torch::Tensor& content, const StyleVector& style) const;

  std::int64_t input_width() const { return input_width_; }
  std::int64_t seed_width() const { return seed_width_; }
  const torch::Tensor& projection() const { return projection_; }

 private:
  std::int64_t input_width_;
  std::int64_t seed_width_;
  torch::Tensor projection_;  // [seed_width, input_width]
};

// Wires the three steps together for one image.
struct PromptSeedExtractor {
  std::vector<std::int64_t> content_layers;  // empty = all
  double std_epsilon = 1e-5;
  std::shared_ptr<FrgLayer> frg;

  torch::Tensor operator()(const FeatureStack& stack) const;
};

// Builds the extractor for a configured backbone; resolves features.d_seed=0
// to the text embedding width.
PromptSeedExtractor make_prompt_seed_extractor(const RunConfig& config,
                                               const VisionBackbone& vision,
                                               const TextBackbone& text);

}  // namespace gopro
