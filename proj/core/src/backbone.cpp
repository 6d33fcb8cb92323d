#include "gopro/backbone.hpp"

#include <fmt/format.h>

#include <ATen/ATen.h>

#include <cctype>

#include "gopro/config.hpp"
#include "gopro/errors.hpp"
#include "gopro/rng.hpp"
#include "gopro/tensor_util.hpp"

namespace gopro {

torch::Tensor normalize_image(const torch::Tensor& raw, const ImageNorm& norm) {
  if (raw.dim() != 3 || raw.size(0) != 3) {
    throw ConfigError(fmt::format("normalize_image expects [3, H, W], got {}",
                                  fmt::join(raw.sizes().vec(), "x")));
  }
  auto mean = at::tensor({norm.mean[0], norm.mean[1], norm.mean[2]}, raw.options()).view({3, 1, 1});
  auto std = at::tensor({norm.std[0], norm.std[1], norm.std[2]}, raw.options()).view({3, 1, 1});
  return (raw - mean) / std;
}

FeatureStack VisionBackbone::encode(const torch::Tensor& image) const {
  if (image.dim() != 3 || image.size(0) != 3 || image.size(1) != image_size_ ||
      image.size(2) != image_size_) {
    throw ConfigError(fmt::format(
        "vision backbone expects a [3, {}, {}] image, got [{}]", image_size_, image_size_,
        fmt::join(image.sizes().vec(), ", ")));
  }
  return do_encode(image);
}

torch::Tensor TextBackbone::encode(const torch::Tensor& tokens) const {
  const bool batched = tokens.dim() == 3;
  if (!batched && tokens.dim() != 2) {
    throw ConfigError(fmt::format("text backbone expects [T, E] or [N, T, E], got [{}]",
                                  fmt::join(tokens.sizes().vec(), ", ")));
  }
  auto seq = batched ? tokens : tokens.unsqueeze(0);
  const std::int64_t t = seq.size(1);
  if (seq.size(2) != embed_dim_) {
    throw ConfigError(fmt::format("token width {} does not match embed_dim {}", seq.size(2), embed_dim_));
  }
  if (t > context_capacity_) {
    throw ConfigError(fmt::format(
        "prompt of {} tokens exceeds the context capacity of {}; refusing to truncate", t,
        context_capacity_));
  }
  torch::Tensor padded = seq;
  if (t < context_capacity_) {
    auto pad = at::zeros({seq.size(0), context_capacity_ - t, embed_dim_}, seq.options());
    padded = at::cat({seq, pad}, 1);
  }
  auto out = do_encode(padded);
  return batched ? out : out.squeeze(0);
}

// ---------------------------------------------------------------------------
// toy vision encoder: conv(k3, s2) + tanh per layer, fixed seeded weights
// ---------------------------------------------------------------------------

ToyVisionBackbone::ToyVisionBackbone(std::int64_t image_size,
                                     std::vector<std::int64_t> layer_dims,
                                     std::uint64_t weight_seed, ImageNorm norm) {
  if (layer_dims.empty()) throw ConfigError("toy vision backbone needs at least one layer");
  if (image_size < (1 << layer_dims.size())) {
    throw ConfigError(fmt::format("image size {} too small for {} stride-2 layers", image_size,
                                  layer_dims.size()));
  }
  image_size_ = image_size;
  per_layer_dims_ = std::move(layer_dims);
  output_dim_ = per_layer_dims_.back();
  norm_ = norm;

  std::int64_t c_in = 3;
  for (std::size_t l = 0; l < per_layer_dims_.size(); ++l) {
    const std::int64_t c_out = per_layer_dims_[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(c_in * 9));
    conv_weights_.push_back(
        seeded_normal({c_out, c_in, 3, 3}, split_seed(weight_seed, {0, l}), 0.0, scale));
    c_in = c_out;
  }
  out_weight_ = seeded_normal({output_dim_, per_layer_dims_.back()},
                              split_seed(weight_seed, {1}), 0.0,
                              1.0 / std::sqrt(static_cast<double>(per_layer_dims_.back())));
}

FeatureStack ToyVisionBackbone::do_encode(const torch::Tensor& image) const {
  at::NoGradGuard no_grad;  // frozen; nothing upstream of the stack needs grads
  FeatureStack stack;
  auto h = image.unsqueeze(0).to(at::kFloat);
  for (const auto& w : conv_weights_) {
    h = at::tanh(at::conv2d(h, w, /*bias=*/{}, /*stride=*/2, /*padding=*/1));
    stack.per_layer.push_back(h.squeeze(0).flatten(1));  // [C_l, P_l]
  }
  auto pooled = stack.per_layer.back().mean(1);  // [C_L]
  stack.final_pooled = at::tanh(at::matmul(out_weight_, pooled));
  return stack;
}

std::uint64_t ToyVisionBackbone::parameter_checksum() const {
  auto params = conv_weights_;
  params.push_back(out_weight_);
  return tensor_checksum(params);
}

// ---------------------------------------------------------------------------
// toy text encoder: orthonormal word vocabulary, per-position gains, MLP head
// ---------------------------------------------------------------------------

namespace {

// Rows of Q from the QR decomposition of a seeded square matrix, signs fixed
// so the result is canonical.
torch::Tensor orthonormal_rows(std::int64_t n, std::uint64_t seed) {
  auto a = seeded_normal({n, n}, seed).to(at::kDouble);
  auto [q, r] = at::linalg_qr(a);
  auto sign = at::sign(at::diagonal(r));
  q = q * sign.unsqueeze(0);
  return q.t().contiguous().to(at::kFloat);  // rows orthonormal
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || raw == '_' || raw == '-') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

}  // namespace

ToyTextBackbone::ToyTextBackbone(std::int64_t embed_dim, std::int64_t output_dim,
                                 std::int64_t context_capacity, std::uint64_t weight_seed) {
  if (embed_dim < 2 || output_dim < 2 || context_capacity < 2) {
    throw ConfigError("toy text backbone dimensions must be at least 2");
  }
  embed_dim_ = embed_dim;
  output_dim_ = output_dim;
  context_capacity_ = context_capacity;

  vocab_ = orthonormal_rows(embed_dim, split_seed(weight_seed, {10}));
  pos_gain_ = seeded_normal({context_capacity, embed_dim}, split_seed(weight_seed, {11}), 1.0, 0.5);
  const std::int64_t hidden = 2 * embed_dim;
  w1_ = seeded_normal({hidden, embed_dim}, split_seed(weight_seed, {12}), 0.0,
                      1.0 / std::sqrt(static_cast<double>(embed_dim)));
  b1_ = seeded_normal({hidden}, split_seed(weight_seed, {13}), 0.0, 0.5);
  w2_ = seeded_normal({output_dim, hidden}, split_seed(weight_seed, {14}), 0.0,
                      1.0 / std::sqrt(static_cast<double>(hidden)));
  b2_ = seeded_normal({output_dim}, split_seed(weight_seed, {15}), 0.0, 0.5);
}

std::int64_t ToyTextBackbone::word_row(const std::string& word) const {
  const std::uint64_t h = fnv1a64(word.data(), word.size());
  return static_cast<std::int64_t>(h % static_cast<std::uint64_t>(vocab_.size(0)));
}

torch::Tensor ToyTextBackbone::embed_class_name(const std::string& class_name) const {
  const auto words = tokenize_words(class_name);
  if (words.empty()) {
    throw ConfigError(fmt::format("class name '{}' has no tokens", class_name));
  }
  std::vector<torch::Tensor> rows;
  rows.reserve(words.size());
  for (const auto& w : words) rows.push_back(vocab_[word_row(w)]);
  return at::stack(rows, 0);  // [T_y, E]
}

torch::Tensor ToyTextBackbone::do_encode(const torch::Tensor& padded) const {
  // padded: [N, T_cap, E]; gains make the readout order-sensitive.
  auto gated = padded * pos_gain_.unsqueeze(0);
  auto h = gated.mean(1);  // [N, E]
  auto a1 = at::tanh(at::linear(h, w1_, b1_));
  return at::linear(a1, w2_, b2_);
}

std::uint64_t ToyTextBackbone::parameter_checksum() const {
  return tensor_checksum({vocab_, pos_gain_, w1_, b1_, w2_, b2_});
}

// ---------------------------------------------------------------------------

namespace {

ImageNorm norm_from_config(const RunConfig& cfg, const std::string& prefix) {
  auto mean = cfg.get_double_list(prefix + ".norm_mean");
  auto std = cfg.get_double_list(prefix + ".norm_std");
  if (mean.size() != 3 || std.size() != 3) {
    throw ConfigError(fmt::format("{}.norm_mean/std must have 3 entries", prefix));
  }
  ImageNorm n;
  for (int c = 0; c < 3; ++c) {
    if (std[c] <= 0) throw ConfigError(fmt::format("{}.norm_std entries must be positive", prefix));
    n.mean[c] = mean[c];
    n.std[c] = std[c];
  }
  return n;
}

}  // namespace

BackbonePair make_toy_backbones(const RunConfig& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("backbone.toy.weight_seed"));
  auto vision = std::make_shared<ToyVisionBackbone>(
      cfg.get_int("backbone.toy.image_size"), cfg.get_int_list("backbone.toy.layer_dims"),
      split_seed(seed, {1}), norm_from_config(cfg, "backbone.toy"));
  auto text = std::make_shared<ToyTextBackbone>(
      cfg.get_int("backbone.toy.text_embed_dim"), cfg.get_int("backbone.toy.text_output_dim"),
      cfg.get_int("backbone.toy.context_capacity"), split_seed(seed, {2}));
  return {std::move(vision), std::move(text)};
}

BackbonePair make_adapter_backbones(const RunConfig& cfg);  // adapter.cpp

BackbonePair make_backbones(const RunConfig& config) {
  const std::string& kind = config.get_str("backbone.kind");
  if (kind == "toy") return make_toy_backbones(config);
  return make_adapter_backbones(config);
}

}  // namespace gopro
