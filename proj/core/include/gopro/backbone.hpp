#pragma once

#include <torch/types.h>

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gopro {

class RunConfig;

// Per-channel constants used to map raw [0,1] images into the encoder's
// expected input distribution.
struct ImageNorm {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.25, 0.25, 0.25};
};

torch::Tensor normalize_image(const torch::Tensor& raw, const ImageNorm& norm);

// Per-layer activations for one image: L maps of shape [C_l, P_l]
// (channels x spatial/token positions) plus the final pooled feature.
struct FeatureStack {
  std::vector<torch::Tensor> per_layer;
  torch::Tensor final_pooled;  // [output_dim]
};

// Frozen vision encoder with L inspectable layers. Implementations expose raw
// per-layer responses; pooling and statistics live in the features module.
// Read-only after construction; encode() is a pure function.
class VisionBackbone {
 public:
  virtual ~VisionBackbone() = default;

  std::int64_t layer_count() const { return static_cast<std::int64_t>(per_layer_dims_.size()); }
  const std::vector<std::int64_t>& per_layer_dims() const { return per_layer_dims_; }
  std::int64_t output_dim() const { return output_dim_; }
  std::int64_t image_size() const { return image_size_; }
  const ImageNorm& norm() const { return norm_; }

  // image: normalized [3, S, S]. Validates the shape, then dispatches.
  FeatureStack encode(const torch::Tensor& image) const;

  virtual std::uint64_t parameter_checksum() const = 0;

 protected:
  virtual FeatureStack do_encode(const torch::Tensor& image) const = 0;

  std::vector<std::int64_t> per_layer_dims_;
  std::int64_t output_dim_ = 0;
  std::int64_t image_size_ = 0;
  ImageNorm norm_;
};

// Frozen text encoder over continuous token-embedding sequences. Learned
// context vectors are injected directly, so the entry point is a sequence of
// vectors rather than token ids. Gradients flow through the input sequence
// even though the encoder's own weights never change.
class TextBackbone {
 public:
  virtual ~TextBackbone() = default;

  std::int64_t context_capacity() const { return context_capacity_; }
  std::int64_t embed_dim() const { return embed_dim_; }
  std::int64_t output_dim() const { return output_dim_; }

  // tokens: [T, E] or batched [N, T, E] with T <= context_capacity.
  // Returns [output_dim] or [N, output_dim]. Over-length input is an error,
  // never a silent truncation.
  torch::Tensor encode(const torch::Tensor& tokens) const;

  // Token embedding row(s) for the class word(s), to be appended after the
  // learned context tokens. Multi-word names produce multiple rows.
  virtual torch::Tensor embed_class_name(const std::string& class_name) const = 0;

  virtual std::uint64_t parameter_checksum() const = 0;

 protected:
  virtual torch::Tensor do_encode(const torch::Tensor& padded) const = 0;  // [N, T_cap, E]

  std::int64_t context_capacity_ = 0;
  std::int64_t embed_dim_ = 0;
  std::int64_t output_dim_ = 0;
};

// Desk-scale frozen encoders with fixed seeded weights: a small conv stack
// for vision and a position-gated MLP readout for text over an orthonormal
// word vocabulary. They exercise every code path without pretrained weights.
class ToyVisionBackbone final : public VisionBackbone {
 public:
  explicit ToyVisionBackbone(std::int64_t image_size, std::vector<std::int64_t> layer_dims,
                             std::uint64_t weight_seed, ImageNorm norm);

  std::uint64_t parameter_checksum() const override;

 protected:
  FeatureStack do_encode(const torch::Tensor& image) const override;

 private:
  std::vector<torch::Tensor> conv_weights_;  // [C_out, C_in, 3, 3]
  torch::Tensor out_weight_;                 // [output_dim, C_L]
};

class ToyTextBackbone final : public TextBackbone {
 public:
  ToyTextBackbone(std::int64_t embed_dim, std::int64_t output_dim,
                  std::int64_t context_capacity, std::uint64_t weight_seed);

  torch::Tensor embed_class_name(const std::string& class_name) const override;
  std::uint64_t parameter_checksum() const override;

  // Orthonormal vocabulary matrix [V, E]; row i is the embedding of any word
  // hashing to i. Exposed for tests.
  const torch::Tensor& vocabulary() const { return vocab_; }
  std::int64_t word_row(const std::string& word) const;

 protected:
  torch::Tensor do_encode(const torch::Tensor& padded) const override;

 private:
  torch::Tensor vocab_;       // [V, E], orthonormal rows
  torch::Tensor pos_gain_;    // [T_cap, E]
  torch::Tensor w1_, b1_;     // [H, E], [H]
  torch::Tensor w2_, b2_;     // [out, H], [out]
};

struct BackbonePair {
  std::shared_ptr<VisionBackbone> vision;
  std::shared_ptr<TextBackbone> text;
};

// Builds the configured frozen dual encoder (`backbone.kind`: toy | adapter).
BackbonePair make_backbones(const RunConfig& config);

}  // namespace gopro
