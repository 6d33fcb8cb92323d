#pragma once

#include <torch/types.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gopro/backbone.hpp"

namespace gopro {

enum class PromptInit { Manual, Random, None };

PromptInit prompt_init_from_string(const std::string& s);

// The shared meta-network rho: a Linear-ReLU-Linear bottleneck encoder from
// the prompt seed, followed by M parallel affine decoders, one per context
// token. A single parameter set serves all augmentation branches.
class MetaNetwork {
 public:
  struct Options {
    std::int64_t d_seed = 0;
    std::int64_t embed_dim = 0;
    std::int64_t context_length = 4;
    std::int64_t hidden_width = 0;    // 0 = max(16, d_seed / 16)
    std::int64_t ctx_base_width = 0;  // 0 = embed_dim
    PromptInit init = PromptInit::Manual;
    torch::Tensor template_tokens;  // [M, E] required for Manual
    std::uint64_t seed = 77;
  };

  explicit MetaNetwork(Options opts);

  // seed: [d_seed] -> [M, E], or [N, d_seed] -> [N, M, E].
  torch::Tensor generate(const torch::Tensor& seed) const;

  std::int64_t context_length() const { return opts_.context_length; }
  std::int64_t embed_dim() const { return opts_.embed_dim; }

  std::vector<torch::Tensor> parameters() const;
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
  std::uint64_t parameter_checksum() const;

 private:
  Options opts_;
  torch::Tensor enc_w1_, enc_b1_;  // [H, d_seed], [H]
  torch::Tensor enc_w2_, enc_b2_;  // [C_b, H], [C_b]
  torch::Tensor dec_w_;            // [M, E, C_b] — slice m is the m-th decoder
  torch::Tensor dec_b_;            // [M, E]
};

// One assembled prompt: M context tokens then the class token(s), class last.
struct PromptBundle {
  torch::Tensor context;       // [M, E]
  torch::Tensor class_tokens;  // [T_y, E]
  std::int64_t class_id = -1;

  torch::Tensor tokens() const;  // [M + T_y, E]
};

PromptBundle assemble_prompt(const torch::Tensor& context_tokens,
                             const torch::Tensor& class_tokens, std::int64_t class_id,
                             std::int64_t context_capacity);

torch::Tensor prompt_embedding(const TextBackbone& text, const PromptBundle& bundle);

// Batched prompt embeddings for a set of classes: contexts [N, M, E] and one
// class-token sequence per class -> [N, K, D]. Context tokens are conditioned
// on the image, so every class shares the same context per sample.
torch::Tensor class_prompt_embeddings(const TextBackbone& text, const torch::Tensor& contexts,
                                      const std::vector<torch::Tensor>& class_tokens);

// Template word embeddings for manual initialization; errors if the word
// count does not match the requested context length.
torch::Tensor template_tokens_for(const TextBackbone& text, const std::string& template_words,
                                  std::int64_t context_length);

}  // namespace gopro
