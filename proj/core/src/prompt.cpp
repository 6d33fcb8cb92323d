#include "gopro/prompt.hpp"

#include <fmt/format.h>

#include <ATen/ATen.h>

#include <cmath>

#include "gopro/config.hpp"
#include "gopro/errors.hpp"
#include "gopro/rng.hpp"
#include "gopro/tensor_util.hpp"

namespace gopro {

PromptInit prompt_init_from_string(const std::string& s) {
  if (s == "manual") return PromptInit::Manual;
  if (s == "random") return PromptInit::Random;
  if (s == "none") return PromptInit::None;
  throw ConfigError(fmt::format("unknown prompt init strategy '{}'", s));
}

MetaNetwork::MetaNetwork(Options opts) : opts_(std::move(opts)) {
  if (opts_.context_length < 1) {
    throw ConfigError(fmt::format("context length must be >= 1, got {}", opts_.context_length));
  }
  if (opts_.d_seed < 1 || opts_.embed_dim < 1) {
    throw ConfigError("meta-network widths must be positive");
  }
  if (opts_.hidden_width == 0) opts_.hidden_width = std::max<std::int64_t>(16, opts_.d_seed / 16);
  if (opts_.ctx_base_width == 0) opts_.ctx_base_width = opts_.embed_dim;

  const auto s = opts_.seed;
  const double enc1_scale = 1.0 / std::sqrt(static_cast<double>(opts_.d_seed));
  const double enc2_scale = 1.0 / std::sqrt(static_cast<double>(opts_.hidden_width));
  enc_w1_ = seeded_normal({opts_.hidden_width, opts_.d_seed}, split_seed(s, {0}), 0.0, enc1_scale);
  enc_b1_ = at::zeros({opts_.hidden_width});
  enc_w2_ = seeded_normal({opts_.ctx_base_width, opts_.hidden_width}, split_seed(s, {1}), 0.0,
                          enc2_scale);
  enc_b2_ = at::zeros({opts_.ctx_base_width});

  const auto m = opts_.context_length;
  const auto e = opts_.embed_dim;
  switch (opts_.init) {
    case PromptInit::Manual: {
      // Token at step 0 equals the template embedding exactly: decoder
      // weights start at zero and the template lives in the biases. The
      // first optimizer step makes the decoders image-conditioned.
      if (!opts_.template_tokens.defined() || opts_.template_tokens.size(0) != m ||
          opts_.template_tokens.size(1) != e) {
        throw ConfigError("manual init requires template tokens of shape [M, embed_dim]");
      }
      dec_w_ = at::zeros({m, e, opts_.ctx_base_width});
      dec_b_ = opts_.template_tokens.clone();
      break;
    }
    case PromptInit::Random: {
      const double dec_scale = 1.0 / std::sqrt(static_cast<double>(opts_.ctx_base_width));
      dec_w_ = seeded_normal({m, e, opts_.ctx_base_width}, split_seed(s, {2}), 0.0, dec_scale);
      dec_b_ = seeded_normal({m, e}, split_seed(s, {3}), 0.0, 0.02);
      break;
    }
    case PromptInit::None: {
      dec_w_ = at::zeros({m, e, opts_.ctx_base_width});
      dec_b_ = at::zeros({m, e});
      break;
    }
  }
  for (auto* t : {&enc_w1_, &enc_b1_, &enc_w2_, &enc_b2_, &dec_w_, &dec_b_}) {
    t->set_requires_grad(true);
  }
}

torch::Tensor MetaNetwork::generate(const torch::Tensor& seed) const {
  const bool batched = seed.dim() == 2;
  auto x = batched ? seed : seed.unsqueeze(0);
  if (x.size(1) != opts_.d_seed) {
    throw ConfigError(
        fmt::format("prompt seed width {} does not match d_seed {}", x.size(1), opts_.d_seed));
  }
  auto h = at::relu(at::linear(x, enc_w1_, enc_b1_));
  auto base = at::linear(h, enc_w2_, enc_b2_);            // [N, C_b]
  auto tokens = at::einsum("nc,mec->nme", {base, dec_w_})  // M parallel affine heads
                + dec_b_.unsqueeze(0);
  return batched ? tokens : tokens.squeeze(0);
}

std::vector<torch::Tensor> MetaNetwork::parameters() const {
  return {enc_w1_, enc_b1_, enc_w2_, enc_b2_, dec_w_, dec_b_};
}

std::vector<std::pair<std::string, torch::Tensor>> MetaNetwork::named_parameters() const {
  return {{"rho.enc_w1", enc_w1_}, {"rho.enc_b1", enc_b1_}, {"rho.enc_w2", enc_w2_},
          {"rho.enc_b2", enc_b2_}, {"rho.dec_w", dec_w_},   {"rho.dec_b", dec_b_}};
}

std::uint64_t MetaNetwork::parameter_checksum() const { return tensor_checksum(parameters()); }

torch::Tensor PromptBundle::tokens() const { return at::cat({context, class_tokens}, 0); }

PromptBundle assemble_prompt(const torch::Tensor& context_tokens,
                             const torch::Tensor& class_tokens, std::int64_t class_id,
                             std::int64_t context_capacity) {
  if (context_tokens.dim() != 2 || context_tokens.size(0) < 1) {
    throw ConfigError("prompt needs at least one context token");
  }
  if (class_tokens.dim() != 2 || class_tokens.size(0) < 1) {
    throw ConfigError("prompt needs at least one class token");
  }
  if (context_tokens.size(1) != class_tokens.size(1)) {
    throw ConfigError(fmt::format("context width {} vs class token width {}",
                                  context_tokens.size(1), class_tokens.size(1)));
  }
  const auto total = context_tokens.size(0) + class_tokens.size(0);
  if (total > context_capacity) {
    throw ConfigError(fmt::format("prompt of {} tokens exceeds context capacity {}", total,
                                  context_capacity));
  }
  return PromptBundle{context_tokens, class_tokens, class_id};
}

torch::Tensor prompt_embedding(const TextBackbone& text, const PromptBundle& bundle) {
  return text.encode(bundle.tokens());
}

torch::Tensor class_prompt_embeddings(const TextBackbone& text, const torch::Tensor& contexts,
                                      const std::vector<torch::Tensor>& class_tokens) {
  if (contexts.dim() != 3) throw ConfigError("contexts must be [N, M, E]");
  const auto n = contexts.size(0);
  const auto m = contexts.size(1);
  const auto e = contexts.size(2);
  const auto k = static_cast<std::int64_t>(class_tokens.size());
  if (k == 0) throw ConfigError("class set must be non-empty");

  std::int64_t max_cls = 0;
  for (const auto& ct : class_tokens) max_cls = std::max(max_cls, ct.size(0));
  const auto t = m + max_cls;
  if (t > text.context_capacity()) {
    throw ConfigError(fmt::format("prompt of {} tokens exceeds context capacity {}", t,
                                  text.context_capacity()));
  }

  // [N*K, M + max_cls, E]; short class names are zero-padded, matching the
  // encoder's own padding.
  std::vector<torch::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(k));
  for (const auto& ct : class_tokens) {
    auto padded = ct;
    if (ct.size(0) < max_cls) {
      padded = at::cat({ct, at::zeros({max_cls - ct.size(0), e}, ct.options())}, 0);
    }
    rows.push_back(padded);
  }
  auto cls = at::stack(rows, 0);                                    // [K, max_cls, E]
  auto ctx_rep = contexts.unsqueeze(1).expand({n, k, m, e});        // [N, K, M, E]
  auto cls_rep = cls.unsqueeze(0).expand({n, k, max_cls, e});       // [N, K, max_cls, E]
  auto seq = at::cat({ctx_rep, cls_rep}, 2).reshape({n * k, t, e});  // [N*K, T, E]
  return text.encode(seq).reshape({n, k, -1});
}

torch::Tensor template_tokens_for(const TextBackbone& text, const std::string& template_words,
                                  std::int64_t context_length) {
  auto tokens = text.embed_class_name(template_words);  // reuse the word tokenizer
  if (tokens.size(0) != context_length) {
    throw ConfigError(fmt::format(
        "manual init template '{}' has {} tokens but rho.context_length is {}; "
        "use rho.init=random for other context lengths",
        template_words, tokens.size(0), context_length));
  }
  return tokens;
}

}  // namespace gopro
