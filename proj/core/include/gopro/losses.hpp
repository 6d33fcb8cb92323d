#pragma once

#include <torch/types.h>

#include <cstdint>

namespace gopro {

// Per-step record of the three objectives and their sum. Term flags say
// which losses actually contributed gradient this step (the ablation grid
// toggles them independently).
struct LossReport {
  double l_con = 0.0;
  double l_ce = 0.0;
  double l_sem = 0.0;
  double l_total = 0.0;
  bool con_enabled = false;
  bool ce_enabled = false;
  bool sem_enabled = false;
  std::int64_t batch_size = 0;
  double temperature = 0.0;
};

// Class posterior for a batch: cosine similarities over temperature, then
// softmax across the class axis. Rows sum to one.
struct Posterior {
  torch::Tensor logits;  // [N, K]
  torch::Tensor probs;   // [N, K]
};

// Symmetric NT-Xent over the 2B views. Positives are the (i, i) pairs across
// views; every other sample in either view is a negative. Embeddings are
// L2-normalized internally, so the loss is invariant to input scale.
torch::Tensor nt_xent(const torch::Tensor& z_x, const torch::Tensor& z_x1, double temperature);

// prompt_embeds: [K, D] shared across the batch or [N, K, D] per image.
Posterior class_posterior(const torch::Tensor& z_img, const torch::Tensor& prompt_embeds,
                          double temperature);

// Mean negative log-likelihood over the batch, computed from logits for
// numerical stability. Labels must lie inside the seen label set.
torch::Tensor cross_entropy_loss(const Posterior& posterior, const torch::Tensor& labels);

// Teacher-student prompt consistency: L2 distances from the original-image
// prompt embeddings (teacher, detached) to each augmented branch, averaged
// over batch and classes. Pass an undefined tensor to drop a branch.
torch::Tensor prompt_consistency_loss(const torch::Tensor& e_x, const torch::Tensor& e_x1,
                                      const torch::Tensor& e_x2);

struct LossTerms {
  torch::Tensor con;  // undefined when disabled
  torch::Tensor ce;
  torch::Tensor sem;
};

// Unweighted sum of the enabled terms. Non-finite values are a hard error
// with a per-term diagnostic. Returns the scalar for backward plus the
// report for logging.
struct TotalLoss {
  torch::Tensor value;
  LossReport report;
};
TotalLoss total_loss(const LossTerms& terms, std::int64_t batch_size, double temperature);

}  // namespace gopro
