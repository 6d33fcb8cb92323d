#include "gopro/losses.hpp"

#include <fmt/format.h>

#include <ATen/ATen.h>

#include <cmath>

#include "gopro/errors.hpp"

namespace gopro {

namespace {

constexpr double kNormFloor = 1e-12;

torch::Tensor l2_normalize_checked(const torch::Tensor& v, const char* what) {
  auto norms = v.norm(2, -1, /*keepdim=*/true);
  if (norms.min().item<double>() < kNormFloor) {
    throw NumericError(fmt::format("{} contains a zero-norm embedding", what));
  }
  return v / norms;
}

}  // namespace

torch::Tensor nt_xent(const torch::Tensor& z_x, const torch::Tensor& z_x1, double temperature) {
  if (z_x.dim() != 2 || z_x1.dim() != 2 || z_x.sizes() != z_x1.sizes()) {
    throw ConfigError("nt_xent expects two equally shaped [B, D] batches");
  }
  const auto b = z_x.size(0);
  if (b < 2) {
    throw ConfigError(fmt::format("nt_xent needs a batch of at least 2, got {} (no negatives)", b));
  }
  if (temperature <= 0) throw ConfigError("temperature must be positive");

  auto z = at::cat({z_x, z_x1}, 0);  // [2B, D]
  z = l2_normalize_checked(z, "nt_xent input");
  auto sim = at::matmul(z, z.t()) / temperature;  // [2B, 2B]
  // Anchors never pair with themselves.
  sim.fill_diagonal_(-std::numeric_limits<float>::infinity());

  auto pos_index = at::cat({at::arange(b, 2 * b), at::arange(0, b)}, 0);  // partner view
  auto log_probs = at::log_softmax(sim, 1);
  auto pos_logp = log_probs.gather(1, pos_index.unsqueeze(1)).squeeze(1);
  return -pos_logp.mean();
}

Posterior class_posterior(const torch::Tensor& z_img, const torch::Tensor& prompt_embeds,
                          double temperature) {
  if (temperature <= 0) throw ConfigError("temperature must be positive");
  const bool batched = z_img.dim() == 2;
  auto z = batched ? z_img : z_img.unsqueeze(0);  // [N, D]

  torch::Tensor prompts;  // [N, K, D]
  if (prompt_embeds.dim() == 2) {
    prompts = prompt_embeds.unsqueeze(0).expand({z.size(0), prompt_embeds.size(0),
                                                 prompt_embeds.size(1)});
  } else if (prompt_embeds.dim() == 3) {
    prompts = prompt_embeds;
  } else {
    throw ConfigError("prompt embeddings must be [K, D] or [N, K, D]");
  }
  if (prompts.size(1) < 2) {
    throw ConfigError(fmt::format("posterior needs at least 2 classes, got {}", prompts.size(1)));
  }
  if (prompts.size(2) != z.size(1)) {
    throw ConfigError(fmt::format("image width {} vs prompt width {}", z.size(1), prompts.size(2)));
  }

  auto zn = l2_normalize_checked(z, "image embeddings");
  auto pn = l2_normalize_checked(prompts, "prompt embeddings");
  auto cosine = at::einsum("nd,nkd->nk", {zn, pn});

  Posterior post;
  post.logits = cosine / temperature;
  post.probs = at::softmax(post.logits, 1);
  if (!batched) {
    post.logits = post.logits.squeeze(0);
    post.probs = post.probs.squeeze(0);
  }
  return post;
}

torch::Tensor cross_entropy_loss(const Posterior& posterior, const torch::Tensor& labels) {
  auto logits = posterior.logits.dim() == 1 ? posterior.logits.unsqueeze(0) : posterior.logits;
  auto lab = labels.dim() == 0 ? labels.unsqueeze(0) : labels;
  if (lab.size(0) != logits.size(0)) {
    throw ConfigError(fmt::format("{} labels for {} posterior rows", lab.size(0), logits.size(0)));
  }
  const auto k = logits.size(1);
  const auto lab_min = lab.min().item<std::int64_t>();
  const auto lab_max = lab.max().item<std::int64_t>();
  if (lab_min < 0 || lab_max >= k) {
    throw ProtocolError(fmt::format(
        "label {} outside the seen label set of {} classes", lab_min < 0 ? lab_min : lab_max, k));
  }
  auto logp = at::log_softmax(logits, 1);
  return -logp.gather(1, lab.unsqueeze(1)).squeeze(1).mean();
}

torch::Tensor prompt_consistency_loss(const torch::Tensor& e_x, const torch::Tensor& e_x1,
                                      const torch::Tensor& e_x2) {
  if (!e_x.defined()) throw ConfigError("consistency loss requires teacher embeddings");
  if (!e_x1.defined() && !e_x2.defined()) {
    throw ConfigError("consistency loss requires at least one augmented branch");
  }
  auto teacher = e_x.detach();  // the original image supervises, it is not supervised

  auto branch_term = [&](const torch::Tensor& student) -> torch::Tensor {
    if (student.sizes() != teacher.sizes()) {
      throw ConfigError(fmt::format("consistency branch shape [{}] vs teacher [{}]",
                                    fmt::join(student.sizes().vec(), ", "),
                                    fmt::join(teacher.sizes().vec(), ", ")));
    }
    return (teacher - student).norm(2, -1);  // per (sample, class) distance
  };

  torch::Tensor acc;
  if (e_x1.defined()) acc = branch_term(e_x1);
  if (e_x2.defined()) {
    auto t2 = branch_term(e_x2);
    acc = acc.defined() ? acc + t2 : t2;
  }
  return acc.mean();
}

TotalLoss total_loss(const LossTerms& terms, std::int64_t batch_size, double temperature) {
  if (!terms.con.defined() && !terms.ce.defined() && !terms.sem.defined()) {
    throw ConfigError("all loss terms disabled; nothing to optimize");
  }
  TotalLoss out;
  out.report.batch_size = batch_size;
  out.report.temperature = temperature;

  auto add_term = [&](const torch::Tensor& t, const char* name, double& slot, bool& flag) {
    if (!t.defined()) return;
    const double v = t.item<double>();
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format(
          "non-finite loss term {} = {} (con={}, ce={}, sem={})", name, v,
          terms.con.defined() ? terms.con.item<double>() : 0.0,
          terms.ce.defined() ? terms.ce.item<double>() : 0.0,
          terms.sem.defined() ? terms.sem.item<double>() : 0.0));
    }
    slot = v;
    flag = true;
    out.value = out.value.defined() ? out.value + t : t;
  };

  add_term(terms.con, "l_con", out.report.l_con, out.report.con_enabled);
  add_term(terms.ce, "l_ce", out.report.l_ce, out.report.ce_enabled);
  add_term(terms.sem, "l_sem", out.report.l_sem, out.report.sem_enabled);
  out.report.l_total = out.value.item<double>();
  return out;
}

}  // namespace gopro
