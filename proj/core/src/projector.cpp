#include "gopro/projector.hpp"

#include <fmt/format.h>

#include <ATen/ATen.h>

#include <cmath>
#include <cstdio>

#include "gopro/errors.hpp"
#include "gopro/rng.hpp"
#include "gopro/tensor_util.hpp"

namespace gopro {

VisionProjector::VisionProjector(Options opts) : opts_(opts) {
  if (opts_.input_dim < 1 || opts_.d_joint < 1) {
    throw ConfigError("projector widths must be positive");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(opts_.input_dim));
  weight_ = seeded_normal({opts_.d_joint, opts_.input_dim}, split_seed(opts_.seed, {0}), 0.0, scale);
  bias_ = at::zeros({opts_.d_joint});
  gamma_ = at::ones({opts_.d_joint});
  beta_ = at::zeros({opts_.d_joint});
  running_mean_ = at::zeros({opts_.d_joint});
  running_var_ = at::ones({opts_.d_joint});
  batches_tracked_ = at::zeros({}, at::kLong);
  for (auto* t : {&weight_, &bias_, &gamma_, &beta_}) t->set_requires_grad(true);
}

torch::Tensor VisionProjector::forward(const torch::Tensor& x, bool train_mode) {
  const bool batched = x.dim() == 2;
  auto in = batched ? x : x.unsqueeze(0);
  if (in.size(1) != opts_.input_dim) {
    throw ConfigError(fmt::format("projector expects width {}, got {}", opts_.input_dim,
                                  in.size(1)));
  }
  auto z = at::linear(in, weight_, bias_);

  torch::Tensor out;
  if (train_mode) {
    if (in.size(0) < 2) {
      throw NumericError("train-mode normalization needs a batch of at least 2");
    }
    auto mean = z.mean(0);
    auto var = z.var(0, /*unbiased=*/false);
    out = (z - mean) * at::rsqrt(var + opts_.bn_epsilon) * gamma_ + beta_;
    {
      at::NoGradGuard no_grad;
      const double m = opts_.bn_momentum;
      const auto n = static_cast<double>(in.size(0));
      auto var_unbiased = var.detach() * (n / (n - 1.0));
      running_mean_.mul_(1 - m).add_(mean.detach(), m);
      running_var_.mul_(1 - m).add_(var_unbiased, m);
      batches_tracked_ += 1;
    }
  } else {
    if (batches_tracked_.item<std::int64_t>() == 0 && !warned_cold_eval_) {
      std::fprintf(stderr,
                   "[gopro] warning: projector evaluated before any training batch; "
                   "using identity normalization statistics\n");
      warned_cold_eval_ = true;
    }
    out = (z - running_mean_) * at::rsqrt(running_var_ + opts_.bn_epsilon) * gamma_ + beta_;
  }
  return batched ? out : out.squeeze(0);
}

std::vector<torch::Tensor> VisionProjector::parameters() const {
  return {weight_, bias_, gamma_, beta_};
}

std::vector<std::pair<std::string, torch::Tensor>> VisionProjector::named_parameters() const {
  return {{"pv.weight", weight_}, {"pv.bias", bias_}, {"pv.gamma", gamma_}, {"pv.beta", beta_}};
}

std::vector<std::pair<std::string, torch::Tensor>> VisionProjector::named_buffers() const {
  return {{"pv.running_mean", running_mean_},
          {"pv.running_var", running_var_},
          {"pv.batches_tracked", batches_tracked_}};
}

std::uint64_t VisionProjector::parameter_checksum() const {
  return tensor_checksum({weight_, bias_, gamma_, beta_, running_mean_, running_var_});
}

}  // namespace gopro
