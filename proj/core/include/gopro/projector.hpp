#pragma once

#include <torch/types.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gopro {

// The vision projector P_v: one affine map into the joint space followed by
// batch normalization. The only trainable unit on the visual side.
class VisionProjector {
 public:
  struct Options {
    std::int64_t input_dim = 0;
    std::int64_t d_joint = 0;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
    std::uint64_t seed = 78;
  };

  explicit VisionProjector(Options opts);

  // x: [input_dim] or [N, input_dim]. Train mode normalizes with batch
  // statistics and updates the running estimates; eval mode uses the running
  // estimates and is deterministic. Eval before any train batch falls back
  // to the identity statistics with a one-time warning.
  torch::Tensor forward(const torch::Tensor& x, bool train_mode);

  std::int64_t d_joint() const { return opts_.d_joint; }

  std::vector<torch::Tensor> parameters() const;
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
  // Running statistics; serialized with checkpoints but never optimized.
  std::vector<std::pair<std::string, torch::Tensor>> named_buffers() const;
  std::uint64_t parameter_checksum() const;

 private:
  Options opts_;
  torch::Tensor weight_, bias_;              // [d_joint, in], [d_joint]
  torch::Tensor gamma_, beta_;               // BN affine
  torch::Tensor running_mean_, running_var_;
  torch::Tensor batches_tracked_;            // int64 scalar
  mutable bool warned_cold_eval_ = false;
};

}  // namespace gopro
