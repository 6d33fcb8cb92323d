#pragma once

#include <memory>
#include <string>

#include "gopro/backbone.hpp"

namespace torch::jit {
struct Module;
}

namespace gopro {

// TorchScript-backed frozen encoders. The framework never reaches into the
// module beyond the calling conventions below, so any pretrained dual encoder
// can be dropped in by exporting two scripted modules.
//
// Vision module contract:
//   forward(x: Tensor[1, 3, S, S]) -> Tuple[List[Tensor], Tensor]
//     per-layer maps, each [1, C_l, P_l] or [1, C_l, H, W], plus the final
//     pooled feature [1, D].
//
// Text module contract:
//   encode(tokens: Tensor[N, T, E]) -> Tensor[N, D]
//   embed_class(name: str) -> Tensor[T_y, E]
//   int attributes: context_capacity, embed_dim, output_dim
class TorchScriptVisionBackbone final : public VisionBackbone {
 public:
  TorchScriptVisionBackbone(const std::string& path, std::int64_t image_size, ImageNorm norm,
                            const std::string& layer_taps);
  ~TorchScriptVisionBackbone() override;

  std::uint64_t parameter_checksum() const override;

 protected:
  FeatureStack do_encode(const torch::Tensor& image) const override;

 private:
  std::unique_ptr<torch::jit::Module> module_;
  std::vector<std::int64_t> taps_;  // 0-based layer indices to expose
};

class TorchScriptTextBackbone final : public TextBackbone {
 public:
  explicit TorchScriptTextBackbone(const std::string& path);
  ~TorchScriptTextBackbone() override;

  torch::Tensor embed_class_name(const std::string& class_name) const override;
  std::uint64_t parameter_checksum() const override;

 protected:
  torch::Tensor do_encode(const torch::Tensor& padded) const override;

 private:
  std::unique_ptr<torch::jit::Module> module_;
};

}  // namespace gopro
