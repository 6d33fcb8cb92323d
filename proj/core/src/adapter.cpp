#include "gopro/adapter.hpp"

#include <fmt/format.h>
#include <torch/script.h>

#include <filesystem>

#include "gopro/config.hpp"
#include "gopro/errors.hpp"
#include "gopro/tensor_util.hpp"

namespace gopro {

namespace {

std::unique_ptr<torch::jit::Module> load_module(const std::string& path, const char* role) {
  if (path.empty()) {
    throw ConfigError(fmt::format("backbone.kind=adapter requires backbone.adapter.{}_path", role));
  }
  if (!std::filesystem::exists(path)) {
    throw ConfigError(fmt::format("{} adapter file '{}' does not exist", role, path));
  }
  auto m = std::make_unique<torch::jit::Module>(torch::jit::load(path));
  m->eval();
  for (auto p : m->parameters()) p.set_requires_grad(false);
  return m;
}

std::uint64_t module_checksum(const torch::jit::Module& m) {
  std::vector<torch::Tensor> params;
  for (const auto& p : m.parameters()) params.push_back(p);
  for (const auto& b : m.buffers()) params.push_back(b);
  return tensor_checksum(params);
}

}  // namespace

TorchScriptVisionBackbone::TorchScriptVisionBackbone(const std::string& path,
                                                     std::int64_t image_size, ImageNorm norm,
                                                     const std::string& layer_taps)
    : module_(load_module(path, "vision")) {
  image_size_ = image_size;
  norm_ = norm;

  // Probe once with zeros to discover the layer layout.
  at::NoGradGuard guard;
  auto probe = module_->forward({at::zeros({1, 3, image_size, image_size})}).toTuple();
  auto layers = probe->elements().at(0).toTensorList();
  auto final = probe->elements().at(1).toTensor();
  const auto layer_count = static_cast<std::int64_t>(layers.size());
  if (layer_count == 0) throw ConfigError("vision adapter returned no per-layer features");

  if (layer_taps == "all") {
    for (std::int64_t l = 0; l < layer_count; ++l) taps_.push_back(l);
  } else {
    RunConfig probe_cfg = RunConfig::defaults();
    probe_cfg.set("backbone.adapter.layer_taps", layer_taps);
    for (auto one_based : probe_cfg.get_int_list("backbone.adapter.layer_taps")) {
      if (one_based < 1 || one_based > layer_count) {
        throw ConfigError(fmt::format("layer tap {} outside 1..{}", one_based, layer_count));
      }
      taps_.push_back(one_based - 1);
    }
  }
  for (auto l : taps_) per_layer_dims_.push_back(static_cast<torch::Tensor>(layers[l]).size(1));
  output_dim_ = final.size(1);
}

TorchScriptVisionBackbone::~TorchScriptVisionBackbone() = default;

FeatureStack TorchScriptVisionBackbone::do_encode(const torch::Tensor& image) const {
  // NoGrad rather than InferenceMode: the pooled feature feeds trainable
  // modules, and inference tensors cannot be saved for backward.
  at::NoGradGuard guard;
  auto out = module_->forward({image.unsqueeze(0)}).toTuple();
  auto layers = out->elements().at(0).toTensorList();
  FeatureStack stack;
  for (auto l : taps_) {
    auto map = static_cast<torch::Tensor>(layers[l]).squeeze(0);
    stack.per_layer.push_back(map.flatten(1));  // [C_l, P_l]
  }
  stack.final_pooled = out->elements().at(1).toTensor().squeeze(0);
  return stack;
}

std::uint64_t TorchScriptVisionBackbone::parameter_checksum() const {
  return module_checksum(*module_);
}

TorchScriptTextBackbone::TorchScriptTextBackbone(const std::string& path)
    : module_(load_module(path, "text")) {
  context_capacity_ = module_->attr("context_capacity").toInt();
  embed_dim_ = module_->attr("embed_dim").toInt();
  output_dim_ = module_->attr("output_dim").toInt();
}

TorchScriptTextBackbone::~TorchScriptTextBackbone() = default;

torch::Tensor TorchScriptTextBackbone::embed_class_name(const std::string& class_name) const {
  if (class_name.empty()) throw ConfigError("class name must be non-empty");
  return module_->get_method("embed_class")({class_name}).toTensor();
}

torch::Tensor TorchScriptTextBackbone::do_encode(const torch::Tensor& padded) const {
  return module_->get_method("encode")({padded}).toTensor();
}

std::uint64_t TorchScriptTextBackbone::parameter_checksum() const {
  return module_checksum(*module_);
}

BackbonePair make_adapter_backbones(const RunConfig& cfg) {
  ImageNorm norm;
  auto mean = cfg.get_double_list("backbone.adapter.norm_mean");
  auto std = cfg.get_double_list("backbone.adapter.norm_std");
  if (mean.size() != 3 || std.size() != 3) {
    throw ConfigError("backbone.adapter.norm_mean/std must have 3 entries");
  }
  for (int c = 0; c < 3; ++c) {
    norm.mean[c] = mean[c];
    norm.std[c] = std[c];
  }
  auto vision = std::make_shared<TorchScriptVisionBackbone>(
      cfg.get_str("backbone.adapter.vision_path"), cfg.get_int("backbone.adapter.image_size"),
      norm, cfg.get_str("backbone.adapter.layer_taps"));
  auto text =
      std::make_shared<TorchScriptTextBackbone>(cfg.get_str("backbone.adapter.text_path"));
  return {std::move(vision), std::move(text)};
}

}  // namespace gopro
