#include "gopro/tensor_util.hpp"

#include <ATen/ATen.h>

#include <random>

#include "gopro/config.hpp"
#include "gopro/rng.hpp"

namespace gopro {

namespace {

torch::Tensor fill_from_engine(std::vector<std::int64_t> shape, std::uint64_t seed,
                               auto&& draw) {
  std::int64_t numel = 1;
  for (auto d : shape) numel *= d;
  std::vector<float> data(static_cast<std::size_t>(numel));
  auto eng = make_engine(seed);
  for (auto& v : data) v = static_cast<float>(draw(eng));
  return at::from_blob(data.data(), shape, at::kFloat).clone();
}

}  // namespace

torch::Tensor seeded_normal(std::vector<std::int64_t> shape, std::uint64_t seed, double mean,
                            double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return fill_from_engine(std::move(shape), seed, [&](auto& eng) { return dist(eng); });
}

torch::Tensor seeded_uniform(std::vector<std::int64_t> shape, std::uint64_t seed, double lo,
                             double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return fill_from_engine(std::move(shape), seed, [&](auto& eng) { return dist(eng); });
}

std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tensors) {
    auto c = t.detach().to(at::kFloat).contiguous();
    h = fnv1a64(c.data_ptr<float>(), c.numel() * sizeof(float), h);
  }
  return h;
}

}  // namespace gopro
