#pragma once

#include <torch/types.h>

#include <cstdint>
#include <vector>

namespace gopro {

// Deterministic tensor construction from a local engine, independent of the
// global torch RNG. All fixed (frozen) weights in the framework come from
// these so that identical configs rebuild identical models across processes.
torch::Tensor seeded_normal(std::vector<std::int64_t> shape, std::uint64_t seed,
                            double mean = 0.0, double stddev = 1.0);
torch::Tensor seeded_uniform(std::vector<std::int64_t> shape, std::uint64_t seed,
                             double lo = 0.0, double hi = 1.0);

// FNV-1a over the raw float bytes of the tensors, in order. Used for the
// frozen-parameter invariants.
std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace gopro
