#pragma once

#include "u3d/noise_spec.hpp"
#include "u3d/tensor.hpp"

#include <cstdint>

namespace u3d {

// A (T, H, W) noise volume with max |value| <= epsilon. Frames are indexed
// circularly: frame t of an arbitrarily long stream uses slice t mod T.
struct PerturbationVolume {
  Tensor volume;
  double epsilon = 0.0;
  NoiseSpec spec;

  std::uint32_t frames() const { return volume.dim(0); }
  std::uint32_t height() const { return volume.dim(1); }
  std::uint32_t width() const { return volume.dim(2); }
  std::size_t frame_size() const { return std::size_t{height()} * width(); }
  const float* frame(std::size_t t) const { return volume.data() + t * frame_size(); }
  float linf() const { return volume.size() ? volume.values().abs().maxCoeff() : 0.0f; }
};

// Wraps an existing (T, H, W) tensor, e.g. one loaded from disk. The bound is
// taken as the tensor's max |value| unless a larger epsilon is given.
PerturbationVolume volume_from_tensor(Tensor t, double epsilon = 0.0);

// Reduces any offset into [0, period).
inline std::uint32_t wrap_index(std::int64_t i, std::uint32_t period) {
  const std::int64_t p = period;
  return static_cast<std::uint32_t>(((i % p) + p) % p);
}

// Output frame t = input frame (t + tau) mod T.
PerturbationVolume temporal_shift(const PerturbationVolume& vol, std::int64_t tau);

}  // namespace u3d
