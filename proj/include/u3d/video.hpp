#pragma once

#include "u3d/tensor.hpp"
#include "u3d/volume.hpp"

#include <cstddef>
#include <cstdint>

namespace u3d {

inline constexpr float kPixelMin = 0.0f;
inline constexpr float kPixelMax = 255.0f;

struct PixelMetricReport {
  double mse = 0.0;   // mean of (adv - clean)^2 over all elements
  double linf = 0.0;  // max |adv - clean|
};

// Adds one (H, W) noise slice to an interleaved (H, W, C) frame, broadcasting
// across channels and clamping to the pixel range. `out` may alias `in`.
void inject_frame(const float* in, float* out, std::size_t pixels, std::uint32_t channels,
                  const float* slice);

// Output frame t = clamp(clip frame t + vol frame ((t + start_offset) mod T), 0, 255).
// Throws ValidationError when vol's (H, W) differs from the clip's.
VideoClip apply_perturbation(const VideoClip& clip, const PerturbationVolume& vol,
                             std::int64_t start_offset = 0);

// Throws ValidationError on shape mismatch.
PixelMetricReport pixel_metrics(const VideoClip& clean, const VideoClip& adv);

// Deterministic smooth moving-pattern clip for fixtures and demos.
VideoClip make_synthetic_clip(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                              std::uint32_t channels, std::uint64_t seed);

}  // namespace u3d
