#include "u3d/video.hpp"

#include "u3d/error.hpp"
#include "u3d/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace u3d {

void inject_frame(const float* in, float* out, std::size_t pixels, std::uint32_t channels,
                  const float* slice) {
  if (channels == 1) {
    for (std::size_t i = 0; i < pixels; ++i)
      out[i] = std::clamp(in[i] + slice[i], kPixelMin, kPixelMax);
    return;
  }
  for (std::size_t i = 0; i < pixels; ++i) {
    const float n = slice[i];
    for (std::uint32_t c = 0; c < channels; ++c) {
      const std::size_t k = i * channels + c;
      out[k] = std::clamp(in[k] + n, kPixelMin, kPixelMax);
    }
  }
}

VideoClip apply_perturbation(const VideoClip& clip, const PerturbationVolume& vol,
                             std::int64_t start_offset) {
  if (vol.volume.ndim() != 3) throw ValidationError("perturbation volume must be (T, H, W)");
  if (vol.height() != clip.height() || vol.width() != clip.width())
    throw ValidationError("volume spatial dims " + std::to_string(vol.height()) + "x" +
                          std::to_string(vol.width()) + " do not match clip " +
                          std::to_string(clip.height()) + "x" + std::to_string(clip.width()));
  Tensor out(clip.tensor().dims());
  const std::size_t pixels = vol.frame_size();
  for (std::uint32_t t = 0; t < clip.frames(); ++t) {
    const float* slice = vol.frame(wrap_index(std::int64_t{t} + start_offset, vol.frames()));
    inject_frame(clip.frame(t), out.data() + t * clip.frame_size(), pixels, clip.channels(),
                 slice);
  }
  return VideoClip(std::move(out));
}

PixelMetricReport pixel_metrics(const VideoClip& clean, const VideoClip& adv) {
  if (clean.tensor().dims() != adv.tensor().dims())
    throw ValidationError("pixel_metrics requires clips of identical shape");
  const Eigen::ArrayXd diff =
      (adv.tensor().values().cast<double>() - clean.tensor().values().cast<double>());
  PixelMetricReport r;
  r.mse = diff.square().mean();
  r.linf = diff.abs().maxCoeff();
  return r;
}

VideoClip make_synthetic_clip(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                              std::uint32_t channels, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0xc11b}));
  const double fx = uniform(rng, 0.02, 0.12), fy = uniform(rng, 0.02, 0.12);
  const double vx = uniform(rng, -1.5, 1.5), vy = uniform(rng, -1.5, 1.5);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double cx = uniform(rng, 0.2, 0.8) * width, cy = uniform(rng, 0.2, 0.8) * height;
  const double radius = uniform(rng, 0.15, 0.35) * std::min(width, height);
  std::vector<double> tint(channels);
  for (auto& c : tint) c = uniform(rng, 0.7, 1.0);

  Tensor t({frames, height, width, channels});
  float* out = t.data();
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::uint32_t f = 0; f < frames; ++f) {
    const double bx = cx + vx * f, by = cy + vy * f;
    for (std::uint32_t y = 0; y < height; ++y) {
      for (std::uint32_t x = 0; x < width; ++x) {
        const double wave = std::sin(two_pi * (fx * (x + 0.7 * f) + fy * y) + phase);
        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        const double blob = std::exp(-d2 / (2.0 * radius * radius));
        const double base = 110.0 + 50.0 * wave + 70.0 * blob;
        for (std::uint32_t c = 0; c < channels; ++c) {
          const double grain = uniform(rng, -6.0, 6.0);
          *out++ = static_cast<float>(std::clamp(base * tint[c] + grain, 0.0, 255.0));
        }
      }
    }
  }
  return VideoClip(std::move(t));
}

}  // namespace u3d
