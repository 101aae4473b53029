#pragma once

#include "u3d/tensor.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace u3d {

// Layered feature map v -> {f(v, d)}, d = 1..M. Implementations are immutable
// after construction (or serialize internally) and safe to share.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual std::size_t num_layers() const = 0;
  // Frames consumed per call; longer clips are windowed by the caller.
  virtual std::uint32_t window_frames() const = 0;
  virtual std::vector<Tensor> extract(const VideoClip& window) const = 0;
};

// One 3x3x3 convolution stage with zero padding, followed by a rectifier.
struct ConvStage {
  std::uint32_t out_channels = 8;
  std::uint32_t stride_t = 1;
  std::uint32_t stride_s = 2;
};

std::vector<ConvStage> default_conv_stages();

// Fixed random-weight 3-D conv stack. Weights and biases are drawn uniformly
// from [-0.1, 0.1] by a generator seeded with `seed`; pixels are scaled to
// [0, 1] before the first stage.
class BuiltinExtractor final : public FeatureExtractor {
 public:
  explicit BuiltinExtractor(std::uint64_t seed = 0,
                            std::vector<ConvStage> stages = default_conv_stages(),
                            std::uint32_t window_frames = 16);

  std::size_t num_layers() const override { return stages_.size(); }
  std::uint32_t window_frames() const override { return window_; }
  std::vector<Tensor> extract(const VideoClip& window) const override;

  const std::vector<ConvStage>& stages() const { return stages_; }
  std::uint64_t seed() const { return seed_; }

 private:
  struct Weights {
    Eigen::MatrixXf kernel;  // out_channels x (27 * in_channels)
    Eigen::VectorXf bias;
  };
  const std::vector<Weights>& weights_for(std::uint32_t in_channels) const;

  std::uint64_t seed_;
  std::vector<ConvStage> stages_;
  std::uint32_t window_;
  std::vector<Weights> gray_;  // stack for 1-channel input
  std::vector<Weights> rgb_;   // stack for 3-channel input
};

// Elementwise sign(z) |z|^alpha.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> power_normalize(
    const Eigen::ArrayBase<Derived>& z, typename Derived::Scalar alpha) {
  return z.sign() * z.abs().pow(alpha);
}

Tensor power_normalize(const Tensor& z, double alpha);

struct DistanceConfig {
  double alpha = 0.5;
  // Layers entering total_distance; empty means all.
  std::vector<bool> layer_mask;
};

void validate(const DistanceConfig& cfg);

// ||P(a) - P(b)||_2 over flattened features, accumulated in double.
double feature_distance(const Tensor& a, const Tensor& b, double alpha);

// Sum of feature_distance over the layers selected by cfg.layer_mask.
double feature_set_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                            const DistanceConfig& cfg);

// d is 1-based; throws ValidationError when d is outside [1, M].
double layer_distance(const VideoClip& v, const VideoClip& v_prime, std::size_t d,
                      const FeatureExtractor& extractor, const DistanceConfig& cfg);

double total_distance(const VideoClip& v, const VideoClip& v_prime,
                      const FeatureExtractor& extractor, const DistanceConfig& cfg);

}  // namespace u3d
