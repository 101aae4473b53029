#include "u3d/features.hpp"

#include "u3d/error.hpp"
#include "u3d/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace u3d {
namespace {

struct Volume4 {
  std::uint32_t t, h, w, c;
};

std::uint32_t strided_extent(std::uint32_t in, std::uint32_t stride) {
  return (in + stride - 1) / stride;
}

// Gathers 3x3x3 zero-padded patches into columns, channel fastest within a
// tap, so that kernel * patches yields a (C_out x N) block whose columns are
// already in (T, H, W, C) order.
Eigen::MatrixXf im2col(const float* in, const Volume4& s, const ConvStage& stage,
                       const Volume4& o) {
  const Eigen::Index rows = 27 * static_cast<Eigen::Index>(s.c);
  Eigen::MatrixXf cols = Eigen::MatrixXf::Zero(rows, static_cast<Eigen::Index>(o.t) * o.h * o.w);
  Eigen::Index col = 0;
  for (std::uint32_t to = 0; to < o.t; ++to)
    for (std::uint32_t yo = 0; yo < o.h; ++yo)
      for (std::uint32_t xo = 0; xo < o.w; ++xo, ++col) {
        float* dst = cols.col(col).data();
        for (int kt = 0; kt < 3; ++kt) {
          const long ti = long(to) * stage.stride_t + kt - 1;
          for (int ky = 0; ky < 3; ++ky) {
            const long yi = long(yo) * stage.stride_s + ky - 1;
            for (int kx = 0; kx < 3; ++kx, dst += s.c) {
              const long xi = long(xo) * stage.stride_s + kx - 1;
              if (ti < 0 || ti >= long(s.t) || yi < 0 || yi >= long(s.h) || xi < 0 ||
                  xi >= long(s.w))
                continue;
              const float* src = in + ((std::size_t(ti) * s.h + yi) * s.w + xi) * s.c;
              std::copy(src, src + s.c, dst);
            }
          }
        }
      }
  return cols;
}

}  // namespace

std::vector<ConvStage> default_conv_stages() {
  return {{8, 1, 2}, {16, 2, 2}, {32, 2, 2}, {32, 2, 2}};
}

BuiltinExtractor::BuiltinExtractor(std::uint64_t seed, std::vector<ConvStage> stages,
                                   std::uint32_t window_frames)
    : seed_(seed), stages_(std::move(stages)), window_(window_frames) {
  if (stages_.empty()) throw ValidationError("extractor needs at least one stage");
  if (window_ < 1) throw ValidationError("extractor window must be >= 1 frame");
  for (const auto& st : stages_)
    if (st.out_channels < 1 || st.stride_t < 1 || st.stride_s < 1)
      throw ValidationError("conv stage channels and strides must be >= 1");

  auto build = [&](std::uint32_t in_channels) {
    Rng rng(derive_seed(seed_, {in_channels}));
    std::vector<Weights> stack;
    std::uint32_t c = in_channels;
    for (const auto& st : stages_) {
      Weights w;
      w.kernel.resize(st.out_channels, 27 * static_cast<Eigen::Index>(c));
      for (Eigen::Index j = 0; j < w.kernel.cols(); ++j)
        for (Eigen::Index i = 0; i < w.kernel.rows(); ++i)
          w.kernel(i, j) = static_cast<float>(uniform(rng, -0.1, 0.1));
      w.bias.resize(st.out_channels);
      for (auto& b : w.bias) b = static_cast<float>(uniform(rng, -0.1, 0.1));
      stack.push_back(std::move(w));
      c = st.out_channels;
    }
    return stack;
  };
  gray_ = build(1);
  rgb_ = build(3);
}

const std::vector<BuiltinExtractor::Weights>& BuiltinExtractor::weights_for(
    std::uint32_t in_channels) const {
  if (in_channels == 1) return gray_;
  if (in_channels == 3) return rgb_;
  throw ValidationError("builtin extractor accepts 1 or 3 channels");
}

std::vector<Tensor> BuiltinExtractor::extract(const VideoClip& window) const {
  if (window.frames() != window_)
    throw ValidationError("extractor expects " + std::to_string(window_) + " frames, got " +
                          std::to_string(window.frames()));
  const auto& stack = weights_for(window.channels());

  Volume4 shape{window.frames(), window.height(), window.width(), window.channels()};
  Eigen::ArrayXf activation = window.tensor().values() * (1.0f / 255.0f);
  std::vector<Tensor> layers;
  layers.reserve(stages_.size());
  for (std::size_t l = 0; l < stages_.size(); ++l) {
    const ConvStage& st = stages_[l];
    const Volume4 out{strided_extent(shape.t, st.stride_t), strided_extent(shape.h, st.stride_s),
                      strided_extent(shape.w, st.stride_s), st.out_channels};
    const Eigen::MatrixXf cols = im2col(activation.data(), shape, st, out);
    Eigen::MatrixXf response = stack[l].kernel * cols;
    response.colwise() += stack[l].bias;
    activation = response.array().max(0.0f).reshaped();
    layers.emplace_back(Tensor::Dims{out.t, out.h, out.w, out.c}, activation);
    shape = out;
  }
  return layers;
}

Tensor power_normalize(const Tensor& z, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  Eigen::ArrayXf out =
      power_normalize(z.values().cast<double>().eval(), alpha).cast<float>();
  return Tensor(z.dims(), std::move(out));
}

void validate(const DistanceConfig& cfg) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
}

double feature_distance(const Tensor& a, const Tensor& b, double alpha) {
  if (a.size() != b.size()) throw ValidationError("feature tensors differ in size");
  const Eigen::ArrayXd pa = power_normalize(a.values().cast<double>().eval(), alpha);
  const Eigen::ArrayXd pb = power_normalize(b.values().cast<double>().eval(), alpha);
  return (pa - pb).matrix().norm();
}

double feature_set_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                            const DistanceConfig& cfg) {
  if (a.size() != b.size()) throw ValidationError("feature lists differ in length");
  if (!cfg.layer_mask.empty() && cfg.layer_mask.size() != a.size())
    throw ValidationError("layer mask length does not match the layer count");
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d)
    if (cfg.layer_mask.empty() || cfg.layer_mask[d]) sum += feature_distance(a[d], b[d], cfg.alpha);
  return sum;
}

double layer_distance(const VideoClip& v, const VideoClip& v_prime, std::size_t d,
                      const FeatureExtractor& extractor, const DistanceConfig& cfg) {
  validate(cfg);
  if (d < 1 || d > extractor.num_layers())
    throw ValidationError("layer index " + std::to_string(d) + " outside [1, " +
                          std::to_string(extractor.num_layers()) + "]");
  if (v.tensor().dims() != v_prime.tensor().dims())
    throw ValidationError("clips must have identical shapes");
  const auto fa = extractor.extract(v);
  const auto fb = extractor.extract(v_prime);
  return feature_distance(fa[d - 1], fb[d - 1], cfg.alpha);
}

double total_distance(const VideoClip& v, const VideoClip& v_prime,
                      const FeatureExtractor& extractor, const DistanceConfig& cfg) {
  validate(cfg);
  if (v.tensor().dims() != v_prime.tensor().dims())
    throw ValidationError("clips must have identical shapes");
  return feature_set_distance(extractor.extract(v), extractor.extract(v_prime), cfg);
}

}  // namespace u3d
