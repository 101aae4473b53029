#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace u3d {

// Dense float32 tensor, row-major with the last dimension fastest.
class Tensor {
 public:
  using Dims = std::vector<std::uint32_t>;

  Tensor() = default;
  // Zero-filled tensor. Every extent must be >= 1.
  explicit Tensor(Dims dims);
  Tensor(std::initializer_list<std::uint32_t> dims) : Tensor(Dims(dims)) {}
  Tensor(Dims dims, Eigen::ArrayXf values);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  std::uint32_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  bool empty() const noexcept { return dims_.empty(); }

  const Eigen::ArrayXf& values() const noexcept { return values_; }
  Eigen::ArrayXf& values() noexcept { return values_; }
  const float* data() const noexcept { return values_.data(); }
  float* data() noexcept { return values_.data(); }

  float operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  float& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

  bool all_finite() const { return values_.isFinite().all(); }

  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Dims dims_;
  Eigen::ArrayXf values_;
};

// Product of extents; throws ValidationError on zero extents or size_t overflow.
std::size_t element_count(const Tensor::Dims& dims);

// A (T, H, W, C) clip on the [0, 255] pixel scale with C in {1, 3}.
class VideoClip {
 public:
  VideoClip() = default;
  // Validates the layout and pixel range; throws ValidationError.
  explicit VideoClip(Tensor tensor);

  const Tensor& tensor() const noexcept { return tensor_; }
  std::uint32_t frames() const { return tensor_.dim(0); }
  std::uint32_t height() const { return tensor_.dim(1); }
  std::uint32_t width() const { return tensor_.dim(2); }
  std::uint32_t channels() const { return tensor_.dim(3); }
  std::size_t frame_size() const {
    return std::size_t{height()} * width() * channels();
  }
  const float* frame(std::size_t t) const { return tensor_.data() + t * frame_size(); }

  // Frames [first, first + count) as a new clip.
  VideoClip window(std::size_t first, std::size_t count) const;

  friend bool operator==(const VideoClip& a, const VideoClip& b) {
    return a.tensor_ == b.tensor_;
  }

 private:
  Tensor tensor_;
};

}  // namespace u3d
