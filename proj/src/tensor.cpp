#include "u3d/tensor.hpp"

#include "u3d/error.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <string>

namespace u3d {

std::size_t element_count(const Tensor::Dims& dims) {
  if (dims.empty()) throw ValidationError("tensor must have at least one dimension");
  std::size_t n = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw ValidationError("tensor extents must be >= 1");
    if (n > std::numeric_limits<std::size_t>::max() / d)
      throw ValidationError("tensor element count overflows");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Dims dims)
    : dims_(std::move(dims)),
      values_(Eigen::ArrayXf::Zero(static_cast<Eigen::Index>(element_count(dims_)))) {}

Tensor::Tensor(Dims dims, Eigen::ArrayXf values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  if (element_count(dims_) != static_cast<std::size_t>(values_.size()))
    throw ValidationError("tensor data length does not match its dims");
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dims_ != b.dims_) return false;
  // Bitwise comparison: -0.0f and 0.0f differ, matching file round-trips.
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

VideoClip::VideoClip(Tensor tensor) : tensor_(std::move(tensor)) {
  if (tensor_.ndim() != 4)
    throw ValidationError("video clip must be 4-D (T, H, W, C), got " +
                          std::to_string(tensor_.ndim()) + " dims");
  const auto c = tensor_.dim(3);
  if (c != 1 && c != 3) throw ValidationError("video clip must have 1 or 3 channels");
  const auto& v = tensor_.values();
  if (!v.isFinite().all()) throw ValidationError("video clip contains non-finite pixels");
  if ((v < 0.0f).any() || (v > 255.0f).any())
    throw ValidationError("video clip pixels must lie in [0, 255]");
}

VideoClip VideoClip::window(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > frames())
    throw ValidationError("clip window [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") exceeds " +
                          std::to_string(frames()) + " frames");
  const auto n = static_cast<Eigen::Index>(count * frame_size());
  Eigen::ArrayXf values = tensor_.values().segment(
      static_cast<Eigen::Index>(first * frame_size()), n);
  return VideoClip(Tensor({static_cast<std::uint32_t>(count), height(), width(), channels()},
                          std::move(values)));
}

}  // namespace u3d
