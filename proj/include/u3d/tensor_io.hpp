#pragma once

// U3DT tensor files, little-endian throughout:
//   bytes 0-3  "U3DT"
//   byte  4    version (1)
//   byte  5    dtype (0 = float32)
//   byte  6    ndim (1-8)
//   byte  7    reserved (0)
//   ndim x u32 dims, then prod(dims) x f32 row-major payload.

#include "u3d/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace u3d {

inline constexpr std::size_t kU3dtHeaderBytes = 8;
inline constexpr std::size_t kU3dtMaxDims = 8;
// Largest payload accepted on read (elements); guards allocation on bad input.
inline constexpr std::size_t kU3dtMaxElements = std::size_t{1} << 30;

// Serialized size of t in bytes.
std::size_t encoded_size(const Tensor& t);

// Throws ValidationError for non-finite values (nothing is written) and
// IoError when the sink fails. Returns bytes written.
std::size_t write_tensor(const Tensor& t, std::ostream& out);
Tensor read_tensor(std::istream& in);

std::vector<std::byte> encode_tensor(const Tensor& t);
// The buffer must hold exactly one tensor; any length mismatch is Truncated.
Tensor decode_tensor(std::span<const std::byte> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);
VideoClip load_clip(const std::filesystem::path& path);
// All *.u3dt files in dir, sorted by filename.
std::vector<std::filesystem::path> list_tensor_files(const std::filesystem::path& dir);

}  // namespace u3d
