#include "u3d/tensor_io.hpp"

#include "u3d/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace u3d {
namespace {

constexpr std::array<char, 4> kMagic = {'U', '3', 'D', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

void check_finite(const Tensor& t) {
  if (t.empty()) throw ValidationError("cannot serialize an empty tensor");
  if (t.ndim() > kU3dtMaxDims) throw ValidationError("U3DT supports at most 8 dims");
  if (!t.all_finite()) throw ValidationError("tensor contains NaN or Inf");
}

std::array<char, kU3dtHeaderBytes> header_for(const Tensor& t) {
  return {kMagic[0], kMagic[1], kMagic[2], kMagic[3], static_cast<char>(kVersion),
          static_cast<char>(kDtypeF32), static_cast<char>(t.ndim()), 0};
}

// Reads exactly n bytes or reports how many were available.
std::size_t read_fully(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace

std::size_t encoded_size(const Tensor& t) {
  return kU3dtHeaderBytes + 4 * t.ndim() + 4 * t.size();
}

std::size_t write_tensor(const Tensor& t, std::ostream& out) {
  check_finite(t);
  const auto header = header_for(t);
  out.write(header.data(), header.size());
  for (std::uint32_t d : t.dims()) {
    const std::uint32_t le = to_little(d);
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float le = to_little(t[i]);
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
  }
  if (!out) throw IoError("failed writing U3DT tensor");
  return encoded_size(t);
}

Tensor read_tensor(std::istream& in) {
  std::array<char, kU3dtHeaderBytes> header{};
  const std::size_t got = read_fully(in, header.data(), header.size());
  if (got >= 4 && !std::equal(kMagic.begin(), kMagic.end(), header.begin()))
    throw FormatError(FormatError::Kind::BadMagic, "not a U3DT stream (bad magic)");
  if (got < header.size())
    throw FormatError(FormatError::Kind::Truncated, "truncated U3DT header");
  if (static_cast<std::uint8_t>(header[4]) != kVersion)
    throw FormatError(FormatError::Kind::BadHeader, "unsupported U3DT version");
  if (static_cast<std::uint8_t>(header[5]) != kDtypeF32)
    throw FormatError(FormatError::Kind::BadHeader, "unsupported U3DT dtype");
  const auto ndim = static_cast<std::uint8_t>(header[6]);
  if (ndim < 1 || ndim > kU3dtMaxDims)
    throw FormatError(FormatError::Kind::BadHeader, "U3DT ndim must be 1-8");
  if (header[7] != 0)
    throw FormatError(FormatError::Kind::BadHeader, "U3DT reserved byte must be 0");

  Tensor::Dims dims(ndim);
  if (read_fully(in, reinterpret_cast<char*>(dims.data()), 4u * ndim) != 4u * ndim)
    throw FormatError(FormatError::Kind::Truncated, "truncated U3DT dims");
  std::size_t count = 1;
  for (auto& d : dims) {
    d = to_little(d);
    if (d == 0) throw FormatError(FormatError::Kind::BadHeader, "U3DT extent of zero");
    if (count > kU3dtMaxElements / d)
      throw FormatError(FormatError::Kind::DimOverflow, "U3DT dims overflow the size limit");
    count *= d;
  }

  Eigen::ArrayXf values(static_cast<Eigen::Index>(count));
  const std::size_t bytes = count * sizeof(float);
  if (read_fully(in, reinterpret_cast<char*>(values.data()), bytes) != bytes)
    throw FormatError(FormatError::Kind::Truncated, "truncated U3DT payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) v = to_little(v);
  }
  if (!values.isFinite().all())
    throw FormatError(FormatError::Kind::NonFinite, "U3DT payload contains NaN or Inf");
  return Tensor(std::move(dims), std::move(values));
}

std::vector<std::byte> encode_tensor(const Tensor& t) {
  std::ostringstream out(std::ios::binary);
  write_tensor(t, out);
  const std::string s = out.str();
  std::vector<std::byte> bytes(s.size());
  std::memcpy(bytes.data(), s.data(), s.size());
  return bytes;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        std::ios::binary);
  Tensor t = read_tensor(in);
  if (encoded_size(t) != bytes.size())
    throw FormatError(FormatError::Kind::Truncated,
                      "U3DT declared size does not match the payload length");
  return t;
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  check_finite(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(t, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor(in);
}

VideoClip load_clip(const std::filesystem::path& path) {
  return VideoClip(load_tensor(path));
}

std::vector<std::filesystem::path> list_tensor_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".u3dt")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace u3d
