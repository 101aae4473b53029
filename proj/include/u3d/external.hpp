#pragma once

// Extractor wire protocol, spoken over a child process's stdin/stdout:
//   handshake (server -> client, 8 bytes): "U3DX", u8 version = 1,
//     u8 reserved = 0, u16 M (little-endian)
//   request  (client -> server): u32 length, one U3DT tensor (the clip window)
//   response (server -> client): M x (u32 length, one U3DT tensor)
// Every read is bounded by a timeout; any deviation raises ProtocolError.

#include "u3d/features.hpp"
#include "u3d/tensor.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <sys/types.h>
#include <vector>

namespace u3d {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::chrono::milliseconds kDefaultWireTimeout{30000};
// Frames above this length are rejected before allocating.
inline constexpr std::uint32_t kMaxWireMessage = 1u << 31;

// Builds the 8-byte handshake announcing `layers` feature tensors.
std::vector<std::byte> encode_handshake(std::uint16_t layers);
// Returns M; throws ProtocolError on bad magic, version or reserved byte.
std::uint16_t decode_handshake(std::span<const std::byte> bytes);

// Length-prefixed framing over a pair of file descriptors. Does not own them.
class WireChannel {
 public:
  WireChannel(int read_fd, int write_fd,
              std::chrono::milliseconds timeout = kDefaultWireTimeout)
      : read_fd_(read_fd), write_fd_(write_fd), timeout_(timeout) {}

  void read_exact(std::byte* dst, std::size_t n);
  void write_all(const std::byte* src, std::size_t n);

  std::uint16_t read_handshake();
  void send_tensor(const Tensor& t);
  Tensor recv_tensor();

 private:
  int read_fd_;
  int write_fd_;
  std::chrono::milliseconds timeout_;
};

// Child process with piped stdin/stdout; killed and reaped on destruction.
class ExternalProcess {
 public:
  explicit ExternalProcess(const std::vector<std::string>& argv,
                           std::chrono::milliseconds timeout = kDefaultWireTimeout);
  ~ExternalProcess();
  ExternalProcess(const ExternalProcess&) = delete;
  ExternalProcess& operator=(const ExternalProcess&) = delete;

  WireChannel& channel() { return channel_; }
  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  WireChannel channel_;
};

// Sends one clip window and collects `layers` feature tensors.
std::vector<Tensor> external_extract(const VideoClip& clip, WireChannel& channel,
                                     std::size_t layers);

// FeatureExtractor backed by an external process (e.g. a real C3D/I3D model).
// Requests are serialized per instance; open several for parallelism.
class ExternalExtractor final : public FeatureExtractor {
 public:
  explicit ExternalExtractor(const std::vector<std::string>& argv,
                             std::uint32_t window_frames = 16,
                             std::chrono::milliseconds timeout = kDefaultWireTimeout);

  std::size_t num_layers() const override { return layers_; }
  std::uint32_t window_frames() const override { return window_; }
  std::vector<Tensor> extract(const VideoClip& window) const override;

 private:
  mutable std::mutex mutex_;
  mutable ExternalProcess process_;
  std::uint32_t window_;
  std::size_t layers_ = 0;
};

// Splits a shell-style command line on whitespace (no quoting support).
std::vector<std::string> split_command(const std::string& command);

}  // namespace u3d
