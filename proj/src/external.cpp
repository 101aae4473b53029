#include "u3d/external.hpp"

#include "u3d/error.hpp"
#include "u3d/tensor_io.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <poll.h>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace u3d {
namespace {

constexpr char kHandshakeMagic[4] = {'U', '3', 'D', 'X'};

std::uint32_t load_u32(const std::byte* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

void store_u32(std::byte* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = std::byte((v >> (8 * i)) & 0xff);
}

}  // namespace

std::vector<std::byte> encode_handshake(std::uint16_t layers) {
  std::vector<std::byte> out(8);
  std::memcpy(out.data(), kHandshakeMagic, 4);
  out[4] = std::byte{kWireVersion};
  out[5] = std::byte{0};
  out[6] = std::byte(layers & 0xff);
  out[7] = std::byte(layers >> 8);
  return out;
}

std::uint16_t decode_handshake(std::span<const std::byte> bytes) {
  if (bytes.size() != 8) throw ProtocolError("handshake must be 8 bytes");
  if (std::memcmp(bytes.data(), kHandshakeMagic, 4) != 0)
    throw ProtocolError("bad extractor handshake magic");
  if (bytes[4] != std::byte{kWireVersion}) throw ProtocolError("unsupported wire version");
  if (bytes[5] != std::byte{0}) throw ProtocolError("handshake reserved byte must be 0");
  const auto layers = static_cast<std::uint16_t>(std::uint16_t(bytes[6]) | std::uint16_t(bytes[7]) << 8);
  if (layers == 0) throw ProtocolError("extractor declared zero layers");
  return layers;
}

void WireChannel::read_exact(std::byte* dst, std::size_t n) {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (n > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ProtocolError("timed out waiting for extractor data");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) throw ProtocolError("timed out waiting for extractor data");
    const ssize_t got = ::read(read_fd_, dst, n);
    if (got < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
    }
    if (got == 0) throw ProtocolError("extractor closed the stream mid-message");
    dst += got;
    n -= static_cast<std::size_t>(got);
  }
}

void WireChannel::write_all(const std::byte* src, std::size_t n) {
  while (n > 0) {
    const ssize_t put = ::write(write_fd_, src, n);
    if (put < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write to extractor failed: ") + std::strerror(errno));
    }
    src += put;
    n -= static_cast<std::size_t>(put);
  }
}

std::uint16_t WireChannel::read_handshake() {
  std::byte buf[8];
  read_exact(buf, sizeof buf);
  return decode_handshake(buf);
}

void WireChannel::send_tensor(const Tensor& t) {
  const auto payload = encode_tensor(t);
  if (payload.size() > kMaxWireMessage) throw ProtocolError("tensor too large for the wire");
  std::byte prefix[4];
  store_u32(prefix, static_cast<std::uint32_t>(payload.size()));
  write_all(prefix, 4);
  write_all(payload.data(), payload.size());
}

Tensor WireChannel::recv_tensor() {
  std::byte prefix[4];
  read_exact(prefix, 4);
  const std::uint32_t length = load_u32(prefix);
  if (length < kU3dtHeaderBytes + 4 || length > kMaxWireMessage)
    throw ProtocolError("malformed frame length " + std::to_string(length));
  std::vector<std::byte> payload(length);
  read_exact(payload.data(), payload.size());
  try {
    return decode_tensor(payload);
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed tensor frame: ") + e.what());
  }
}

ExternalProcess::ExternalProcess(const std::vector<std::string>& argv,
                                 std::chrono::milliseconds timeout)
    : channel_(-1, -1, timeout) {
  if (argv.empty()) throw ValidationError("external command is empty");
  // A dead child must surface as a write error, not terminate us.
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw IoError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("pipe() failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]})
    posix_spawn_file_actions_addclose(&actions, fd);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw IoError("cannot launch '" + argv[0] + "': " + std::strerror(rc));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  channel_ = WireChannel(from_child_, to_child_, timeout);
}

ExternalProcess::~ExternalProcess() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Give a well-behaved child the chance to exit on EOF before killing it.
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(5000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

std::vector<Tensor> external_extract(const VideoClip& clip, WireChannel& channel,
                                     std::size_t layers) {
  channel.send_tensor(clip.tensor());
  std::vector<Tensor> features;
  features.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) features.push_back(channel.recv_tensor());
  return features;
}

ExternalExtractor::ExternalExtractor(const std::vector<std::string>& argv,
                                     std::uint32_t window_frames,
                                     std::chrono::milliseconds timeout)
    : process_(argv, timeout), window_(window_frames) {
  layers_ = process_.channel().read_handshake();
}

std::vector<Tensor> ExternalExtractor::extract(const VideoClip& window) const {
  if (window.frames() != window_)
    throw ValidationError("extractor expects " + std::to_string(window_) + " frames");
  std::lock_guard lock(mutex_);
  return external_extract(window, process_.channel(), layers_);
}

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> out;
  for (std::string word; in >> word;) out.push_back(word);
  return out;
}

}  // namespace u3d
