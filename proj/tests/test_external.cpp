#include "u3d/error.hpp"
#include "u3d/external.hpp"
#include "u3d/objective.hpp"
#include "u3d/tensor_io.hpp"
#include "u3d/video.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <unistd.h>

using namespace u3d;
using namespace std::chrono_literals;

namespace {

std::vector<std::string> echo(std::initializer_list<std::string> args = {}) {
  std::vector<std::string> argv{ECHO_EXTRACTOR};
  argv.insert(argv.end(), args);
  return argv;
}

struct Pipe {
  int fds[2];
  Pipe() { EXPECT_EQ(::pipe(fds), 0); }
  ~Pipe() {
    ::close(fds[0]);
    ::close(fds[1]);
  }
  void write(const void* p, std::size_t n) { ASSERT_EQ(::write(fds[1], p, n), ssize_t(n)); }
};

}  // namespace

TEST(Handshake, EncodeDecode) {
  const auto hs = encode_handshake(258);
  ASSERT_EQ(hs.size(), 8u);
  EXPECT_EQ(std::memcmp(hs.data(), "U3DX", 4), 0);
  EXPECT_EQ(hs[4], std::byte{1});
  EXPECT_EQ(hs[5], std::byte{0});
  EXPECT_EQ(hs[6], std::byte{2});
  EXPECT_EQ(hs[7], std::byte{1});
  EXPECT_EQ(decode_handshake(hs), 258);

  auto bad = hs;
  bad[0] = std::byte{'X'};
  EXPECT_THROW(decode_handshake(bad), ProtocolError);
  bad = hs;
  bad[4] = std::byte{2};
  EXPECT_THROW(decode_handshake(bad), ProtocolError);
  EXPECT_THROW(decode_handshake(encode_handshake(0)), ProtocolError);
  EXPECT_THROW(decode_handshake(std::span(hs).first(7)), ProtocolError);
}

TEST(WireChannelTest, RoundTripsTensorsThroughAPipe) {
  Pipe p;
  WireChannel tx(-1, p.fds[1], 1000ms), rx(p.fds[0], -1, 1000ms);
  const Tensor t({2, 3}, Eigen::ArrayXf::LinSpaced(6, 0, 5));
  tx.send_tensor(t);
  EXPECT_EQ(rx.recv_tensor(), t);
}

TEST(WireChannelTest, MalformedLengthIsProtocolError) {
  Pipe p;
  WireChannel rx(p.fds[0], -1, 1000ms);
  const unsigned char tiny[4] = {3, 0, 0, 0};
  p.write(tiny, 4);
  EXPECT_THROW(rx.recv_tensor(), ProtocolError);
}

TEST(WireChannelTest, OversizedLengthIsProtocolError) {
  Pipe p;
  WireChannel rx(p.fds[0], -1, 1000ms);
  const unsigned char huge[4] = {0xff, 0xff, 0xff, 0xff};
  p.write(huge, 4);
  EXPECT_THROW(rx.recv_tensor(), ProtocolError);
}

TEST(WireChannelTest, CorruptTensorIsProtocolError) {
  Pipe p;
  WireChannel rx(p.fds[0], -1, 1000ms);
  auto body = encode_tensor(Tensor({4}));
  body[0] = std::byte{'Z'};
  const std::uint32_t len = static_cast<std::uint32_t>(body.size());
  const unsigned char prefix[4] = {static_cast<unsigned char>(len), 0, 0, 0};
  p.write(prefix, 4);
  p.write(body.data(), body.size());
  EXPECT_THROW(rx.recv_tensor(), ProtocolError);
}

TEST(WireChannelTest, SilentPeerTimesOut) {
  Pipe p;
  WireChannel rx(p.fds[0], -1, 100ms);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(rx.recv_tensor(), ProtocolError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(ExternalExtractorTest, EchoReturnsInputAsSingleLayer) {
  const ExternalExtractor ex(echo(), 16, 5000ms);
  EXPECT_EQ(ex.num_layers(), 1u);
  const auto clip = make_synthetic_clip(16, 8, 8, 3, 1);
  const auto f = ex.extract(clip);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0], clip.tensor());
  EXPECT_EQ(ex.extract(clip)[0], clip.tensor());
}

TEST(ExternalExtractorTest, LayerCountFromHandshake) {
  const ExternalExtractor ex(echo({"--layers", "3"}), 16, 5000ms);
  EXPECT_EQ(ex.num_layers(), 3u);
  const auto clip = make_synthetic_clip(16, 4, 4, 1, 2);
  const auto f = ex.extract(clip);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[2].values()[5], clip.tensor().values()[5] * 3.0f);
  // Distances work with external features too.
  EXPECT_EQ(total_distance(clip, clip, ex, {}), 0.0);
}

TEST(ExternalExtractorTest, ShortResponseIsProtocolError) {
  const ExternalExtractor ex(echo({"--short"}), 16, 300ms);
  EXPECT_EQ(ex.num_layers(), 3u);
  EXPECT_THROW(ex.extract(make_synthetic_clip(16, 4, 4, 1, 0)), ProtocolError);
}

TEST(ExternalExtractorTest, BadLengthIsProtocolErrorWithoutHanging) {
  const ExternalExtractor ex(echo({"--bad-length"}), 16, 2000ms);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(ex.extract(make_synthetic_clip(16, 4, 4, 1, 0)), ProtocolError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 1s);
}

TEST(ExternalExtractorTest, BadMagicHandshake) {
  EXPECT_THROW(ExternalExtractor(echo({"--bad-magic"}), 16, 2000ms), ProtocolError);
}

TEST(ExternalExtractorTest, HangingPeerTimesOut) {
  const ExternalExtractor ex(echo({"--hang"}), 16, 200ms);
  EXPECT_THROW(ex.extract(make_synthetic_clip(16, 4, 4, 1, 0)), ProtocolError);
}

TEST(ExternalExtractorTest, ExitedPeerIsProtocolError) {
  const ExternalExtractor ex(echo({"--exit"}), 16, 2000ms);
  EXPECT_THROW(ex.extract(make_synthetic_clip(16, 4, 4, 1, 0)), ProtocolError);
}

TEST(ExternalExtractorTest, MissingProgram) {
  EXPECT_ANY_THROW(ExternalExtractor({"/nonexistent/extractor"}, 16, 500ms));
  EXPECT_THROW(ExternalExtractor({}, 16, 500ms), ValidationError);
}

TEST(ExternalOracleTest, LabelsFromOneElementResponses) {
  std::vector<VideoClip> clips;
  for (std::uint64_t s = 0; s < 4; ++s) clips.push_back(make_synthetic_clip(16, 8, 8, 1, s));
  ExternalOracle oracle(echo({"--label"}), clips, 16, 5000ms);
  const auto clean = oracle.clean_labels();
  ASSERT_EQ(clean.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const double mean = clips[i].tensor().values().cast<double>().mean();
    EXPECT_EQ(clean[i], int(std::floor(mean)) % 10);
  }
  Tensor zero({16, 8, 8});
  EXPECT_EQ(oracle.success_rate(volume_from_tensor(zero)), 0.0);
  Tensor shift({16, 8, 8});
  shift.values().setConstant(3.0f);
  const double sr = oracle.success_rate(volume_from_tensor(shift));
  EXPECT_GT(sr, 0.0);
  EXPECT_LE(sr, 1.0);
}

TEST(ExternalOracleTest, RejectsMultiLayerPeers) {
  EXPECT_THROW(ExternalOracle(echo({"--layers", "2"}), {make_synthetic_clip(16, 4, 4, 1, 0)}, 16,
                              2000ms),
               ProtocolError);
}

TEST(SplitCommand, Whitespace) {
  EXPECT_EQ(split_command("  a  b\tc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_command("").empty());
}
