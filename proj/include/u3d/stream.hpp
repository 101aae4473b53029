#pragma once

// Frame-by-frame injection for live streams. Each (H, W, C) frame is
// perturbed in place and forwarded; timing covers the inject call alone and
// the full read-inject-write cycle.

#include "u3d/tensor.hpp"
#include "u3d/volume.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace u3d {

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // Fills `frame` with the next (H, W, C) frame; false at end of stream.
  virtual bool next(Tensor& frame) = 0;
};

class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void write(const Tensor& frame) = 0;
};

// Replays a clip's frames cyclically until `total_frames` have been produced
// (0 means one pass).
class ClipSource final : public FrameSource {
 public:
  explicit ClipSource(VideoClip clip, std::size_t total_frames = 0);
  bool next(Tensor& frame) override;

 private:
  VideoClip clip_;
  std::size_t total_;
  std::size_t produced_ = 0;
};

// Consecutive U3DT (H, W, C) tensors. EOF on a tensor boundary ends the
// stream; anything else malformed throws FormatError.
class TensorStreamSource final : public FrameSource {
 public:
  explicit TensorStreamSource(std::istream& in) : in_(in) {}
  bool next(Tensor& frame) override;

 private:
  std::istream& in_;
};

class TensorStreamSink final : public FrameSink {
 public:
  explicit TensorStreamSink(std::ostream& out) : out_(out) {}
  void write(const Tensor& frame) override;

 private:
  std::ostream& out_;
};

// Keeps every frame; clip() stacks them into a (N, H, W, C) clip.
class ClipCollector final : public FrameSink {
 public:
  void write(const Tensor& frame) override { frames_.push_back(frame); }
  std::size_t size() const { return frames_.size(); }
  VideoClip clip() const;

 private:
  std::vector<Tensor> frames_;
};

class NullSink final : public FrameSink {
 public:
  void write(const Tensor&) override {}
};

struct StreamConfig {
  std::int64_t attack_start = 0;  // frames before this pass through untouched
  std::int64_t offset = 0;        // frame attack_start + k gets slice (k + offset) mod T
};

struct TimingSummary {
  double mean = 0.0;
  double p95 = 0.0;  // nearest-rank
  double max = 0.0;
};

TimingSummary summarize(std::vector<double> seconds);

struct LatencyReport {
  TimingSummary inject;      // seconds per frame
  TimingSummary end_to_end;  // read + inject + write
  std::size_t frames = 0;
  std::size_t perturbed_frames = 0;
  double frame_budget = 1.0 / 30.0;
};

nlohmann::ordered_json to_json(const LatencyReport& r);

// Rejects an empty volume up front. Frames must be (H, W, C) with the
// volume's H and W and C in {1, 3}; a mismatch throws ValidationError.
LatencyReport stream_inject(FrameSource& source, FrameSink& sink, const PerturbationVolume& vol,
                            const StreamConfig& cfg = {});

}  // namespace u3d
