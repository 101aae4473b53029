#include "u3d/stream.hpp"

#include "u3d/error.hpp"
#include "u3d/tensor_io.hpp"
#include "u3d/video.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>

namespace u3d {

ClipSource::ClipSource(VideoClip clip, std::size_t total_frames)
    : clip_(std::move(clip)), total_(total_frames ? total_frames : clip_.frames()) {}

bool ClipSource::next(Tensor& frame) {
  if (produced_ >= total_ || clip_.frames() == 0) return false;
  const Tensor::Dims dims{clip_.height(), clip_.width(), clip_.channels()};
  if (frame.dims() != dims) frame = Tensor(dims);
  const float* src = clip_.frame(produced_ % clip_.frames());
  std::copy(src, src + clip_.frame_size(), frame.data());
  ++produced_;
  return true;
}

bool TensorStreamSource::next(Tensor& frame) {
  if (in_.peek() == std::char_traits<char>::eof()) return false;
  frame = read_tensor(in_);
  return true;
}

void TensorStreamSink::write(const Tensor& frame) { write_tensor(frame, out_); }

VideoClip ClipCollector::clip() const {
  if (frames_.empty()) throw ValidationError("no frames collected");
  const auto& d = frames_.front().dims();
  Tensor out({static_cast<std::uint32_t>(frames_.size()), d[0], d[1], d[2]});
  const std::size_t n = frames_.front().size();
  for (std::size_t i = 0; i < frames_.size(); ++i)
    std::copy(frames_[i].data(), frames_[i].data() + n, out.data() + i * n);
  return VideoClip(std::move(out));
}

TimingSummary summarize(std::vector<double> seconds) {
  TimingSummary s;
  if (seconds.empty()) return s;
  std::sort(seconds.begin(), seconds.end());
  s.mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / double(seconds.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(seconds.size())));
  s.p95 = seconds[std::max<std::size_t>(rank, 1) - 1];
  s.max = seconds.back();
  return s;
}

nlohmann::ordered_json to_json(const LatencyReport& r) {
  auto timing = [](const TimingSummary& t) {
    return nlohmann::ordered_json{{"mean", t.mean}, {"p95", t.p95}, {"max", t.max}};
  };
  return {{"frames", r.frames},
          {"perturbed_frames", r.perturbed_frames},
          {"inject_seconds", timing(r.inject)},
          {"end_to_end_seconds", timing(r.end_to_end)},
          {"frame_budget_seconds", r.frame_budget}};
}

LatencyReport stream_inject(FrameSource& source, FrameSink& sink, const PerturbationVolume& vol,
                            const StreamConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  if (vol.volume.ndim() != 3 || vol.volume.empty())
    throw ValidationError("stream needs a non-empty (T, H, W) volume");

  std::vector<double> inject_times, cycle_times;
  LatencyReport report;
  Tensor frame;
  for (std::int64_t t = 0;; ++t) {
    const auto cycle_start = Clock::now();
    if (!source.next(frame)) break;
    if (frame.ndim() != 3 || frame.dim(0) != vol.height() || frame.dim(1) != vol.width() ||
        (frame.dim(2) != 1 && frame.dim(2) != 3))
      throw ValidationError("frame " + std::to_string(t) + " does not match the volume geometry");
    if (t >= cfg.attack_start) {
      const float* slice = vol.frame(wrap_index(t - cfg.attack_start + cfg.offset, vol.frames()));
      const auto inject_start = Clock::now();
      inject_frame(frame.data(), frame.data(), vol.frame_size(), frame.dim(2), slice);
      inject_times.push_back(std::chrono::duration<double>(Clock::now() - inject_start).count());
      ++report.perturbed_frames;
    }
    sink.write(frame);
    cycle_times.push_back(std::chrono::duration<double>(Clock::now() - cycle_start).count());
  }
  report.frames = cycle_times.size();
  report.inject = summarize(std::move(inject_times));
  report.end_to_end = summarize(std::move(cycle_times));
  return report;
}

}  // namespace u3d
