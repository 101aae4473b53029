#include "u3d/objective.hpp"

#include "u3d/error.hpp"
#include "u3d/noise.hpp"
#include "u3d/parallel.hpp"
#include "u3d/rng.hpp"
#include "u3d/video.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>

namespace u3d {

std::uint64_t content_hash(const VideoClip& clip) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::uint32_t d : clip.tensor().dims()) mix(&d, sizeof d);
  mix(clip.tensor().data(), clip.tensor().size() * sizeof(float));
  return h;
}

FitnessEvaluator::FitnessEvaluator(const FeatureExtractor& extractor,
                                   std::vector<VideoClip> videos, FitnessConfig cfg)
    : extractor_(extractor), videos_(std::move(videos)), cfg_(std::move(cfg)) {
  if (videos_.empty()) throw ValidationError("fitness needs at least one video");
  if (cfg_.sample_count < 1) throw ValidationError("sample_count must be >= 1");
  validate(cfg_.distance);
  const std::uint32_t span = extractor_.window_frames();
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const auto& v = videos_[i];
    hashes_.push_back(content_hash(v));
    if (v.frames() < span)
      throw ValidationError("video " + std::to_string(i) + " has " + std::to_string(v.frames()) +
                            " frames; the extractor window needs " + std::to_string(span));
    switch (cfg_.window) {
      case WindowStrategy::First:
        windows_.push_back({i, v.window(0, span), {}});
        break;
      case WindowStrategy::RandomSeeded: {
        Rng rng(derive_seed(cfg_.rng_seed, {hashes_[i], 0x714d}));
        const auto start = uniform_index(rng, v.frames() - span + 1);
        windows_.push_back({i, v.window(start, span), {}});
        break;
      }
      case WindowStrategy::AllWindows:
        for (std::size_t s = 0; s + span <= v.frames(); s += span)
          windows_.push_back({i, v.window(s, span), {}});
        break;
    }
  }
  parallel_for(windows_.size(), cfg_.threads, [&](std::size_t w) {
    windows_[w].clean_features = extractor_.extract(windows_[w].clip);
  });
}

std::vector<std::uint32_t> FitnessEvaluator::shifts_for(std::size_t video, std::uint32_t T) const {
  std::vector<std::uint32_t> shifts;
  if (cfg_.exhaustive) {
    shifts.resize(T);
    std::iota(shifts.begin(), shifts.end(), 0u);
    return shifts;
  }
  Rng rng(derive_seed(cfg_.rng_seed, {hashes_.at(video)}));
  shifts.resize(cfg_.sample_count);
  for (auto& s : shifts) s = static_cast<std::uint32_t>(uniform_index(rng, T));
  return shifts;
}

double FitnessEvaluator::evaluate(const PerturbationVolume& vol) const {
  struct Task {
    std::size_t window;
    std::uint32_t shift;
  };
  std::vector<Task> tasks;
  std::vector<std::size_t> first_task(windows_.size() + 1, 0);
  for (std::size_t w = 0; w < windows_.size(); ++w) {
    first_task[w] = tasks.size();
    for (std::uint32_t s : shifts_for(windows_[w].video, vol.frames())) tasks.push_back({w, s});
  }
  first_task[windows_.size()] = tasks.size();

  std::vector<double> distance(tasks.size());
  parallel_for(tasks.size(), cfg_.threads, [&](std::size_t k) {
    const Window& w = windows_[tasks[k].window];
    const VideoClip adv = apply_perturbation(w.clip, vol, tasks[k].shift);
    distance[k] = feature_set_distance(w.clean_features, extractor_.extract(adv), cfg_.distance);
  });

  // Fixed-order reduction: shifts -> windows -> videos.
  std::vector<double> video_sum(videos_.size(), 0.0);
  std::vector<std::size_t> video_windows(videos_.size(), 0);
  for (std::size_t w = 0; w < windows_.size(); ++w) {
    double sum = 0.0;
    for (std::size_t k = first_task[w]; k < first_task[w + 1]; ++k) sum += distance[k];
    video_sum[windows_[w].video] += sum / double(first_task[w + 1] - first_task[w]);
    ++video_windows[windows_[w].video];
  }
  double total = 0.0;
  for (std::size_t v = 0; v < videos_.size(); ++v) total += video_sum[v] / double(video_windows[v]);
  return total / double(videos_.size());
}

double FitnessEvaluator::operator()(const NoiseSpec& spec) const {
  const auto& v0 = videos_.front();
  bool uniform_size = true;
  for (const auto& v : videos_)
    uniform_size &= v.height() == v0.height() && v.width() == v0.width();
  if (!uniform_size)
    throw ValidationError("all videos in a fitness set must share one frame size");
  return evaluate(generate_volume(spec, v0.height(), v0.width()));
}

double fitness(const FeatureExtractor& extractor, const std::vector<VideoClip>& videos,
               const NoiseSpec& spec, const FitnessConfig& cfg) {
  return FitnessEvaluator(extractor, videos, cfg)(spec);
}

double QueryOracle::success_rate(const PerturbationVolume& vol, std::int64_t offset) {
  const auto clean = clean_labels();
  const auto adv = perturbed_labels(vol, offset);
  if (clean.empty()) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) changed += clean[i] != adv[i];
  return double(changed) / double(clean.size());
}

BuiltinOracle::BuiltinOracle(std::uint64_t classifier_seed, std::vector<VideoClip> query_videos,
                             unsigned threads)
    : extractor_(derive_seed(classifier_seed, {0x0ac1e})),
      videos_(std::move(query_videos)),
      threads_(threads) {
  if (videos_.empty()) throw ValidationError("oracle needs at least one query video");
  for (const auto& v : videos_)
    if (v.frames() < extractor_.window_frames())
      throw ValidationError("query videos need at least " +
                            std::to_string(extractor_.window_frames()) + " frames");

  Eigen::Index features = 0;
  for (const auto& st : extractor_.stages()) features += st.out_channels;
  Rng rng(derive_seed(classifier_seed, {0x9e0}));
  projection_.resize(kClasses, features);
  for (Eigen::Index j = 0; j < features; ++j)
    for (Eigen::Index i = 0; i < kClasses; ++i) projection_(i, j) = standard_normal(rng);

  // Standardize pooled features with query-set statistics so that labels
  // spread across classes instead of collapsing onto one.
  std::vector<Eigen::VectorXd> pooled_clean(videos_.size());
  parallel_for(videos_.size(), threads_, [&](std::size_t i) { pooled_clean[i] = pooled(videos_[i]); });
  center_ = Eigen::VectorXd::Zero(features);
  for (const auto& p : pooled_clean) center_ += p;
  center_ /= double(videos_.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(features);
  for (const auto& p : pooled_clean) var += (p - center_).cwiseAbs2();
  var /= double(videos_.size());
  scale_ = (var.cwiseSqrt().array() + 1e-3 * center_.cwiseAbs().array() + 1e-9).inverse();

  clean_.resize(videos_.size());
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const Eigen::VectorXd scores =
        projection_ * ((pooled_clean[i] - center_).cwiseProduct(scale_));
    Eigen::Index best;
    scores.maxCoeff(&best);
    clean_[i] = static_cast<int>(best);
  }
}

Eigen::VectorXd BuiltinOracle::pooled(const VideoClip& clip) const {
  const auto layers = extractor_.extract(clip.window(0, extractor_.window_frames()));
  std::vector<double> out;
  for (const auto& layer : layers) {
    const std::uint32_t channels = layer.dims().back();
    const Eigen::Index positions = static_cast<Eigen::Index>(layer.size() / channels);
    const Eigen::Map<const Eigen::MatrixXf> m(layer.data(), channels, positions);
    const Eigen::VectorXd mean = m.cast<double>().rowwise().mean();
    out.insert(out.end(), mean.data(), mean.data() + mean.size());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

int BuiltinOracle::classify(const VideoClip& clip) const {
  const Eigen::VectorXd scores = projection_ * ((pooled(clip) - center_).cwiseProduct(scale_));
  Eigen::Index best;
  scores.maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<int> BuiltinOracle::perturbed_labels(const PerturbationVolume& vol,
                                                 std::int64_t offset) {
  std::lock_guard lock(mutex_);
  std::vector<int> labels(videos_.size());
  parallel_for(videos_.size(), threads_, [&](std::size_t i) {
    labels[i] = classify(apply_perturbation(videos_[i], vol, offset));
  });
  return labels;
}

std::unique_ptr<QueryOracle> builtin_oracle(std::uint64_t classifier_seed,
                                            std::vector<VideoClip> query_videos,
                                            unsigned threads) {
  return std::make_unique<BuiltinOracle>(classifier_seed, std::move(query_videos), threads);
}

ExternalOracle::ExternalOracle(const std::vector<std::string>& argv,
                               std::vector<VideoClip> query_videos, std::uint32_t window_frames,
                               std::chrono::milliseconds timeout)
    : process_(argv, timeout), videos_(std::move(query_videos)), window_(window_frames) {
  if (videos_.empty()) throw ValidationError("oracle needs at least one query video");
  if (process_.channel().read_handshake() != 1)
    throw ProtocolError("label oracle must declare exactly one output tensor");
  for (const auto& v : videos_) clean_.push_back(label_of(v));
}

int ExternalOracle::label_of(const VideoClip& clip) {
  const auto out = external_extract(clip.window(0, window_), process_.channel(), 1);
  if (out.front().size() != 1) throw ProtocolError("label response must hold one element");
  return static_cast<int>(std::lround(out.front()[0]));
}

std::vector<int> ExternalOracle::perturbed_labels(const PerturbationVolume& vol,
                                                  std::int64_t offset) {
  std::lock_guard lock(mutex_);
  std::vector<int> labels;
  for (const auto& v : videos_) labels.push_back(label_of(apply_perturbation(v, vol, offset)));
  return labels;
}

bool QueryBudget::try_charge(std::size_t n) {
  if (n > remaining()) return false;
  used_ += n;
  return true;
}

double hybrid_fitness(const FitnessEvaluator& evaluator, const PerturbationVolume& vol,
                      const HybridConfig& h) {
  if (!h.oracle || !h.budget) throw ValidationError("hybrid fitness needs an oracle and a budget");
  if (h.omega < 0.0) throw ValidationError("omega must be >= 0");
  if (!h.budget->try_charge(h.oracle->query_set_size()))
    throw BudgetExhausted("query budget exhausted (" + std::to_string(h.budget->used()) + " of " +
                          std::to_string(h.budget->limit()) + " used)");
  const double base = evaluator.evaluate(vol);
  return base + h.omega * h.oracle->success_rate(vol);
}

double hybrid_fitness(const FitnessEvaluator& evaluator, const NoiseSpec& spec,
                      const HybridConfig& h) {
  const auto& v0 = evaluator.videos().front();
  return hybrid_fitness(evaluator, generate_volume(spec, v0.height(), v0.width()), h);
}

}  // namespace u3d
