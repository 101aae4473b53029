#pragma once

#include "u3d/external.hpp"
#include "u3d/features.hpp"
#include "u3d/noise_spec.hpp"
#include "u3d/volume.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace u3d {

// How clips longer than the extractor window are cut.
enum class WindowStrategy {
  First,         // frames [0, T_in)
  RandomSeeded,  // one window at a seeded random start
  AllWindows,    // mean over non-overlapping windows at starts 0, T_in, 2 T_in, ...
};

struct FitnessConfig {
  std::uint32_t sample_count = 8;  // shifts sampled per video (I)
  std::uint64_t rng_seed = 0;
  bool exhaustive = false;  // enumerate every shift in [0, T) instead of sampling
  WindowStrategy window = WindowStrategy::First;
  DistanceConfig distance;
  unsigned threads = 1;
};

// 64-bit FNV-1a over a clip's dims and pixel bytes.
std::uint64_t content_hash(const VideoClip& clip);

// Attack objective over a fixed video set: mean over videos of the mean over
// shifts tau of the summed layer distances between v and v + shift(xi, tau).
// Clean features are computed once at construction.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const FeatureExtractor& extractor, std::vector<VideoClip> videos,
                   FitnessConfig cfg);

  double evaluate(const PerturbationVolume& vol) const;
  // Generates the volume for each distinct frame size, then evaluates.
  double operator()(const NoiseSpec& spec) const;

  // Shifts used for video i under period T. Seeded by the video's content, so
  // they follow the video through any reordering of the set.
  std::vector<std::uint32_t> shifts_for(std::size_t video, std::uint32_t T) const;

  const std::vector<VideoClip>& videos() const { return videos_; }
  const FitnessConfig& config() const { return cfg_; }
  const FeatureExtractor& extractor() const { return extractor_; }

 private:
  struct Window {
    std::size_t video;
    VideoClip clip;
    std::vector<Tensor> clean_features;
  };

  const FeatureExtractor& extractor_;
  std::vector<VideoClip> videos_;
  std::vector<std::uint64_t> hashes_;
  FitnessConfig cfg_;
  std::vector<Window> windows_;
};

double fitness(const FeatureExtractor& extractor, const std::vector<VideoClip>& videos,
               const NoiseSpec& spec, const FitnessConfig& cfg);

// Label-only access to a target model over a fixed query set v_1..v_n.
class QueryOracle {
 public:
  virtual ~QueryOracle() = default;

  virtual std::size_t query_set_size() const = 0;
  virtual std::vector<int> clean_labels() const = 0;
  // Labels of v_i + xi with xi started at `offset`.
  virtual std::vector<int> perturbed_labels(const PerturbationVolume& vol,
                                            std::int64_t offset = 0) = 0;

  // Fraction of the query set whose label changes.
  double success_rate(const PerturbationVolume& vol, std::int64_t offset = 0);
};

// Toy target model: argmax of a seeded random linear map applied to the
// standardized, globally pooled features of a (separately seeded) builtin
// conv stack, over 10 classes.
class BuiltinOracle final : public QueryOracle {
 public:
  static constexpr int kClasses = 10;

  BuiltinOracle(std::uint64_t classifier_seed, std::vector<VideoClip> query_videos,
                unsigned threads = 1);

  std::size_t query_set_size() const override { return videos_.size(); }
  std::vector<int> clean_labels() const override { return clean_; }
  std::vector<int> perturbed_labels(const PerturbationVolume& vol,
                                    std::int64_t offset = 0) override;

  int classify(const VideoClip& clip) const;

 private:
  Eigen::VectorXd pooled(const VideoClip& clip) const;

  BuiltinExtractor extractor_;
  std::vector<VideoClip> videos_;
  Eigen::MatrixXd projection_;
  Eigen::VectorXd center_;
  Eigen::VectorXd scale_;
  std::vector<int> clean_;
  unsigned threads_;
  std::mutex mutex_;
};

std::unique_ptr<QueryOracle> builtin_oracle(std::uint64_t classifier_seed,
                                            std::vector<VideoClip> query_videos,
                                            unsigned threads = 1);

// Oracle served by an external process speaking the extractor protocol with
// M = 1 and a one-element label tensor per response.
class ExternalOracle final : public QueryOracle {
 public:
  ExternalOracle(const std::vector<std::string>& argv, std::vector<VideoClip> query_videos,
                 std::uint32_t window_frames = 16,
                 std::chrono::milliseconds timeout = kDefaultWireTimeout);

  std::size_t query_set_size() const override { return videos_.size(); }
  std::vector<int> clean_labels() const override { return clean_; }
  std::vector<int> perturbed_labels(const PerturbationVolume& vol,
                                    std::int64_t offset = 0) override;

 private:
  int label_of(const VideoClip& clip);

  ExternalProcess process_;
  std::vector<VideoClip> videos_;
  std::uint32_t window_;
  std::vector<int> clean_;
  std::mutex mutex_;
};

// Hard cap on oracle video-queries.
class QueryBudget {
 public:
  explicit QueryBudget(std::size_t limit) : limit_(limit) {}

  std::size_t limit() const { return limit_; }
  std::size_t used() const { return used_; }
  std::size_t remaining() const { return limit_ - used_; }
  // Charges n queries if they fit; otherwise leaves the counter untouched.
  bool try_charge(std::size_t n);

 private:
  std::size_t limit_;
  std::size_t used_ = 0;
};

struct HybridConfig {
  double omega = 10.0;
  QueryOracle* oracle = nullptr;
  QueryBudget* budget = nullptr;
};

// fitness(vol) + omega * success_rate(vol). Charges the budget one query per
// query-set video; throws BudgetExhausted (without querying) if it cannot.
double hybrid_fitness(const FitnessEvaluator& evaluator, const PerturbationVolume& vol,
                      const HybridConfig& h);
double hybrid_fitness(const FitnessEvaluator& evaluator, const NoiseSpec& spec,
                      const HybridConfig& h);

}  // namespace u3d
