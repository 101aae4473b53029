#include "u3d/attack.hpp"
#include "u3d/error.hpp"
#include "u3d/noise.hpp"
#include "u3d/objective.hpp"
#include "u3d/video.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace u3d;

namespace {

std::vector<VideoClip> clips(std::size_t n, std::uint32_t frames = 16, std::uint32_t side = 16,
                             std::uint32_t channels = 1) {
  std::vector<VideoClip> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(make_synthetic_clip(frames, side, side, channels, 100 + i));
  return out;
}

NoiseSpec perlin(std::uint32_t T = 16, double eps = 8.0) {
  NoiseSpec s;
  s.T = T;
  s.epsilon = eps;
  s.seed = 3;
  return s;
}

// Mean over videos of the mean over every shift of the summed layer distances.
double exhaustive_oracle(const FeatureExtractor& ex, const std::vector<VideoClip>& videos,
                         const PerturbationVolume& vol) {
  double total = 0.0;
  for (const auto& v : videos) {
    const VideoClip w = v.window(0, ex.window_frames());
    double sum = 0.0;
    for (std::uint32_t tau = 0; tau < vol.frames(); ++tau)
      sum += total_distance(w, apply_perturbation(w, temporal_shift(vol, tau)), ex, {});
    total += sum / vol.frames();
  }
  return total / double(videos.size());
}

// Oracle reporting a fixed label change pattern and counting queries.
class CountingOracle final : public QueryOracle {
 public:
  CountingOracle(std::size_t n, bool flip) : n_(n), flip_(flip) {}
  std::size_t query_set_size() const override { return n_; }
  std::vector<int> clean_labels() const override { return std::vector<int>(n_, 0); }
  std::vector<int> perturbed_labels(const PerturbationVolume&, std::int64_t) override {
    queries += n_;
    std::vector<int> out(n_, 0);
    if (flip_) out[0] = 1;
    return out;
  }
  std::size_t queries = 0;

 private:
  std::size_t n_;
  bool flip_;
};

}  // namespace

TEST(Fitness, ZeroVolumeGivesZero) {
  const BuiltinExtractor ex(0);
  NoiseSpec s;
  GaborParams g;
  g.K = 0;
  s.params = g;
  EXPECT_EQ(fitness(ex, clips(2), s, {}), 0.0);
  const FitnessEvaluator ev(ex, clips(2), {});
  EXPECT_EQ(ev.evaluate(volume_from_tensor(Tensor({16, 16, 16}))), 0.0);
}

TEST(Fitness, PositiveForNonzeroVolume) {
  const BuiltinExtractor ex(0);
  EXPECT_GT(fitness(ex, clips(2), perlin(), {}), 0.0);
}

TEST(Fitness, ExhaustiveSinglePeriodEqualsUnshiftedDistance) {
  const BuiltinExtractor ex(0);
  const auto videos = clips(1);
  FitnessConfig cfg;
  cfg.exhaustive = true;
  const auto vol = generate_volume(perlin(1), 16, 16);
  const double expected = total_distance(videos[0], apply_perturbation(videos[0], vol), ex, {});
  EXPECT_EQ(FitnessEvaluator(ex, videos, cfg).evaluate(vol), expected);
}

TEST(Fitness, ExhaustiveMatchesIndependentOracle) {
  const BuiltinExtractor ex(1);
  const auto videos = clips(2, 16, 16);
  FitnessConfig cfg;
  cfg.exhaustive = true;
  const auto vol = generate_volume(perlin(4), 16, 16);
  const double expected = exhaustive_oracle(ex, videos, vol);
  EXPECT_NEAR(FitnessEvaluator(ex, videos, cfg).evaluate(vol), expected, 1e-12 * expected);
}

TEST(Fitness, MonteCarloApproachesExhaustive) {
  const BuiltinExtractor ex(0);
  const auto videos = clips(3, 16, 32);
  const auto vol = generate_volume(perlin(16), 32, 32);
  FitnessConfig exhaustive;
  exhaustive.exhaustive = true;
  FitnessConfig mc;
  mc.sample_count = 512;
  mc.rng_seed = 5;
  const double e = FitnessEvaluator(ex, videos, exhaustive).evaluate(vol);
  const double m = FitnessEvaluator(ex, videos, mc).evaluate(vol);
  EXPECT_LE(std::abs(m - e) / e, 0.05);
}

TEST(Fitness, ExhaustiveIgnoresSeed) {
  const BuiltinExtractor ex(0);
  FitnessConfig a, b;
  a.exhaustive = b.exhaustive = true;
  a.rng_seed = 1;
  b.rng_seed = 999;
  const auto vol = generate_volume(perlin(4), 16, 16);
  EXPECT_EQ(FitnessEvaluator(ex, clips(2), a).evaluate(vol),
            FitnessEvaluator(ex, clips(2), b).evaluate(vol));
}

TEST(Fitness, InvariantUnderVideoPermutation) {
  const BuiltinExtractor ex(0);
  auto videos = clips(3);
  const auto vol = generate_volume(perlin(), 16, 16);
  FitnessConfig cfg;
  cfg.sample_count = 3;
  const double a = FitnessEvaluator(ex, videos, cfg).evaluate(vol);
  std::swap(videos[0], videos[2]);
  const double b = FitnessEvaluator(ex, videos, cfg).evaluate(vol);
  EXPECT_NEAR(a, b, 1e-12 * a);
}

TEST(Fitness, ShiftsFollowVideoContent) {
  const BuiltinExtractor ex(0);
  auto videos = clips(2);
  FitnessConfig cfg;
  cfg.sample_count = 6;
  const FitnessEvaluator a(ex, videos, cfg);
  std::swap(videos[0], videos[1]);
  const FitnessEvaluator b(ex, videos, cfg);
  EXPECT_EQ(a.shifts_for(0, 16), b.shifts_for(1, 16));
  for (auto s : a.shifts_for(0, 5)) EXPECT_LT(s, 5u);
}

TEST(Fitness, BitIdenticalAcrossThreadCounts) {
  const BuiltinExtractor ex(0);
  FitnessConfig one, many;
  many.threads = 4;
  const auto vol = generate_volume(perlin(), 16, 16);
  EXPECT_EQ(FitnessEvaluator(ex, clips(3), one).evaluate(vol),
            FitnessEvaluator(ex, clips(3), many).evaluate(vol));
}

TEST(Fitness, WindowStrategies) {
  const BuiltinExtractor ex(0);
  const auto longer = clips(1, 40, 16);
  const auto vol = generate_volume(perlin(8), 16, 16);
  FitnessConfig cfg;
  cfg.exhaustive = true;
  cfg.window = WindowStrategy::AllWindows;
  const double all = FitnessEvaluator(ex, longer, cfg).evaluate(vol);
  double expected = 0.0;
  for (std::size_t s : {0u, 16u})
    expected += exhaustive_oracle(ex, {longer[0].window(s, 16)}, vol);
  EXPECT_NEAR(all, expected / 2, 1e-12 * all);

  cfg.window = WindowStrategy::First;
  EXPECT_EQ(FitnessEvaluator(ex, longer, cfg).evaluate(vol),
            exhaustive_oracle(ex, {longer[0].window(0, 16)}, vol));
  cfg.window = WindowStrategy::RandomSeeded;
  const double r = FitnessEvaluator(ex, longer, cfg).evaluate(vol);
  EXPECT_EQ(r, FitnessEvaluator(ex, longer, cfg).evaluate(vol));
}

TEST(Fitness, Errors) {
  const BuiltinExtractor ex(0);
  EXPECT_THROW(FitnessEvaluator(ex, {}, {}), ValidationError);
  EXPECT_THROW(FitnessEvaluator(ex, clips(1, 8), {}), ValidationError);
  FitnessConfig cfg;
  cfg.sample_count = 0;
  EXPECT_THROW(FitnessEvaluator(ex, clips(1), cfg), ValidationError);
  auto mixed = clips(1);
  mixed.push_back(make_synthetic_clip(16, 8, 8, 1, 0));
  EXPECT_THROW(FitnessEvaluator(ex, mixed, {})(perlin()), ValidationError);
}

TEST(BuiltinOracleTest, ZeroVolumeAndDeterminism) {
  const auto q = clips(6);
  BuiltinOracle a(4, q), b(4, q);
  EXPECT_EQ(a.clean_labels(), b.clean_labels());
  for (int label : a.clean_labels()) {
    EXPECT_GE(label, 0);
    EXPECT_LT(label, BuiltinOracle::kClasses);
  }
  EXPECT_EQ(a.success_rate(volume_from_tensor(Tensor({16, 16, 16}))), 0.0);
  const auto vol = generate_volume(perlin(16, 30.0), 16, 16);
  const double sr = a.success_rate(vol);
  EXPECT_GE(sr, 0.0);
  EXPECT_LE(sr, 1.0);
  EXPECT_EQ(sr, b.success_rate(vol));
  EXPECT_EQ(a.perturbed_labels(vol, 3), b.perturbed_labels(vol, 3));
  EXPECT_THROW(BuiltinOracle(1, {}), ValidationError);
}

TEST(BuiltinOracleTest, ThreadCountDoesNotChangeLabels) {
  const auto q = clips(5);
  BuiltinOracle a(9, q, 1), b(9, q, 3);
  const auto vol = generate_volume(perlin(16, 40.0), 16, 16);
  EXPECT_EQ(a.perturbed_labels(vol), b.perturbed_labels(vol));
}

TEST(Hybrid, ZeroOmegaEqualsFitnessAndCharges) {
  const BuiltinExtractor ex(0);
  const FitnessEvaluator ev(ex, clips(2), {});
  BuiltinOracle oracle(2, clips(4));
  QueryBudget budget(100);
  const auto vol = generate_volume(perlin(), 16, 16);
  const double h = hybrid_fitness(ev, vol, HybridConfig{0.0, &oracle, &budget});
  EXPECT_EQ(h, ev.evaluate(vol));
  EXPECT_EQ(budget.used(), 4u);
}

TEST(Hybrid, ConstantZeroOracleEqualsFitness) {
  const BuiltinExtractor ex(0);
  const FitnessEvaluator ev(ex, clips(1), {});
  CountingOracle oracle(3, false);
  QueryBudget budget(10);
  const auto vol = generate_volume(perlin(), 16, 16);
  EXPECT_EQ(hybrid_fitness(ev, vol, HybridConfig{25.0, &oracle, &budget}), ev.evaluate(vol));
}

TEST(Hybrid, AddsWeightedSuccessRate) {
  const BuiltinExtractor ex(0);
  const FitnessEvaluator ev(ex, clips(1), {});
  CountingOracle oracle(4, true);
  QueryBudget budget(10);
  const auto vol = generate_volume(perlin(), 16, 16);
  EXPECT_DOUBLE_EQ(hybrid_fitness(ev, vol, HybridConfig{10.0, &oracle, &budget}),
                   ev.evaluate(vol) + 10.0 * 0.25);
}

TEST(Hybrid, ExhaustedBudgetThrowsBeforeQuerying) {
  const BuiltinExtractor ex(0);
  const FitnessEvaluator ev(ex, clips(1), {});
  CountingOracle oracle(4, true);
  QueryBudget budget(6);
  const auto vol = generate_volume(perlin(), 16, 16);
  hybrid_fitness(ev, vol, HybridConfig{1.0, &oracle, &budget});
  EXPECT_EQ(oracle.queries, 4u);
  EXPECT_THROW(hybrid_fitness(ev, vol, HybridConfig{1.0, &oracle, &budget}), BudgetExhausted);
  EXPECT_EQ(oracle.queries, 4u);
  EXPECT_EQ(budget.used(), 4u);
  EXPECT_THROW(hybrid_fitness(ev, vol, HybridConfig{-1.0, &oracle, &budget}), ValidationError);
}

TEST(Hybrid, OptimizationRespectsBudgetAndFallsBack) {
  const BuiltinExtractor ex(0);
  const FitnessEvaluator ev(ex, clips(1), {});
  for (std::size_t limit : {0u, 7u, 40u, 1000u}) {
    CountingOracle oracle(5, true);
    QueryBudget budget(limit);
    HybridConfig h{10.0, &oracle, &budget};
    AttackSettings settings;
    settings.pso.swarm_size = 4;
    settings.pso.max_iters = 3;
    const auto r = noise_opt(ev, SearchSpace::perlin(), perlin(), settings, &h);
    EXPECT_LE(budget.used(), limit);
    EXPECT_EQ(oracle.queries, budget.used());
    EXPECT_EQ(r.oracle_queries, budget.used());
    EXPECT_EQ(r.hybrid_evals + r.fallback_evals, r.report.evals);
    EXPECT_EQ(r.hybrid_evals, std::min<std::size_t>(limit / 5, 16));
  }
}
