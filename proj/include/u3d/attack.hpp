#pragma once

// Parameter search for a universal perturbation: an optimizer over the noise
// variant's search box, driven by the feature-space fitness and optionally by
// a query oracle under a hard budget.

#include "u3d/objective.hpp"
#include "u3d/optimizers.hpp"
#include "u3d/search_space.hpp"

#include <cstddef>
#include <string>
#include <string_view>

namespace u3d {

enum class OptimizerKind { PSO, GA, SA, TS, Random };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct AttackSettings {
  OptimizerKind optimizer = OptimizerKind::PSO;
  PSOConfig pso;
  GAConfig ga;
  SAConfig sa;
  TSConfig ts;
  std::size_t random_evals = 820;
  unsigned threads = 1;  // parallel fitness evaluations per batch
};

// Evaluation count of a PSO run, m * (h + 1).
std::size_t pso_budget(const PSOConfig& cfg);

// Alternate configs spending at most `budget` evaluations (as close as each
// optimizer's batch structure allows) on a d-dimensional box.
GAConfig matched_ga(std::size_t budget, std::uint64_t seed);
SAConfig matched_sa(std::size_t budget, std::uint64_t seed);
TSConfig matched_ts(std::size_t budget, Eigen::Index dims, std::uint64_t seed);

// Gives every optimizer the same seed and an evaluation budget matched to pso.
AttackSettings matched_settings(OptimizerKind k, const PSOConfig& pso, Eigen::Index dims);

struct AttackResult {
  OptimizerReport report;
  NoiseSpec best_spec;
  std::size_t oracle_queries = 0;   // video-queries charged to the budget
  std::size_t hybrid_evals = 0;     // evaluations that included the oracle term
  std::size_t fallback_evals = 0;   // evaluations after the budget ran out
};

// Batch objective for the hybrid attack. Plain fitness is computed for the
// whole batch in parallel; oracle queries then run one point at a time in
// batch order, so the budget is spent identically for any thread count. Once
// the budget cannot cover a full query set, points get plain fitness.
class HybridObjective {
 public:
  HybridObjective(const FitnessEvaluator& evaluator, const NoiseSpec& base,
                  const HybridConfig& hybrid, unsigned threads);

  Eigen::VectorXd operator()(const Eigen::MatrixXd& points);

  std::size_t hybrid_evals() const { return hybrid_evals_; }
  std::size_t fallback_evals() const { return fallback_evals_; }

 private:
  const FitnessEvaluator& evaluator_;
  NoiseSpec base_;
  HybridConfig hybrid_;
  unsigned threads_;
  std::size_t hybrid_evals_ = 0;
  std::size_t fallback_evals_ = 0;
};

// Runs the selected optimizer over `space` (which must match base.variant()).
// With `hybrid` set, fitness gains omega * oracle success rate while the
// budget lasts.
AttackResult noise_opt(const FitnessEvaluator& evaluator, const SearchSpace& space,
                       const NoiseSpec& base, const AttackSettings& settings,
                       const HybridConfig* hybrid = nullptr);

// Dispatch on settings.optimizer for an arbitrary batch objective.
OptimizerReport run_optimizer(const SearchSpace& space, const AttackSettings& settings,
                              const BatchObjective& f);

}  // namespace u3d
