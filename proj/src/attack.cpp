#include "u3d/attack.hpp"

#include "u3d/error.hpp"
#include "u3d/noise.hpp"
#include "u3d/parallel.hpp"

#include <algorithm>
#include <vector>

namespace u3d {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::PSO: return "pso";
    case OptimizerKind::GA: return "ga";
    case OptimizerKind::SA: return "sa";
    case OptimizerKind::TS: return "ts";
    case OptimizerKind::Random: return "random";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::PSO, OptimizerKind::GA, OptimizerKind::SA, OptimizerKind::TS,
                 OptimizerKind::Random})
    if (name == to_string(k)) return k;
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

std::size_t pso_budget(const PSOConfig& cfg) {
  return static_cast<std::size_t>(cfg.swarm_size) * static_cast<std::size_t>(cfg.max_iters + 1);
}

GAConfig matched_ga(std::size_t budget, std::uint64_t seed) {
  GAConfig g;
  g.seed = seed;
  // Tiny budgets shrink the population so the initial sample fits.
  if (budget < static_cast<std::size_t>(g.population))
    g.population = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(budget));
  const auto pop = static_cast<std::size_t>(g.population);
  const auto per_gen = pop - static_cast<std::size_t>(g.elites);
  g.generations = budget > pop ? static_cast<int>((budget - pop) / per_gen) : 0;
  return g;
}

SAConfig matched_sa(std::size_t budget, std::uint64_t seed) {
  SAConfig s;
  s.seed = seed;
  s.iterations = budget > 0 ? static_cast<int>(budget - 1) : 0;
  return s;
}

TSConfig matched_ts(std::size_t budget, Eigen::Index dims, std::uint64_t seed) {
  TSConfig t;
  t.seed = seed;
  const auto per_iter = 2 * static_cast<std::size_t>(std::max<Eigen::Index>(dims, 1));
  t.iterations = budget > 0 ? static_cast<int>((budget - 1) / per_iter) : 0;
  return t;
}

AttackSettings matched_settings(OptimizerKind k, const PSOConfig& pso, Eigen::Index dims) {
  AttackSettings s;
  s.optimizer = k;
  s.pso = pso;
  const std::size_t budget = pso_budget(pso);
  s.ga = matched_ga(budget, pso.seed);
  s.sa = matched_sa(budget, pso.seed);
  s.ts = matched_ts(budget, dims, pso.seed);
  s.random_evals = budget;
  return s;
}

HybridObjective::HybridObjective(const FitnessEvaluator& evaluator, const NoiseSpec& base,
                                 const HybridConfig& hybrid, unsigned threads)
    : evaluator_(evaluator), base_(base), hybrid_(hybrid), threads_(threads) {
  if (!hybrid_.oracle || !hybrid_.budget)
    throw ValidationError("hybrid objective needs an oracle and a budget");
  if (hybrid_.omega < 0.0) throw ValidationError("omega must be >= 0");
}

Eigen::VectorXd HybridObjective::operator()(const Eigen::MatrixXd& points) {
  const auto n = static_cast<std::size_t>(points.cols());
  const auto& v0 = evaluator_.videos().front();
  std::vector<PerturbationVolume> volumes(n);
  Eigen::VectorXd values(points.cols());
  parallel_for(n, threads_, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    volumes[i] = generate_volume(decode(base_, points.col(c)), v0.height(), v0.width());
    values[c] = evaluator_.evaluate(volumes[i]);
  });
  const std::size_t per_query = hybrid_.oracle->query_set_size();
  for (std::size_t i = 0; i < n; ++i) {
    if (hybrid_.budget->try_charge(per_query)) {
      values[static_cast<Eigen::Index>(i)] += hybrid_.omega * hybrid_.oracle->success_rate(volumes[i]);
      ++hybrid_evals_;
    } else {
      ++fallback_evals_;
    }
  }
  return values;
}

OptimizerReport run_optimizer(const SearchSpace& space, const AttackSettings& settings,
                              const BatchObjective& f) {
  switch (settings.optimizer) {
    case OptimizerKind::PSO: return pso_optimize(space, settings.pso, f);
    case OptimizerKind::GA: return ga_optimize(space, settings.ga, f);
    case OptimizerKind::SA: return sa_optimize(space, settings.sa, f);
    case OptimizerKind::TS: return ts_optimize(space, settings.ts, f);
    case OptimizerKind::Random:
      return random_search(space, settings.random_evals, settings.pso.seed, f);
  }
  throw ValidationError("unknown optimizer");
}

AttackResult noise_opt(const FitnessEvaluator& evaluator, const SearchSpace& space,
                       const NoiseSpec& base, const AttackSettings& settings,
                       const HybridConfig* hybrid) {
  if (evaluator.videos().empty()) throw ValidationError("empty video set");
  if (space.size() != SearchSpace::for_variant(base.variant()).size())
    throw ValidationError("search space does not match the noise variant");

  AttackResult result;
  if (hybrid) {
    const std::size_t before = hybrid->budget ? hybrid->budget->used() : 0;
    HybridObjective objective(evaluator, base, *hybrid, settings.threads);
    result.report = run_optimizer(space, settings, [&](const Eigen::MatrixXd& p) {
      return objective(p);
    });
    result.oracle_queries = hybrid->budget->used() - before;
    result.hybrid_evals = objective.hybrid_evals();
    result.fallback_evals = objective.fallback_evals();
  } else {
    const auto f = make_batch_objective(
        [&](const Eigen::VectorXd& x) { return evaluator(decode(base, x)); }, settings.threads);
    result.report = run_optimizer(space, settings, f);
  }
  result.best_spec = decode(base, result.report.best_position);
  return result;
}

}  // namespace u3d
