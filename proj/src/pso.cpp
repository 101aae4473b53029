#include "u3d/optimizers.hpp"

#include "u3d/error.hpp"
#include "u3d/parallel.hpp"

#include <algorithm>
#include <chrono>

namespace u3d {
namespace {

// Lowest index wins ties.
Eigen::Index argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Eigen::VectorXd evaluate(const BatchObjective& f, const Eigen::MatrixXd& points) {
  Eigen::VectorXd values = f(points);
  if (values.size() != points.cols())
    throw ValidationError("objective returned the wrong number of values");
  return values;
}

}  // namespace

BatchObjective make_batch_objective(std::function<double(const Eigen::VectorXd&)> f,
                                    unsigned threads) {
  return [f = std::move(f), threads](const Eigen::MatrixXd& points) {
    Eigen::VectorXd out(points.cols());
    parallel_for(static_cast<std::size_t>(points.cols()), threads, [&](std::size_t i) {
      out[static_cast<Eigen::Index>(i)] = f(points.col(static_cast<Eigen::Index>(i)));
    });
    return out;
  };
}

nlohmann::ordered_json report_json(const OptimizerReport& r, const SearchSpace& space) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  const Eigen::VectorXd x = space.round_integers(r.best_position);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const auto& dim = space.dims()[static_cast<std::size_t>(j)];
    if (dim.kind == DimKind::Integer)
      params[dim.name] = static_cast<long long>(x[j]);
    else
      params[dim.name] = x[j];
  }
  nlohmann::ordered_json j;
  j["best_params"] = params;
  j["best_fitness"] = r.best_fitness;
  j["trace"] = r.trace;
  j["evals"] = r.evals;
  j["seconds"] = r.seconds;
  if (!r.current_trace.empty()) j["current_trace"] = r.current_trace;
  return j;
}

void validate(const PSOConfig& cfg) {
  if (cfg.swarm_size < 2) throw ValidationError("swarm size must be >= 2");
  if (cfg.max_iters < 0) throw ValidationError("max_iters must be >= 0");
  if (cfg.c1 < 0 || cfg.c2 < 0) throw ValidationError("c1 and c2 must be >= 0");
  if (cfg.w_end > cfg.w_start) throw ValidationError("inertia must end at or below its start");
  if (!(cfg.w_decay > 0)) throw ValidationError("inertia decay factor must be positive");
}

double next_inertia(double w, int k, const PSOConfig& cfg) {
  return std::max(cfg.w_end, w - (cfg.w_start - cfg.w_end) / (k * cfg.w_decay));
}

SwarmState pso_init(const SearchSpace& space, const PSOConfig& cfg, const BatchObjective& f) {
  validate(cfg);
  const Eigen::Index d = space.size(), m = cfg.swarm_size;
  SwarmState s;
  s.positions.resize(d, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(i), 0}));
    s.positions.col(i) = space.sample(rng);
  }
  s.velocities = Eigen::MatrixXd::Zero(d, m);
  s.fitness = evaluate(f, s.positions);
  s.personal_best = s.positions;
  s.personal_best_fitness = s.fitness;
  s.leader = argmax(s.personal_best_fitness);
  s.leader_fitness = s.personal_best_fitness[s.leader];
  s.iteration = 1;
  s.inertia = cfg.w_start;
  s.evals = static_cast<std::size_t>(m);
  return s;
}

SwarmState pso_step(const SwarmState& state, const SearchSpace& space, const PSOConfig& cfg,
                    const BatchObjective& f) {
  SwarmState next = state;
  const Eigen::Index d = space.size(), m = state.positions.cols();
  const Eigen::VectorXd vmax = cfg.velocity_limit * space.width();
  const Eigen::VectorXd leader = state.leader_position();

  for (Eigen::Index i = 0; i < m; ++i) {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(state.iteration)}));
    for (Eigen::Index j = 0; j < d; ++j) {
      const double r1 = uniform01(rng);
      const double r2 = uniform01(rng);
      const double x = state.positions(j, i);
      double v = state.inertia * state.velocities(j, i) +
                 cfg.c1 * r1 * (state.personal_best(j, i) - x) + cfg.c2 * r2 * (leader[j] - x);
      v = std::clamp(v, -vmax[j], vmax[j]);
      next.velocities(j, i) = v;
      next.positions(j, i) = std::clamp(x + v, space.lower()[j], space.upper()[j]);
    }
  }

  next.fitness = evaluate(f, next.positions);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (next.fitness[i] > next.personal_best_fitness[i]) {
      next.personal_best_fitness[i] = next.fitness[i];
      next.personal_best.col(i) = next.positions.col(i);
    }
  }
  next.leader = argmax(next.personal_best_fitness);
  next.leader_fitness = next.personal_best_fitness[next.leader];
  next.inertia = next_inertia(state.inertia, state.iteration, cfg);
  next.iteration = state.iteration + 1;
  next.evals = state.evals + static_cast<std::size_t>(m);
  return next;
}

OptimizerReport pso_optimize(const SearchSpace& space, const PSOConfig& cfg,
                             const BatchObjective& f) {
  const auto start = std::chrono::steady_clock::now();
  SwarmState s = pso_init(space, cfg, f);
  OptimizerReport r;
  r.optimizer = "pso";
  r.trace.push_back(s.leader_fitness);
  for (int k = 1; k <= cfg.max_iters; ++k) {
    s = pso_step(s, space, cfg, f);
    r.trace.push_back(s.leader_fitness);
  }
  r.best_position = s.leader_position();
  r.best_fitness = s.leader_fitness;
  r.evals = s.evals;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace u3d
