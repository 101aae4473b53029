#include "u3d/optimizers.hpp"

#include "u3d/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace u3d {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::VectorXd evaluate(const BatchObjective& f, const Eigen::MatrixXd& points) {
  Eigen::VectorXd values = f(points);
  if (values.size() != points.cols())
    throw ValidationError("objective returned the wrong number of values");
  return values;
}

double evaluate_one(const BatchObjective& f, const Eigen::VectorXd& x) {
  return evaluate(f, Eigen::MatrixXd(x))[0];
}

// Descending by fitness, lower index first on ties.
std::vector<Eigen::Index> ranking(const Eigen::VectorXd& fitness) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(fitness.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return fitness[a] > fitness[b]; });
  return order;
}

}  // namespace

// --- genetic algorithm ----------------------------------------------------

OptimizerReport ga_optimize(const SearchSpace& space, const GAConfig& cfg,
                            const BatchObjective& f) {
  if (cfg.population < 2) throw ValidationError("population must be >= 2");
  if (cfg.generations < 0) throw ValidationError("generations must be >= 0");
  if (cfg.elites < 0 || cfg.elites >= cfg.population)
    throw ValidationError("elites must be in [0, population)");
  if (cfg.tournament_size < 1) throw ValidationError("tournament size must be >= 1");

  const auto start = Clock::now();
  const Eigen::Index d = space.size(), n = cfg.population;
  Rng rng(derive_seed(cfg.seed, {0x9a}));

  Eigen::MatrixXd pop(d, n);
  for (Eigen::Index i = 0; i < n; ++i) pop.col(i) = space.sample(rng);
  Eigen::VectorXd fit = evaluate(f, pop);

  OptimizerReport r;
  r.optimizer = "ga";
  r.evals = static_cast<std::size_t>(n);
  Eigen::Index best_i = ranking(fit).front();
  r.best_position = pop.col(best_i);
  r.best_fitness = fit[best_i];
  r.trace.push_back(r.best_fitness);

  auto tournament = [&]() {
    Eigen::Index winner = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    for (int k = 1; k < cfg.tournament_size; ++k) {
      const auto c = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      if (fit[c] > fit[winner] || (fit[c] == fit[winner] && c < winner)) winner = c;
    }
    return winner;
  };

  const Eigen::Index children = n - cfg.elites;
  for (int g = 0; g < cfg.generations; ++g) {
    const auto order = ranking(fit);
    Eigen::MatrixXd offspring(d, children);
    for (Eigen::Index c = 0; c < children; c += 2) {
      Eigen::VectorXd a = pop.col(tournament());
      Eigen::VectorXd b = pop.col(tournament());
      if (uniform01(rng) < cfg.crossover_rate)
        for (Eigen::Index j = 0; j < d; ++j)
          if (uniform01(rng) < 0.5) {
            // BLX-0.5 on the selected gene; a plain swap would never leave the
            // initial gene pool.
            const double u = uniform(rng, -0.5, 1.5);
            const double aj = a[j], bj = b[j];
            a[j] = std::clamp(aj + u * (bj - aj), space.lower()[j], space.upper()[j]);
            b[j] = std::clamp(bj + u * (aj - bj), space.lower()[j], space.upper()[j]);
          }
      for (Eigen::VectorXd* child : {&a, &b})
        for (Eigen::Index j = 0; j < d; ++j)
          if (uniform01(rng) < cfg.mutation_rate)
            (*child)[j] = uniform(rng, space.lower()[j], space.upper()[j]);
      offspring.col(c) = a;
      if (c + 1 < children) offspring.col(c + 1) = b;
    }
    const Eigen::VectorXd child_fit = evaluate(f, offspring);
    r.evals += static_cast<std::size_t>(children);

    Eigen::MatrixXd next(d, n);
    Eigen::VectorXd next_fit(n);
    for (Eigen::Index e = 0; e < cfg.elites; ++e) {
      next.col(e) = pop.col(order[static_cast<std::size_t>(e)]);
      next_fit[e] = fit[order[static_cast<std::size_t>(e)]];
    }
    next.rightCols(children) = offspring;
    next_fit.tail(children) = child_fit;
    pop = std::move(next);
    fit = std::move(next_fit);

    best_i = ranking(fit).front();
    if (fit[best_i] > r.best_fitness) {
      r.best_fitness = fit[best_i];
      r.best_position = pop.col(best_i);
    }
    r.trace.push_back(r.best_fitness);
  }
  r.seconds = elapsed(start);
  return r;
}

// --- simulated annealing --------------------------------------------------

double acceptance_probability(double delta, double temperature) {
  if (delta <= 0) return 1.0;
  if (temperature <= 0) return 0.0;
  return std::exp(-delta / temperature);
}

OptimizerReport sa_optimize(const SearchSpace& space, const SAConfig& cfg,
                            const BatchObjective& f) {
  if (cfg.iterations < 0) throw ValidationError("iterations must be >= 0");
  if (cfg.initial_temperature < 0) throw ValidationError("temperature must be >= 0");
  if (!(cfg.cooling > 0 && cfg.cooling <= 1)) throw ValidationError("cooling must be in (0, 1]");

  const auto start = Clock::now();
  Rng rng(derive_seed(cfg.seed, {0x5a}));
  const Eigen::VectorXd step = cfg.step_fraction * space.width();

  Eigen::VectorXd x = space.sample(rng);
  double fx = evaluate_one(f, x);

  OptimizerReport r;
  r.optimizer = "sa";
  r.evals = 1;
  r.best_position = x;
  r.best_fitness = fx;
  r.trace.push_back(fx);
  r.current_trace.push_back(fx);

  double temperature = cfg.initial_temperature;
  for (int k = 0; k < cfg.iterations; ++k) {
    Eigen::VectorXd y(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) y[j] = x[j] + step[j] * standard_normal(rng);
    y = space.project(y);
    const double fy = evaluate_one(f, y);
    ++r.evals;
    const double u = uniform01(rng);
    if (u < acceptance_probability(fx - fy, temperature)) {
      x = std::move(y);
      fx = fy;
    }
    if (fx > r.best_fitness) {
      r.best_fitness = fx;
      r.best_position = x;
    }
    r.trace.push_back(r.best_fitness);
    r.current_trace.push_back(fx);
    temperature *= cfg.cooling;
  }
  r.seconds = elapsed(start);
  return r;
}

// --- tabu search ----------------------------------------------------------

bool TabuList::contains(const MoveKey& key) const {
  return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
}

void TabuList::push(const MoveKey& key) {
  if (capacity_ == 0) return;
  keys_.push_back(key);
  while (keys_.size() > capacity_) keys_.pop_front();
}

std::vector<std::pair<MoveKey, Eigen::VectorXd>> ts_neighborhood(const SearchSpace& space,
                                                                  const Eigen::VectorXd& x,
                                                                  double step_fraction) {
  std::vector<std::pair<MoveKey, Eigen::VectorXd>> out;
  const Eigen::VectorXd step = step_fraction * space.width();
  for (Eigen::Index j = 0; j < space.size(); ++j) {
    for (int dir : {+1, -1}) {
      Eigen::VectorXd y = x;
      y[j] = std::clamp(x[j] + dir * step[j], space.lower()[j], space.upper()[j]);
      if (y[j] != x[j]) out.emplace_back(MoveKey{j, dir}, std::move(y));
    }
  }
  return out;
}

OptimizerReport ts_optimize(const SearchSpace& space, const TSConfig& cfg,
                            const BatchObjective& f) {
  if (cfg.iterations < 0) throw ValidationError("iterations must be >= 0");
  if (!(cfg.step_fraction > 0)) throw ValidationError("step fraction must be positive");

  const auto start = Clock::now();
  Rng rng(derive_seed(cfg.seed, {0x7b}));
  Eigen::VectorXd x = space.sample(rng);
  double fx = evaluate_one(f, x);

  OptimizerReport r;
  r.optimizer = "ts";
  r.evals = 1;
  r.best_position = x;
  r.best_fitness = fx;
  r.trace.push_back(fx);

  TabuList tabu(cfg.tabu_size);
  for (int k = 0; k < cfg.iterations; ++k) {
    const auto moves = ts_neighborhood(space, x, cfg.step_fraction);
    if (!moves.empty()) {
      Eigen::MatrixXd points(x.size(), static_cast<Eigen::Index>(moves.size()));
      for (std::size_t i = 0; i < moves.size(); ++i)
        points.col(static_cast<Eigen::Index>(i)) = moves[i].second;
      const Eigen::VectorXd values = evaluate(f, points);
      r.evals += moves.size();

      std::ptrdiff_t chosen = -1;
      for (std::size_t i = 0; i < moves.size(); ++i) {
        const double v = values[static_cast<Eigen::Index>(i)];
        const bool admissible = !tabu.contains(moves[i].first) || v > r.best_fitness;
        if (admissible && (chosen < 0 || v > values[chosen])) chosen = static_cast<std::ptrdiff_t>(i);
      }
      if (chosen >= 0) {
        const auto& [key, y] = moves[static_cast<std::size_t>(chosen)];
        x = y;
        fx = values[chosen];
        // Undoing the move is forbidden for the next few iterations.
        tabu.push(MoveKey{key.first, -key.second});
        if (fx > r.best_fitness) {
          r.best_fitness = fx;
          r.best_position = x;
        }
      }
    }
    r.trace.push_back(r.best_fitness);
  }
  r.seconds = elapsed(start);
  return r;
}

// --- baseline -------------------------------------------------------------

OptimizerReport random_search(const SearchSpace& space, std::size_t evals, std::uint64_t seed,
                              const BatchObjective& f) {
  if (evals == 0) throw ValidationError("random search needs at least one evaluation");
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {0x4d}));
  Eigen::MatrixXd points(space.size(), static_cast<Eigen::Index>(evals));
  for (Eigen::Index i = 0; i < points.cols(); ++i) points.col(i) = space.sample(rng);
  const Eigen::VectorXd values = evaluate(f, points);

  OptimizerReport r;
  r.optimizer = "random";
  r.evals = evals;
  r.best_fitness = values[0];
  r.best_position = points.col(0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > r.best_fitness) {
      r.best_fitness = values[i];
      r.best_position = points.col(i);
    }
    r.trace.push_back(r.best_fitness);
  }
  r.seconds = elapsed(start);
  return r;
}

}  // namespace u3d
