#pragma once

// Derivative-free maximizers over a SearchSpace box. All of them call the
// objective on batches of candidate points (one column per point), so the
// objective may evaluate in parallel while state updates stay sequential.

#include "u3d/search_space.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace u3d {

using BatchObjective = std::function<Eigen::VectorXd(const Eigen::MatrixXd& points)>;

// Wraps a pointwise objective; columns are evaluated on up to `threads` workers.
BatchObjective make_batch_objective(std::function<double(const Eigen::VectorXd&)> f,
                                    unsigned threads = 1);

struct OptimizerReport {
  std::string optimizer;
  Eigen::VectorXd best_position;
  double best_fitness = 0.0;
  std::vector<double> trace;          // best-so-far; entry 0 is the initial sample
  std::vector<double> current_trace;  // SA only: fitness of the chain's current point
  std::size_t evals = 0;
  double seconds = 0.0;
};

// {best_params, best_fitness, trace, evals, seconds[, current_trace]}.
nlohmann::ordered_json report_json(const OptimizerReport& r, const SearchSpace& space);

// --- particle swarm -------------------------------------------------------

struct PSOConfig {
  Eigen::Index swarm_size = 20;  // m
  double c1 = 2.0;               // personal-best attraction
  double c2 = 2.0;               // leader attraction
  double w_start = 1.2;
  double w_decay = 0.5;
  double w_end = 0.4;
  int max_iters = 40;  // h
  std::uint64_t seed = 0;
  double velocity_limit = 0.5;  // |v_j| <= velocity_limit * width_j
};

void validate(const PSOConfig& cfg);

struct SwarmState {
  Eigen::MatrixXd positions;      // d x m
  Eigen::MatrixXd velocities;     // d x m
  Eigen::VectorXd fitness;        // of current positions
  Eigen::MatrixXd personal_best;  // d x m
  Eigen::VectorXd personal_best_fitness;
  Eigen::Index leader = 0;  // column of personal_best holding the leader
  double leader_fitness = 0.0;
  int iteration = 1;  // k of the next step
  double inertia = 0.0;
  std::size_t evals = 0;

  Eigen::VectorXd leader_position() const { return personal_best.col(leader); }
};

// W <- max(w_end, W - (w_start - w_end) / (k * w_decay)).
double next_inertia(double w, int k, const PSOConfig& cfg);

// m uniform points with zero velocity, evaluated once.
SwarmState pso_init(const SearchSpace& space, const PSOConfig& cfg, const BatchObjective& f);

// One synchronous update of every particle: velocity, position, projection,
// evaluation, personal bests, leader, then inertia decay. If the objective
// throws, the input state is left untouched.
SwarmState pso_step(const SwarmState& state, const SearchSpace& space, const PSOConfig& cfg,
                    const BatchObjective& f);

// Init plus max_iters steps; m * (h + 1) evaluations.
OptimizerReport pso_optimize(const SearchSpace& space, const PSOConfig& cfg,
                             const BatchObjective& f);

// --- genetic algorithm ----------------------------------------------------

struct GAConfig {
  Eigen::Index population = 20;
  int generations = 40;
  double crossover_rate = 0.5;   // probability a parent pair is recombined (per-gene 0.5 mask, BLX-0.5 blend)
  double mutation_rate = 0.005;  // per gene, uniform reset inside the box
  int tournament_size = 2;
  Eigen::Index elites = 1;
  std::uint64_t seed = 0;
};

// population + generations * (population - elites) evaluations.
OptimizerReport ga_optimize(const SearchSpace& space, const GAConfig& cfg,
                            const BatchObjective& f);

// --- simulated annealing --------------------------------------------------

struct SAConfig {
  int iterations = 819;
  double initial_temperature = 5000.0;
  double cooling = 0.99;
  double step_fraction = 0.05;  // proposal std per dimension, as a fraction of width
  std::uint64_t seed = 0;
};

// Metropolis rule for maximization: a move that lowers fitness by delta > 0
// is accepted with probability exp(-delta / temperature); 0 when temperature
// is 0. Improving moves always pass.
double acceptance_probability(double delta, double temperature);

// 1 + iterations evaluations.
OptimizerReport sa_optimize(const SearchSpace& space, const SAConfig& cfg,
                            const BatchObjective& f);

// --- tabu search ----------------------------------------------------------

struct TSConfig {
  int iterations = 81;
  std::size_t tabu_size = 4;
  double step_fraction = 0.02;
  std::uint64_t seed = 0;
};

// Move key: (dimension, direction) with direction +1 or -1.
using MoveKey = std::pair<Eigen::Index, int>;

// The last `capacity` recorded move keys; ts_optimize records the reverse of
// each applied move.
class TabuList {
 public:
  explicit TabuList(std::size_t capacity) : capacity_(capacity) {}
  bool contains(const MoveKey& key) const;
  void push(const MoveKey& key);
  std::size_t size() const { return keys_.size(); }

 private:
  std::size_t capacity_;
  std::deque<MoveKey> keys_;
};

// Candidate moves x +/- step_j e_j, projected into the box; moves that leave
// the point unchanged are dropped.
std::vector<std::pair<MoveKey, Eigen::VectorXd>> ts_neighborhood(const SearchSpace& space,
                                                                  const Eigen::VectorXd& x,
                                                                  double step_fraction);

// At most 1 + iterations * 2d evaluations (exactly that when no move is
// clipped away at the box boundary).
OptimizerReport ts_optimize(const SearchSpace& space, const TSConfig& cfg,
                            const BatchObjective& f);

// --- baseline -------------------------------------------------------------

// Best of `evals` uniform samples.
OptimizerReport random_search(const SearchSpace& space, std::size_t evals, std::uint64_t seed,
                              const BatchObjective& f);

}  // namespace u3d
