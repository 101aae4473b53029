#include "commands.hpp"

#include "u3d/attack.hpp"
#include "u3d/error.hpp"
#include "u3d/noise.hpp"
#include "u3d/objective.hpp"
#include "u3d/stream.hpp"
#include "u3d/tensor_io.hpp"
#include "u3d/video.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace u3d::cli {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

struct Globals {
  std::uint64_t seed = 0;
  std::string manifest_out;
  unsigned threads = 1;
  CLI::Option* seed_opt = nullptr;

  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
};

// Everything a manifest records about one invocation.
struct RunRecord {
  std::vector<std::string> argv;
  std::string command;
  json config = json::object();
  json seeds = json::object();
  json inputs = json::array();
  json outputs = json::array();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

void write_manifest(const Globals& g, const RunRecord& rec) {
  if (g.manifest_out.empty()) return;
  json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = rec.command;
  m["argv"] = rec.argv;
  m["threads"] = g.threads;
  m["seeds"] = rec.seeds;
  m["config"] = rec.config;
  m["inputs"] = rec.inputs;
  m["outputs"] = rec.outputs;
  m["timings"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                             rec.start)
                                  .count()}};
  write_json(g.manifest_out, m);
}

std::vector<VideoClip> load_clip_dir(const fs::path& dir, RunRecord& rec,
                                     std::vector<std::string>* names = nullptr) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<VideoClip> clips;
  for (const auto& p : list_tensor_files(dir)) {
    clips.push_back(load_clip(p));
    rec.inputs.push_back(p.generic_string());
    if (names) names->push_back(p.filename().string());
  }
  if (clips.empty()) throw IoError("no clips found in " + dir.string());
  return clips;
}

std::vector<std::uint32_t> frame_size_of(const std::vector<VideoClip>& clips) {
  const auto& c0 = clips.front();
  for (const auto& c : clips)
    if (c.height() != c0.height() || c.width() != c0.width())
      throw ValidationError("all clips must share one frame size");
  return {c0.height(), c0.width()};
}

// ---------------------------------------------------------------------------
// noise spec options

struct SpecOptions {
  std::string spec_file;
  std::string variant = "perlin";
  unsigned T = 16;
  double epsilon = 8.0;
  double lambda_x = 32, lambda_y = 32, lambda_t = 32, phi = 4;
  int octaves = 2;
  double K = 2, sigma = 4, F = 1, density = 0.05;
  int orientations = 8;
  std::uint64_t gabor_seed = 0;

  std::vector<std::pair<std::string, CLI::Option*>> opts;

  bool given(const std::string& name) const {
    for (const auto& [n, o] : opts)
      if (n == name) return o->count() > 0;
    return false;
  }
};

void add_spec_options(CLI::App* app, SpecOptions& s, bool with_file = true) {
  auto add = [&](const std::string& name, auto& value, const std::string& help) {
    s.opts.emplace_back(name, app->add_option("--" + name, value, help));
  };
  if (with_file) add("spec", s.spec_file, "NoiseSpec JSON (or an optimize result)");
  s.opts.emplace_back("variant", app->add_option("--variant", s.variant, "perlin | gabor")
                                     ->check(CLI::IsMember({"perlin", "gabor"})));
  add("T", s.T, "volume period in frames");
  add("epsilon", s.epsilon, "l-inf bound");
  add("lambda-x", s.lambda_x, "perlin wavelength x");
  add("lambda-y", s.lambda_y, "perlin wavelength y");
  add("lambda-t", s.lambda_t, "perlin wavelength t");
  add("octaves", s.octaves, "perlin octave count");
  add("phi", s.phi, "perlin colour-map frequency");
  add("K", s.K, "gabor kernel magnitude");
  add("sigma", s.sigma, "gabor kernel width");
  add("F", s.F, "gabor kernel frequency");
  add("density", s.density, "gabor impulses per cell");
  add("orientations", s.orientations, "gabor orientation count");
  add("gabor-seed", s.gabor_seed, "gabor orientation seed");
}

bool spec_requested(const SpecOptions& s) {
  for (const auto& [n, o] : s.opts)
    if (o->count() > 0) return true;
  return false;
}

NoiseSpec resolve_spec(const SpecOptions& s, const Globals& g, RunRecord& rec) {
  NoiseSpec spec;
  const bool from_file = !s.spec_file.empty();
  if (from_file) {
    json j = read_json(s.spec_file);
    rec.inputs.push_back(s.spec_file);
    if (j.contains("spec")) j = j["spec"];
    try {
      spec = j.get<NoiseSpec>();
    } catch (const json::exception& e) {
      throw ValidationError(s.spec_file + ": " + e.what());
    }
    if (s.given("variant") && parse_variant(s.variant) != spec.variant())
      throw ValidationError("--variant contradicts the spec file");
  } else if (parse_variant(s.variant) == NoiseVariant::Gabor) {
    spec.params = GaborParams{};
  }
  if (s.given("T")) spec.T = s.T;
  if (s.given("epsilon")) spec.epsilon = s.epsilon;
  if (!from_file || g.seed_given()) spec.seed = g.seed;

  const bool perlin = spec.variant() == NoiseVariant::Perlin;
  for (const char* name : {"lambda-x", "lambda-y", "lambda-t", "octaves", "phi"})
    if (s.given(name) && !perlin) throw ValidationError(std::string("--") + name + " is perlin-only");
  for (const char* name : {"K", "sigma", "F", "density", "orientations", "gabor-seed"})
    if (s.given(name) && perlin) throw ValidationError(std::string("--") + name + " is gabor-only");

  if (auto* p = std::get_if<PerlinParams>(&spec.params)) {
    if (s.given("lambda-x")) p->lambda_x = s.lambda_x;
    if (s.given("lambda-y")) p->lambda_y = s.lambda_y;
    if (s.given("lambda-t")) p->lambda_t = s.lambda_t;
    if (s.given("octaves")) p->num_octaves = s.octaves;
    if (s.given("phi")) p->phi = s.phi;
  } else {
    auto& q = std::get<GaborParams>(spec.params);
    if (s.given("K")) q.K = s.K;
    if (s.given("sigma")) q.sigma = s.sigma;
    if (s.given("F")) q.F = s.F;
    if (s.given("density")) q.impulse_density = s.density;
    if (s.given("orientations")) q.num_orientations = s.orientations;
    if (s.given("gabor-seed")) q.seed = s.gabor_seed;
  }
  validate(spec);
  return spec;
}

// A ready volume from --volume, or one generated from the spec options at H x W.
struct VolumeOptions {
  std::string volume_file;
  SpecOptions spec;
};

void add_volume_options(CLI::App* app, VolumeOptions& v) {
  app->add_option("--volume", v.volume_file, "U3DT (T, H, W) perturbation volume");
  add_spec_options(app, v.spec);
}

PerturbationVolume resolve_volume(const VolumeOptions& v, const Globals& g, RunRecord& rec,
                                  std::uint32_t H, std::uint32_t W) {
  if (!v.volume_file.empty()) {
    if (spec_requested(v.spec)) throw ValidationError("give either --volume or spec options");
    rec.inputs.push_back(v.volume_file);
    auto vol = volume_from_tensor(load_tensor(v.volume_file));
    rec.config["volume"] = {{"file", v.volume_file}, {"epsilon", vol.epsilon}};
    return vol;
  }
  const NoiseSpec spec = resolve_spec(v.spec, g, rec);
  rec.config["spec"] = spec;
  rec.seeds["noise"] = spec.seed;
  return generate_volume(spec, H, W, spec.seed, g.threads);
}

// ---------------------------------------------------------------------------
// extractor, fitness and oracle options

struct FitnessOptions {
  std::uint32_t samples = 8;
  bool exhaustive = false;
  std::string window = "first";
  double alpha = 0.5;
  std::vector<unsigned> layers;
  std::uint64_t extractor_seed = 0;
  std::string extractor_cmd;
  unsigned timeout_ms = 30000;
};

void add_fitness_options(CLI::App* app, FitnessOptions& f) {
  app->add_option("--samples", f.samples, "shifts sampled per video");
  app->add_flag("--exhaustive", f.exhaustive, "use every shift instead of sampling");
  app->add_option("--window", f.window, "first | random | all")
      ->check(CLI::IsMember({"first", "random", "all"}));
  app->add_option("--alpha", f.alpha, "power-normalization exponent");
  app->add_option("--layers", f.layers, "1-based layers entering the distance (default all)")
      ->delimiter(',');
  app->add_option("--extractor-seed", f.extractor_seed, "builtin extractor weight seed");
  app->add_option("--extractor-cmd", f.extractor_cmd, "external extractor command line");
  app->add_option("--timeout-ms", f.timeout_ms, "external process I/O timeout");
}

std::unique_ptr<FeatureExtractor> make_extractor(const FitnessOptions& f) {
  if (f.extractor_cmd.empty()) return std::make_unique<BuiltinExtractor>(f.extractor_seed);
  return std::make_unique<ExternalExtractor>(split_command(f.extractor_cmd), 16,
                                             std::chrono::milliseconds(f.timeout_ms));
}

FitnessConfig make_fitness_config(const FitnessOptions& f, const FeatureExtractor& ex,
                                  std::uint64_t seed) {
  FitnessConfig cfg;
  cfg.sample_count = f.samples;
  cfg.exhaustive = f.exhaustive;
  cfg.rng_seed = seed;
  cfg.window = f.window == "first"    ? WindowStrategy::First
               : f.window == "random" ? WindowStrategy::RandomSeeded
                                      : WindowStrategy::AllWindows;
  cfg.distance.alpha = f.alpha;
  if (!f.layers.empty()) {
    cfg.distance.layer_mask.assign(ex.num_layers(), false);
    for (unsigned d : f.layers) {
      if (d < 1 || d > ex.num_layers())
        throw ValidationError("layer " + std::to_string(d) + " outside [1, " +
                              std::to_string(ex.num_layers()) + "]");
      cfg.distance.layer_mask[d - 1] = true;
    }
  }
  validate(cfg.distance);
  return cfg;
}

json fitness_json(const FitnessOptions& f, const FitnessConfig& cfg) {
  json layers = json::array();
  for (std::size_t i = 0; i < cfg.distance.layer_mask.size(); ++i)
    if (cfg.distance.layer_mask[i]) layers.push_back(i + 1);
  return {{"samples", cfg.sample_count}, {"exhaustive", cfg.exhaustive},
          {"window", f.window},         {"alpha", cfg.distance.alpha},
          {"layers", layers},           {"rng_seed", cfg.rng_seed},
          {"extractor", f.extractor_cmd.empty() ? json{{"builtin_seed", f.extractor_seed}}
                                                : json{{"command", f.extractor_cmd}}}};
}

struct OracleOptions {
  std::uint64_t oracle_seed = 1;
  std::string oracle_cmd;
};

void add_oracle_options(CLI::App* app, OracleOptions& o) {
  app->add_option("--oracle-seed", o.oracle_seed, "builtin oracle classifier seed");
  app->add_option("--oracle-cmd", o.oracle_cmd, "external label oracle command line");
}

std::unique_ptr<QueryOracle> make_oracle(const OracleOptions& o, std::vector<VideoClip> clips,
                                         unsigned threads, unsigned timeout_ms = 30000) {
  if (o.oracle_cmd.empty()) return builtin_oracle(o.oracle_seed, std::move(clips), threads);
  return std::make_unique<ExternalOracle>(split_command(o.oracle_cmd), std::move(clips), 16,
                                          std::chrono::milliseconds(timeout_ms));
}

json oracle_json(const OracleOptions& o) {
  return o.oracle_cmd.empty() ? json{{"builtin_seed", o.oracle_seed}}
                              : json{{"command", o.oracle_cmd}};
}

// ---------------------------------------------------------------------------
// optimizer options

struct OptimizerOptions {
  std::string optimizer = "pso";
  PSOConfig pso;
  GAConfig ga;
  SAConfig sa;
  TSConfig ts;
  std::size_t random_evals = 0;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  bool given(const std::string& name) const {
    for (const auto& [n, o] : opts)
      if (n == name) return o->count() > 0;
    return false;
  }
};

void add_optimizer_options(CLI::App* app, OptimizerOptions& o, bool choose = true) {
  auto add = [&](const std::string& name, auto& value, const std::string& help) {
    o.opts.emplace_back(name, app->add_option("--" + name, value, help));
  };
  if (choose)
    app->add_option("--optimizer", o.optimizer, "pso | ga | sa | ts | random")
        ->check(CLI::IsMember({"pso", "ga", "sa", "ts", "random"}));
  add("swarm", o.pso.swarm_size, "pso swarm size");
  add("iters", o.pso.max_iters, "pso iterations");
  add("c1", o.pso.c1, "pso personal-best weight");
  add("c2", o.pso.c2, "pso leader weight");
  add("w-start", o.pso.w_start, "pso initial inertia");
  add("w-decay", o.pso.w_decay, "pso inertia decay factor");
  add("w-end", o.pso.w_end, "pso final inertia");
  add("velocity-limit", o.pso.velocity_limit, "pso velocity clamp (fraction of width)");
  add("population", o.ga.population, "ga population");
  add("generations", o.ga.generations, "ga generations");
  add("crossover", o.ga.crossover_rate, "ga crossover probability");
  add("mutation", o.ga.mutation_rate, "ga per-gene mutation probability");
  add("sa-iters", o.sa.iterations, "sa iterations");
  add("t0", o.sa.initial_temperature, "sa initial temperature");
  add("cooling", o.sa.cooling, "sa cooling factor");
  add("ts-iters", o.ts.iterations, "ts iterations");
  add("tabu-size", o.ts.tabu_size, "ts tabu list length");
  add("random-evals", o.random_evals, "random-search evaluations");
}

// Alternates default to the pso evaluation budget; explicit flags win.
AttackSettings resolve_settings(const OptimizerOptions& o, OptimizerKind kind,
                                Eigen::Index dims, std::uint64_t seed, unsigned threads) {
  PSOConfig pso = o.pso;
  pso.seed = seed;
  validate(pso);
  AttackSettings s = matched_settings(kind, pso, dims);
  s.threads = threads;
  if (o.given("population")) s.ga.population = o.ga.population;
  if (o.given("generations")) s.ga.generations = o.ga.generations;
  if (o.given("crossover")) s.ga.crossover_rate = o.ga.crossover_rate;
  if (o.given("mutation")) s.ga.mutation_rate = o.ga.mutation_rate;
  if (o.given("sa-iters")) s.sa.iterations = o.sa.iterations;
  if (o.given("t0")) s.sa.initial_temperature = o.sa.initial_temperature;
  if (o.given("cooling")) s.sa.cooling = o.sa.cooling;
  if (o.given("ts-iters")) s.ts.iterations = o.ts.iterations;
  if (o.given("tabu-size")) s.ts.tabu_size = o.ts.tabu_size;
  if (o.given("random-evals")) s.random_evals = o.random_evals;
  return s;
}

json settings_json(const AttackSettings& s) {
  json j;
  j["optimizer"] = to_string(s.optimizer);
  switch (s.optimizer) {
    case OptimizerKind::PSO:
      j["pso"] = {{"swarm_size", s.pso.swarm_size}, {"max_iters", s.pso.max_iters},
                  {"c1", s.pso.c1},                 {"c2", s.pso.c2},
                  {"w_start", s.pso.w_start},       {"w_decay", s.pso.w_decay},
                  {"w_end", s.pso.w_end},           {"velocity_limit", s.pso.velocity_limit},
                  {"seed", s.pso.seed}};
      break;
    case OptimizerKind::GA:
      j["ga"] = {{"population", s.ga.population},       {"generations", s.ga.generations},
                 {"crossover_rate", s.ga.crossover_rate}, {"mutation_rate", s.ga.mutation_rate},
                 {"tournament_size", s.ga.tournament_size}, {"elites", s.ga.elites},
                 {"seed", s.ga.seed}};
      break;
    case OptimizerKind::SA:
      j["sa"] = {{"iterations", s.sa.iterations},
                 {"initial_temperature", s.sa.initial_temperature},
                 {"cooling", s.sa.cooling},
                 {"step_fraction", s.sa.step_fraction},
                 {"seed", s.sa.seed}};
      break;
    case OptimizerKind::TS:
      j["ts"] = {{"iterations", s.ts.iterations}, {"tabu_size", s.ts.tabu_size},
                 {"step_fraction", s.ts.step_fraction}, {"seed", s.ts.seed}};
      break;
    case OptimizerKind::Random:
      j["random"] = {{"evals", s.random_evals}, {"seed", s.pso.seed}};
      break;
  }
  return j;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  SpecOptions spec;
  std::uint32_t H = 112;
  std::uint32_t W = 112;
  std::string out;
};

int cmd_generate(const GenerateOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  const NoiseSpec spec = resolve_spec(o.spec, g, rec);
  if (o.H == 0 || o.W == 0) throw ValidationError("--H and --W must be positive");
  const auto vol = generate_volume(spec, o.H, o.W, spec.seed, g.threads);
  save_tensor(vol.volume, o.out);
  rec.config = {{"spec", spec}, {"H", o.H}, {"W", o.W}};
  rec.seeds["noise"] = spec.seed;
  rec.outputs.push_back(o.out);
  out << json{{"volume", o.out},
              {"dims", vol.volume.dims()},
              {"epsilon", vol.epsilon},
              {"linf", vol.linf()}}
             .dump()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeOptions {
  std::string videos;
  SpecOptions spec;
  FitnessOptions fitness;
  OptimizerOptions optimizer;
  bool hybrid = false;
  double omega = 10.0;
  std::size_t budget = 1000;
  std::size_t query_set = 50;
  std::string query_dir;
  OracleOptions oracle;
  std::string out;
  std::string volume_out;
};

int cmd_optimize(const OptimizeOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  const auto videos = load_clip_dir(o.videos, rec);
  const auto hw = frame_size_of(videos);
  const NoiseSpec base = resolve_spec(o.spec, g, rec);
  const auto extractor = make_extractor(o.fitness);
  const FitnessConfig fcfg = make_fitness_config(o.fitness, *extractor, g.seed);
  const FitnessEvaluator evaluator(*extractor, videos, fcfg);
  const SearchSpace space = SearchSpace::for_variant(base.variant());
  const AttackSettings settings = resolve_settings(o.optimizer, parse_optimizer(o.optimizer.optimizer),
                                                   space.size(), g.seed, g.threads);

  std::unique_ptr<QueryOracle> oracle;
  std::optional<QueryBudget> budget;
  HybridConfig hybrid;
  if (o.hybrid) {
    auto pool = load_clip_dir(o.query_dir.empty() ? o.videos : o.query_dir, rec);
    if (pool.size() < o.query_set)
      throw ValidationError("query set needs " + std::to_string(o.query_set) + " clips, found " +
                            std::to_string(pool.size()));
    pool.resize(o.query_set);
    if (frame_size_of(pool) != hw) throw ValidationError("query clips differ in frame size");
    oracle = make_oracle(o.oracle, std::move(pool), g.threads, o.fitness.timeout_ms);
    budget.emplace(o.budget);
    hybrid.omega = o.omega;
    hybrid.oracle = oracle.get();
    hybrid.budget = &*budget;
  }

  const AttackResult result =
      noise_opt(evaluator, space, base, settings, o.hybrid ? &hybrid : nullptr);
  if (budget && budget->used() > budget->limit())
    throw std::logic_error("query budget overrun");

  json j;
  j["variant"] = to_string(base.variant());
  j["spec"] = result.best_spec;
  j["report"] = report_json(result.report, space);
  if (o.hybrid)
    j["hybrid"] = {{"omega", o.omega},
                   {"budget", o.budget},
                   {"query_set", o.query_set},
                   {"oracle_queries", result.oracle_queries},
                   {"hybrid_evals", result.hybrid_evals},
                   {"fallback_evals", result.fallback_evals}};
  write_json(o.out, j);
  rec.outputs.push_back(o.out);
  if (!o.volume_out.empty()) {
    save_tensor(generate_volume(result.best_spec, hw[0], hw[1], result.best_spec.seed, g.threads)
                    .volume,
                o.volume_out);
    rec.outputs.push_back(o.volume_out);
  }

  rec.config = {{"videos", o.videos},
                {"base_spec", base},
                {"fitness", fitness_json(o.fitness, fcfg)},
                {"search", settings_json(settings)}};
  if (o.hybrid)
    rec.config["hybrid"] = {{"omega", o.omega},
                            {"budget", o.budget},
                            {"query_set", o.query_set},
                            {"query_dir", o.query_dir.empty() ? o.videos : o.query_dir},
                            {"oracle", oracle_json(o.oracle)}};
  rec.seeds = {{"global", g.seed}, {"noise", base.seed}, {"extractor", o.fitness.extractor_seed}};
  out << json{{"best_fitness", result.report.best_fitness},
              {"evals", result.report.evals},
              {"out", o.out}}
             .dump()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inject

struct InjectOptions {
  std::string clip;
  std::string clips;
  VolumeOptions volume;
  std::int64_t offset = 0;
  std::string out_dir;
  std::string report;
};

int cmd_inject(const InjectOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  std::vector<VideoClip> clips;
  std::vector<std::string> names;
  if (!o.clip.empty() == !o.clips.empty()) throw ValidationError("give exactly one of --clip, --clips");
  if (!o.clip.empty()) {
    clips.push_back(load_clip(o.clip));
    names.push_back(fs::path(o.clip).filename().string());
    rec.inputs.push_back(o.clip);
  } else {
    clips = load_clip_dir(o.clips, rec, &names);
  }
  const auto hw = frame_size_of(clips);
  const auto vol = resolve_volume(o.volume, g, rec, hw[0], hw[1]);

  json per_clip = json::array();
  double mse_sum = 0.0, linf_max = 0.0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const VideoClip adv = apply_perturbation(clips[i], vol, o.offset);
    const auto m = pixel_metrics(clips[i], adv);
    const fs::path dst = fs::path(o.out_dir) / names[i];
    fs::create_directories(o.out_dir);
    save_tensor(adv.tensor(), dst);
    rec.outputs.push_back(dst.generic_string());
    per_clip.push_back({{"clip", names[i]}, {"output", dst.generic_string()}, {"mse", m.mse},
                        {"linf", m.linf}});
    mse_sum += m.mse;
    linf_max = std::max(linf_max, m.linf);
  }
  json report{{"offset", o.offset},
              {"clips", per_clip},
              {"summary", {{"mean_mse", mse_sum / double(clips.size())}, {"max_linf", linf_max}}}};
  if (!o.report.empty()) {
    write_json(o.report, report);
    rec.outputs.push_back(o.report);
  }
  rec.config["offset"] = o.offset;
  rec.config["out_dir"] = o.out_dir;
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string clips;
  VolumeOptions volume;
  OracleOptions oracle;
  unsigned offsets = 10;
  std::int64_t offset_step = 1;
  std::string report;
};

int cmd_evaluate(const EvaluateOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  std::vector<std::string> names;
  auto clips = load_clip_dir(o.clips, rec, &names);
  const auto hw = frame_size_of(clips);
  const auto vol = resolve_volume(o.volume, g, rec, hw[0], hw[1]);
  if (o.offsets < 1) throw ValidationError("--offsets must be >= 1");

  auto oracle = make_oracle(o.oracle, clips, g.threads);
  const auto clean = oracle->clean_labels();

  json table = json::array();
  std::vector<int> labels_at_zero;
  for (unsigned k = 0; k < o.offsets; ++k) {
    const std::int64_t offset = std::int64_t{k} * o.offset_step;
    const auto adv = oracle->perturbed_labels(vol, offset);
    if (k == 0) labels_at_zero = adv;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < adv.size(); ++i) changed += adv[i] != clean[i];
    table.push_back({{"offset", offset}, {"sr", double(changed) / double(adv.size())}});
  }

  json per_clip = json::array();
  double mse_sum = 0.0, linf_max = 0.0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto m = pixel_metrics(clips[i], apply_perturbation(clips[i], vol, 0));
    per_clip.push_back({{"clip", names[i]},
                        {"clean_label", clean[i]},
                        {"adv_label", labels_at_zero[i]},
                        {"mse", m.mse},
                        {"linf", m.linf}});
    mse_sum += m.mse;
    linf_max = std::max(linf_max, m.linf);
  }
  json report{{"sr", table.front()["sr"]},
              {"offsets", table},
              {"clips", per_clip},
              {"pixel", {{"mean_mse", mse_sum / double(clips.size())}, {"max_linf", linf_max}}}};
  if (!o.report.empty()) {
    write_json(o.report, report);
    rec.outputs.push_back(o.report);
  }
  rec.config["oracle"] = oracle_json(o.oracle);
  rec.config["offsets"] = o.offsets;
  rec.config["offset_step"] = o.offset_step;
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stream

struct StreamOptions {
  std::string input;      // 4-D clip replayed frame by frame
  std::string frames_in;  // U3DT frame stream, "-" for stdin
  std::size_t frames = 0;
  std::uint32_t H = 0, W = 0;
  VolumeOptions volume;
  std::int64_t offset = 0;
  std::int64_t attack_start = 0;
  std::string output;  // U3DT frame stream, "-" for stdout; empty discards
  std::string report;
};

int cmd_stream(const StreamOptions& o, const Globals& g, RunRecord& rec, std::ostream& out,
               std::ostream& err) {
  if (!o.input.empty() == !o.frames_in.empty())
    throw ValidationError("give exactly one of --input, --frames-in");

  std::unique_ptr<FrameSource> source;
  std::ifstream file_in;
  std::uint32_t H = o.H, W = o.W;
  if (!o.input.empty()) {
    VideoClip clip = load_clip(o.input);
    rec.inputs.push_back(o.input);
    H = clip.height();
    W = clip.width();
    source = std::make_unique<ClipSource>(std::move(clip), o.frames);
  } else if (o.frames_in == "-") {
    source = std::make_unique<TensorStreamSource>(std::cin);
  } else {
    file_in.open(o.frames_in, std::ios::binary);
    if (!file_in) throw IoError("cannot open " + o.frames_in);
    rec.inputs.push_back(o.frames_in);
    source = std::make_unique<TensorStreamSource>(file_in);
  }
  if (o.volume.volume_file.empty() && (H == 0 || W == 0))
    throw ValidationError("--H and --W are required to generate a volume for a frame stream");
  const auto vol = resolve_volume(o.volume, g, rec, H, W);

  std::unique_ptr<FrameSink> sink;
  std::ofstream file_out;
  if (o.output.empty()) {
    sink = std::make_unique<NullSink>();
  } else if (o.output == "-") {
    sink = std::make_unique<TensorStreamSink>(out);
  } else {
    file_out.open(o.output, std::ios::binary | std::ios::trunc);
    if (!file_out) throw IoError("cannot write " + o.output);
    sink = std::make_unique<TensorStreamSink>(file_out);
    rec.outputs.push_back(o.output);
  }

  const LatencyReport latency =
      stream_inject(*source, *sink, vol, StreamConfig{o.attack_start, o.offset});
  if (file_out.is_open() && !file_out.flush()) throw IoError("write failed: " + o.output);
  json report = to_json(latency);
  report["note"] = "inject excludes video decode/encode";
  if (!o.report.empty()) write_json(o.report, report);
  rec.config["offset"] = o.offset;
  rec.config["attack_start"] = o.attack_start;
  rec.config["frames"] = o.frames;
  (o.output == "-" ? err : out) << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  std::string videos;
  SpecOptions spec;
  FitnessOptions fitness;
  OptimizerOptions optimizer;
  unsigned reps = 5;
  unsigned baseline_seeds = 10;
  std::string out;
  std::string csv;
};

int cmd_bench(const BenchOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  const auto videos = load_clip_dir(o.videos, rec);
  const auto hw = frame_size_of(videos);
  const NoiseSpec base = resolve_spec(o.spec, g, rec);
  const auto extractor = make_extractor(o.fitness);
  const FitnessConfig fcfg = make_fitness_config(o.fitness, *extractor, g.seed);
  const FitnessEvaluator evaluator(*extractor, videos, fcfg);
  const SearchSpace space = SearchSpace::for_variant(base.variant());
  if (o.reps < 1 || o.baseline_seeds < 1) throw ValidationError("--reps and --baseline-seeds must be >= 1");

  auto run_seed = [&](OptimizerKind kind, unsigned r) {
    return noise_opt(evaluator, space, base,
                     resolve_settings(o.optimizer, kind, space.size(),
                                      derive_seed(g.seed, {r}), g.threads));
  };

  json rows = json::array();
  std::vector<double> pso_runs;
  std::size_t budget = 0;
  for (auto kind : {OptimizerKind::PSO, OptimizerKind::GA, OptimizerKind::SA, OptimizerKind::TS}) {
    double seconds = 0.0, fit = 0.0, mse = 0.0;
    bool within = true;
    std::size_t evals = 0;
    json runs = json::array();
    const unsigned n = kind == OptimizerKind::PSO ? std::max(o.reps, o.baseline_seeds) : o.reps;
    for (unsigned r = 0; r < n; ++r) {
      const auto res = run_seed(kind, r);
      if (kind == OptimizerKind::PSO) pso_runs.push_back(res.report.best_fitness);
      if (r >= o.reps) continue;
      const auto vol = generate_volume(res.best_spec, hw[0], hw[1], res.best_spec.seed, g.threads);
      seconds += res.report.seconds;
      fit += res.report.best_fitness;
      mse += vol.volume.values().cast<double>().square().mean();
      within &= vol.linf() <= res.best_spec.epsilon;
      evals = res.report.evals;
      runs.push_back(res.report.best_fitness);
    }
    if (kind == OptimizerKind::PSO) budget = evals;
    rows.push_back({{"optimizer", to_string(kind)},
                    {"seconds", seconds / o.reps},
                    {"best_fitness", fit / o.reps},
                    {"volume_mse", mse / o.reps},
                    {"within_bound", within},
                    {"evals", evals},
                    {"runs", runs}});
  }

  std::vector<double> random_runs;
  for (unsigned r = 0; r < o.baseline_seeds; ++r)
    random_runs.push_back(run_seed(OptimizerKind::Random, r).report.best_fitness);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
  };
  const double pso_mean = mean({pso_runs.begin(), pso_runs.begin() + o.baseline_seeds});
  const double random_mean = mean(random_runs);

  json bench;
  bench["variant"] = to_string(base.variant());
  bench["budget"] = budget;
  bench["reps"] = o.reps;
  bench["rows"] = rows;
  bench["baseline"] = {
      {"seeds", o.baseline_seeds},
      {"pso_runs", json(std::vector<double>(pso_runs.begin(), pso_runs.begin() + o.baseline_seeds))},
      {"random_runs", random_runs},
      {"pso_mean", pso_mean},
      {"random_mean", random_mean},
      {"pso_at_least_random", pso_mean >= random_mean}};
  if (!o.out.empty()) {
    write_json(o.out, bench);
    rec.outputs.push_back(o.out);
  }
  if (!o.csv.empty()) {
    std::ofstream csv(o.csv, std::ios::trunc);
    csv << "optimizer,seconds,best_fitness,volume_mse,evals\n";
    for (const auto& row : rows)
      csv << row["optimizer"].get<std::string>() << ',' << row["seconds"].get<double>() << ','
          << row["best_fitness"].get<double>() << ',' << row["volume_mse"].get<double>() << ','
          << row["evals"].get<std::size_t>() << '\n';
    if (!csv) throw IoError("cannot write " + o.csv);
  }
  rec.config = {{"videos", o.videos},
                {"base_spec", base},
                {"fitness", fitness_json(o.fitness, fcfg)},
                {"pso", settings_json(resolve_settings(o.optimizer, OptimizerKind::PSO,
                                                       space.size(), g.seed, g.threads))["pso"]},
                {"reps", o.reps},
                {"baseline_seeds", o.baseline_seeds}};
  rec.seeds = {{"global", g.seed}, {"extractor", o.fitness.extractor_seed}};
  out << render_bench_table(bench);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string out_dir;
  unsigned count = 4;
  std::uint32_t frames = 16, H = 112, W = 112, C = 3;
};

int cmd_synth(const SynthOptions& o, const Globals& g, RunRecord& rec, std::ostream& out) {
  fs::create_directories(o.out_dir);
  for (unsigned i = 0; i < o.count; ++i) {
    std::ostringstream name;
    name << "clip_" << std::setw(3) << std::setfill('0') << i << ".u3dt";
    const fs::path dst = fs::path(o.out_dir) / name.str();
    save_tensor(make_synthetic_clip(o.frames, o.H, o.W, o.C, derive_seed(g.seed, {i})).tensor(),
                dst);
    rec.outputs.push_back(dst.generic_string());
  }
  rec.config = {{"count", o.count}, {"frames", o.frames}, {"H", o.H}, {"W", o.W}, {"C", o.C}};
  out << "wrote " << o.count << " clips to " << o.out_dir << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const ProtocolError*>(&e)) return kExitProtocol;
  if (dynamic_cast<const FormatError*>(&e)) return kExitProtocol;
  if (dynamic_cast<const BudgetExhausted*>(&e)) return kExitProtocol;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
  return 1;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_replay(const std::string& manifest, std::optional<unsigned> threads, std::ostream& out,
               std::ostream& err) {
  const json m = read_json(manifest);
  if (!m.contains("argv")) throw ValidationError(manifest + " has no argv");
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  if (threads) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--threads") {
        ++i;
        continue;
      }
      if (argv[i].rfind("--threads=", 0) == 0) continue;
      kept.push_back(argv[i]);
    }
    kept.insert(kept.begin(), {"--threads", std::to_string(*threads)});
    argv = std::move(kept);
  }
  return dispatch(argv, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"universal 3D noise perturbations for video models", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "base seed");
  app.add_option("--manifest-out", g.manifest_out, "write a run manifest here");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "realize a noise volume");
  add_spec_options(generate, gen.spec);
  generate->add_option("--H", gen.H, "frame height");
  generate->add_option("--W", gen.W, "frame width");
  generate->add_option("-o,--out", gen.out, "output U3DT volume")->required();

  OptimizeOptions opt;
  auto* optimize = app.add_subcommand("optimize", "search noise parameters");
  optimize->add_option("--videos", opt.videos, "directory of U3DT clips")->required();
  add_spec_options(optimize, opt.spec);
  add_fitness_options(optimize, opt.fitness);
  add_optimizer_options(optimize, opt.optimizer);
  optimize->add_flag("--hybrid", opt.hybrid, "add the query-oracle term");
  optimize->add_option("--omega", opt.omega, "weight of the success-rate term");
  optimize->add_option("--budget", opt.budget, "maximum oracle video-queries");
  optimize->add_option("--query-set", opt.query_set, "oracle query-set size");
  optimize->add_option("--query-dir", opt.query_dir, "query clips (default --videos)");
  add_oracle_options(optimize, opt.oracle);
  optimize->add_option("-o,--out", opt.out, "result JSON")->required();
  optimize->add_option("--volume-out", opt.volume_out, "also write the best volume");

  InjectOptions inj;
  auto* inject = app.add_subcommand("inject", "add a volume to clips");
  inject->add_option("--clip", inj.clip, "one U3DT clip");
  inject->add_option("--clips", inj.clips, "directory of U3DT clips");
  add_volume_options(inject, inj.volume);
  inject->add_option("--offset", inj.offset, "volume start offset");
  inject->add_option("--out-dir", inj.out_dir, "adversarial clip directory")->required();
  inject->add_option("--report", inj.report, "metrics JSON");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "success rate against an oracle");
  evaluate->add_option("--clips", ev.clips, "directory of clean U3DT clips")->required();
  add_volume_options(evaluate, ev.volume);
  add_oracle_options(evaluate, ev.oracle);
  evaluate->add_option("--offsets", ev.offsets, "number of start offsets swept");
  evaluate->add_option("--offset-step", ev.offset_step, "spacing of start offsets");
  evaluate->add_option("--report", ev.report, "report JSON");

  StreamOptions st;
  auto* stream = app.add_subcommand("stream", "inject into a frame stream");
  stream->add_option("--input", st.input, "U3DT clip replayed as a stream");
  stream->add_option("--frames-in", st.frames_in, "U3DT frame stream file, - for stdin");
  stream->add_option("--frames", st.frames, "frames to replay from --input (default one pass)");
  stream->add_option("--H", st.H, "frame height for generated volumes");
  stream->add_option("--W", st.W, "frame width for generated volumes");
  add_volume_options(stream, st.volume);
  stream->add_option("--offset", st.offset, "volume start offset");
  stream->add_option("--attack-start", st.attack_start, "first perturbed frame");
  stream->add_option("--output", st.output, "U3DT frame stream file, - for stdout");
  stream->add_option("--report", st.report, "latency JSON");

  BenchOptions be;
  auto* bench = app.add_subcommand("bench", "compare optimizers at a matched budget");
  bench->add_option("--videos", be.videos, "directory of U3DT clips")->required();
  add_spec_options(bench, be.spec);
  add_fitness_options(bench, be.fitness);
  add_optimizer_options(bench, be.optimizer, false);
  bench->add_option("--reps", be.reps, "repetitions per optimizer");
  bench->add_option("--baseline-seeds", be.baseline_seeds, "seeds for pso vs random");
  bench->add_option("-o,--out", be.out, "bench JSON");
  bench->add_option("--csv", be.csv, "bench CSV");

  SynthOptions sy;
  auto* synth = app.add_subcommand("synth", "write synthetic clips");
  synth->add_option("--out-dir", sy.out_dir, "destination")->required();
  synth->add_option("--count", sy.count, "number of clips");
  synth->add_option("--frames", sy.frames, "frames per clip");
  synth->add_option("--H", sy.H, "height");
  synth->add_option("--W", sy.W, "width");
  synth->add_option("--C", sy.C, "channels (1 or 3)");

  std::string manifest_in;
  std::optional<unsigned> replay_threads;
  auto* replay = app.add_subcommand("replay", "rerun the command recorded in a manifest");
  replay->add_option("--manifest", manifest_in, "manifest JSON")->required();
  replay->add_option("--with-threads", replay_threads, "override the thread count");

  std::vector<std::string> argv_storage{kToolName};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*replay) return cmd_replay(manifest_in, replay_threads, out, err);

  RunRecord rec;
  rec.argv = args;
  rec.seeds["global"] = g.seed;
  int code = kExitOk;
  if (*generate) {
    rec.command = "generate";
    code = cmd_generate(gen, g, rec, out);
  } else if (*optimize) {
    rec.command = "optimize";
    code = cmd_optimize(opt, g, rec, out);
  } else if (*inject) {
    rec.command = "inject";
    code = cmd_inject(inj, g, rec, out);
  } else if (*evaluate) {
    rec.command = "evaluate";
    code = cmd_evaluate(ev, g, rec, out);
  } else if (*stream) {
    rec.command = "stream";
    code = cmd_stream(st, g, rec, out, err);
  } else if (*bench) {
    rec.command = "bench";
    code = cmd_bench(be, g, rec, out);
  } else if (*synth) {
    rec.command = "synth";
    code = cmd_synth(sy, g, rec, out);
  }
  write_manifest(g, rec);
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const std::exception& e) {
    err << kToolName << ": error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

std::string render_bench_table(const json& bench) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "optimizer" << std::right << std::setw(12) << "seconds"
    << std::setw(16) << "best_fitness" << std::setw(14) << "volume_mse" << std::setw(8) << "evals"
    << '\n';
  s << std::fixed;
  for (const auto& row : bench["rows"])
    s << std::left << std::setw(10) << row["optimizer"].get<std::string>() << std::right
      << std::setw(12) << std::setprecision(3) << row["seconds"].get<double>() << std::setw(16)
      << std::setprecision(6) << row["best_fitness"].get<double>() << std::setw(14)
      << std::setprecision(3) << row["volume_mse"].get<double>() << std::setw(8)
      << row["evals"].get<std::size_t>() << '\n';
  const auto& b = bench["baseline"];
  s << "pso mean " << std::setprecision(6) << b["pso_mean"].get<double>() << " vs random mean "
    << b["random_mean"].get<double>() << " over " << b["seeds"].get<unsigned>() << " seeds\n";
  return s.str();
}

json strip_timings(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items())
      if (k != "seconds") out[k] = strip_timings(v);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(strip_timings(v));
    return out;
  }
  return j;
}

}  // namespace u3d::cli
