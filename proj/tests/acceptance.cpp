// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Thresholds are pinned below and never read from the environment.

#include "commands.hpp"
#include "u3d/attack.hpp"
#include "u3d/features.hpp"
#include "u3d/noise.hpp"
#include "u3d/objective.hpp"
#include "u3d/optimizers.hpp"
#include "u3d/rng.hpp"
#include "u3d/tensor_io.hpp"
#include "u3d/video.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace u3d;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kBoundSeconds = 120.0;
constexpr double kShiftRelTol = 0.05;
constexpr double kShiftSeconds = 60.0;
constexpr double kSphereTol = 0.05;
constexpr int kSphereMinSuccess = 9;
constexpr double kSphereSeconds = 30.0;
constexpr double kInjectMeanMax = 0.010;
constexpr double kEndToEndMeanMax = 0.033;
constexpr double kFeatureRelTol = 1e-5;
constexpr unsigned kManyThreads = 4;

const fs::path kWork = fs::current_path() / "acceptance_work";

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the installed CLI binary; stdout goes to `stdout_file` when given.
int cli(const std::vector<std::string>& args, const fs::path& stdout_file = {}) {
  std::string cmd = quote(U3D_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += stdout_file.empty() ? " >/dev/null" : " >" + quote(stdout_file.string());
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string p(const std::string& name) { return (kWork / name).string(); }

// --- 1 ----------------------------------------------------------------------

Outcome bound_certification() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2024, {1}));
  int checked = 0, violations = 0, loose = 0, zero = 0;
  for (int i = 0; i < 1000; ++i) {
    NoiseSpec s;
    s.T = static_cast<std::uint32_t>(4 + uniform_index(rng, 13));
    s.epsilon = uniform(rng, 0.5, 32.0);
    s.seed = rng();
    if (i % 2 == 0) {
      PerlinParams pp;
      pp.lambda_x = uniform(rng, 2, 180);
      pp.lambda_y = uniform(rng, 2, 180);
      pp.lambda_t = uniform(rng, 2, 180);
      pp.num_octaves = static_cast<int>(1 + uniform_index(rng, 5));
      pp.phi = uniform(rng, 1, 60);
      s.params = pp;
    } else {
      GaborParams g;
      g.K = uniform(rng, 1, 5);
      g.sigma = uniform(rng, 1, 20);
      g.F = uniform(rng, 0.25, 20);
      g.seed = rng();
      s.params = g;
    }
    const auto vol = generate_volume(s, 32, 32);
    const float m = vol.linf();
    ++checked;
    if (m == 0.0f) {
      ++zero;
      continue;
    }
    if (double(m) > s.epsilon) ++violations;
    // Equality: m is the largest float not above epsilon.
    if (!(double(std::nextafter(m, 1e30f)) > s.epsilon)) ++loose;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && loose == 0 && secs < kBoundSeconds,
          std::to_string(checked) + " specs, " + std::to_string(violations) + " above eps, " +
              std::to_string(loose) + " not tight, " + std::to_string(zero) + " zero, " +
              fmt(secs) + " s"};
}

// --- 2 ----------------------------------------------------------------------

Outcome shift_expectation() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<VideoClip> clips;
  for (std::uint64_t i = 0; i < 3; ++i) clips.push_back(make_synthetic_clip(16, 32, 32, 3, 100 + i));
  const BuiltinExtractor ex(0);
  NoiseSpec s;
  s.seed = 5;
  const auto vol = generate_volume(s, 32, 32);

  FitnessConfig exact;
  exact.exhaustive = true;
  FitnessConfig mc;
  mc.sample_count = 512;
  mc.rng_seed = 12345;
  const double fe = FitnessEvaluator(ex, clips, exact).evaluate(vol);
  const double fm = FitnessEvaluator(ex, clips, mc).evaluate(vol);
  const double rel = std::abs(fm - fe) / std::abs(fe);
  const double secs = seconds_since(t0);
  return {rel <= kShiftRelTol && secs < kShiftSeconds,
          "exhaustive " + fmt(fe) + ", I=512 " + fmt(fm) + ", rel err " + fmt(rel) + ", " +
              fmt(secs) + " s"};
}

// --- 3 ----------------------------------------------------------------------

Outcome sphere_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Dimension> dims;
  for (int j = 0; j < 5; ++j) dims.push_back({"x" + std::to_string(j), 0.0, 10.0});
  const SearchSpace space(dims);
  int successes = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, {0xce}));
    Eigen::VectorXd c(5);
    for (auto& v : c) v = uniform(rng, 1.0, 9.0);
    PSOConfig cfg;
    cfg.max_iters = 100;
    cfg.seed = seed;
    const auto r = pso_optimize(
        space, cfg,
        make_batch_objective([c](const Eigen::VectorXd& x) { return -(x - c).squaredNorm(); }));
    const double err = (r.best_position - c).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    successes += err <= kSphereTol;
  }
  const double secs = seconds_since(t0);
  return {successes >= kSphereMinSuccess && secs < kSphereSeconds,
          std::to_string(successes) + "/10 within " + fmt(kSphereTol) + " (worst " + fmt(worst) +
              "), " + fmt(secs) + " s"};
}

// --- 4 ----------------------------------------------------------------------

Outcome optimizer_vs_baseline() {
  const auto t0 = std::chrono::steady_clock::now();
  if (cli({"--seed", "11", "synth", "--out-dir", p("fixture"), "--count", "2", "--frames", "16",
           "--H", "16", "--W", "16", "--C", "1"}) != 0)
    return {false, "synth failed"};
  if (cli({"--seed", "7", "bench", "--videos", p("fixture"), "--samples", "2", "--reps", "5",
           "--baseline-seeds", "10", "-o", p("bench.json"), "--csv", p("bench.csv")}) != 0)
    return {false, "bench failed"};
  const json b = read_json(p("bench.json"));
  bool rows_ok = b["rows"].size() == 4;
  for (const auto& row : b["rows"]) rows_ok = rows_ok && row["runs"].size() == 5;
  const auto& base = b["baseline"];
  const double pso = base["pso_mean"], rnd = base["random_mean"];
  std::cout << cli::render_bench_table(b);
  return {rows_ok && base["seeds"] == 10 && pso >= rnd,
          "pso mean " + fmt(pso) + " vs random " + fmt(rnd) + " over 10 seeds, " +
              std::to_string(b["rows"].size()) + " rows, " + fmt(seconds_since(t0)) + " s"};
}

// --- 5 ----------------------------------------------------------------------

Outcome stream_latency() {
  if (cli({"--seed", "3", "synth", "--out-dir", p("stream"), "--count", "1", "--frames", "16",
           "--H", "112", "--W", "112", "--C", "3"}) != 0)
    return {false, "synth failed"};
  if (cli({"stream", "--input", p("stream/clip_000.u3dt"), "--frames", "300", "--output",
           p("stream_out.u3dt"), "--report", p("latency.json")}) != 0)
    return {false, "stream failed"};
  const json r = read_json(p("latency.json"));
  const double inject = r["inject_seconds"]["mean"], e2e = r["end_to_end_seconds"]["mean"];
  return {r["frames"] == 300 && inject <= kInjectMeanMax && e2e <= kEndToEndMeanMax,
          "300 frames 112x112x3: inject mean " + fmt(inject * 1e3) + " ms (p95 " +
              fmt(r["inject_seconds"]["p95"].get<double>() * 1e3) + "), end-to-end mean " +
              fmt(e2e * 1e3) + " ms"};
}

// --- 6 ----------------------------------------------------------------------

Outcome offset_mechanics() {
  const std::string T = "8";
  if (cli({"--seed", "5", "synth", "--out-dir", p("long"), "--count", "3", "--frames", "32", "--H",
           "32", "--W", "32", "--C", "3"}) != 0)
    return {false, "synth failed"};
  if (cli({"--seed", "5", "generate", "--T", T, "--H", "32", "--W", "32", "-o", p("v8.u3dt")}) != 0)
    return {false, "generate failed"};
  int identical = 0, total = 0;
  for (int o = -3; o < 10; ++o) {
    const std::string a = p("off_a"), b = p("off_b");
    fs::remove_all(a);
    fs::remove_all(b);
    cli({"inject", "--clips", p("long"), "--volume", p("v8.u3dt"), "--offset", std::to_string(o),
         "--out-dir", a});
    cli({"inject", "--clips", p("long"), "--volume", p("v8.u3dt"), "--offset",
         std::to_string(o + 8), "--out-dir", b});
    for (const auto& e : fs::directory_iterator(p("long"))) {
      ++total;
      const auto name = e.path().filename();
      const std::string x = slurp(fs::path(a) / name), y = slurp(fs::path(b) / name);
      identical += !x.empty() && x == y;
    }
  }
  if (cli({"evaluate", "--clips", p("long"), "--volume", p("v8.u3dt"), "--offsets", "10",
           "--report", p("sr_table.json")}) != 0)
    return {false, "evaluate failed"};
  const json t = read_json(p("sr_table.json"));
  std::string table;
  for (const auto& row : t["offsets"])
    table += " " + std::to_string(row["offset"].get<int>()) + ":" + fmt(row["sr"].get<double>());
  return {identical == total && total > 0 && t["offsets"].size() == 10,
          std::to_string(identical) + "/" + std::to_string(total) +
              " outputs identical for o vs o+T; SR table" + table};
}

// --- 7 ----------------------------------------------------------------------

double reference_distance(const Tensor& a, const Tensor& b, double alpha) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    const double px = (x > 0) - (x < 0) ? std::copysign(std::pow(std::abs(x), alpha), x) : 0.0;
    const double py = (y > 0) - (y < 0) ? std::copysign(std::pow(std::abs(y), alpha), y) : 0.0;
    sum += (px - py) * (px - py);
  }
  return std::sqrt(sum);
}

Outcome feature_distance_check() {
  const BuiltinExtractor ex(9);
  Rng rng(derive_seed(77, {7}));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    Tensor a({16, 16, 16, 3}), b({16, 16, 16, 3});
    for (auto& v : a.values()) v = float(uniform(rng, 0, 255));
    for (auto& v : b.values()) v = float(uniform(rng, 0, 255));
    const VideoClip va(a), vb(b);
    const std::size_t d = 1 + std::size_t(k) % ex.num_layers();
    const double got = layer_distance(va, vb, d, ex, {});
    const double want = reference_distance(ex.extract(va)[d - 1], ex.extract(vb)[d - 1], 0.5);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  Tensor z({2});
  z[0] = 4.0f;
  z[1] = -9.0f;
  const Tensor pz = power_normalize(z, 0.5);
  const bool exact = pz[0] == 2.0f && pz[1] == -3.0f;
  return {worst <= kFeatureRelTol && exact,
          "max rel err " + fmt(worst) + " over 50 pairs; P(4,0.5)=" + fmt(pz[0]) +
              " P(-9,0.5)=" + fmt(pz[1])};
}

// --- 8 ----------------------------------------------------------------------

// Counts every video the wrapped oracle is asked to classify.
class CountingOracle final : public QueryOracle {
 public:
  explicit CountingOracle(QueryOracle& inner) : inner_(inner) {}
  std::size_t query_set_size() const override { return inner_.query_set_size(); }
  std::vector<int> clean_labels() const override { return inner_.clean_labels(); }
  std::vector<int> perturbed_labels(const PerturbationVolume& vol, std::int64_t offset) override {
    auto labels = inner_.perturbed_labels(vol, offset);
    count += labels.size();
    return labels;
  }
  std::size_t count = 0;

 private:
  QueryOracle& inner_;
};

Outcome hybrid_budget() {
  std::vector<VideoClip> clips;
  for (std::uint64_t i = 0; i < 4; ++i) clips.push_back(make_synthetic_clip(16, 16, 16, 3, 40 + i));
  const BuiltinExtractor ex(0);
  FitnessConfig fc;
  fc.sample_count = 2;
  const FitnessEvaluator ev(ex, clips, fc);
  BuiltinOracle builtin(1, clips);

  bool within = true;
  std::string detail;
  for (std::size_t limit : {0u, 3u, 7u, 20u, 41u, 1000u}) {
    CountingOracle oracle(builtin);
    QueryBudget budget(limit);
    const HybridConfig h{10.0, &oracle, &budget};
    AttackSettings settings;
    settings.pso.swarm_size = 4;
    settings.pso.max_iters = 4;
    const auto r = noise_opt(ev, SearchSpace::perlin(), NoiseSpec{}, settings, &h);
    within = within && oracle.count <= limit && r.oracle_queries == oracle.count &&
             budget.used() == oracle.count;
    detail += " B=" + std::to_string(limit) + ":" + std::to_string(oracle.count);
  }

  // Same law through the CLI.
  cli({"--seed", "2", "synth", "--out-dir", p("hyb"), "--count", "3", "--frames", "16", "--H", "16",
       "--W", "16", "--C", "3"});
  const int rc = cli({"optimize", "--videos", p("hyb"), "--samples", "1", "--swarm", "3",
                      "--iters", "3", "--hybrid", "--omega", "10", "--budget", "10", "--query-set",
                      "3", "-o", p("hyb.json")});
  const std::size_t cli_queries =
      rc == 0 ? read_json(p("hyb.json"))["hybrid"]["oracle_queries"].get<std::size_t>() : 999;
  within = within && rc == 0 && cli_queries <= 10;
  detail += "; cli B=10:" + std::to_string(cli_queries);

  bool bit_exact = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NoiseSpec s;
    s.seed = seed;
    const auto vol = generate_volume(s, 16, 16);
    QueryBudget budget(100);
    const double a = hybrid_fitness(ev, vol, HybridConfig{0.0, &builtin, &budget});
    const double b = ev.evaluate(vol);
    bit_exact = bit_exact && std::memcmp(&a, &b, sizeof a) == 0;
  }
  return {within && bit_exact,
          "queries used per budget" + detail + "; omega=0 bit-exact " + (bit_exact ? "yes" : "no")};
}

// --- 9 ----------------------------------------------------------------------

bool same_after_strip(const fs::path& a, const fs::path& b) {
  return cli::strip_timings(read_json(a)).dump() == cli::strip_timings(read_json(b)).dump();
}

Outcome determinism() {
  cli({"--seed", "21", "synth", "--out-dir", p("det"), "--count", "2", "--frames", "16", "--H",
       "16", "--W", "16", "--C", "3"});
  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> json_out, raw_out;
  };
  const std::vector<Case> cases{
      {"generate",
       {"generate", "--T", "8", "--H", "48", "--W", "48", "-o", p("det_gen.u3dt")},
       {},
       {"det_gen.u3dt"}},
      {"optimize",
       {"optimize", "--videos", p("det"), "--samples", "2", "--swarm", "4", "--iters", "3", "-o",
        p("det_opt.json"), "--volume-out", p("det_opt.u3dt")},
       {"det_opt.json"},
       {"det_opt.u3dt"}},
      {"bench",
       {"bench", "--videos", p("det"), "--samples", "1", "--swarm", "3", "--iters", "2", "--reps",
        "2", "--baseline-seeds", "2", "-o", p("det_bench.json")},
       {"det_bench.json"},
       {}},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    std::vector<std::string> args{"--seed", "13", "--threads", "1", "--manifest-out",
                                  p(c.name + ".manifest.json")};
    args.insert(args.end(), c.args.begin(), c.args.end());
    bool same = cli(args) == 0;
    for (const auto& f : c.json_out) fs::copy_file(p(f), p(f + ".t1"), fs::copy_options::overwrite_existing);
    for (const auto& f : c.raw_out) fs::copy_file(p(f), p(f + ".t1"), fs::copy_options::overwrite_existing);
    same = same && cli({"replay", "--manifest", p(c.name + ".manifest.json"), "--with-threads",
                        std::to_string(kManyThreads)}) == 0;
    for (const auto& f : c.json_out) same = same && same_after_strip(p(f), p(f + ".t1"));
    for (const auto& f : c.raw_out) same = same && slurp(p(f)) == slurp(p(f + ".t1"));
    ok = ok && same;
    detail += " " + c.name + (same ? " identical" : " DIFFERS");
  }
  return {ok, "1 vs " + std::to_string(kManyThreads) + " threads:" + detail};
}

}  // namespace

int main() {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"bound certification", bound_certification},
      {"shift expectation", shift_expectation},
      {"sphere benchmark", sphere_benchmark},
      {"optimizer vs baseline", optimizer_vs_baseline},
      {"stream latency", stream_latency},
      {"offset mechanics", offset_mechanics},
      {"feature distance", feature_distance_check},
      {"hybrid budget", hybrid_budget},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
