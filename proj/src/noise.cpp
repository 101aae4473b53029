#include "u3d/noise.hpp"

#include "u3d/error.hpp"
#include "u3d/parallel.hpp"
#include "u3d/rng.hpp"

#include <cmath>
#include <string>

namespace u3d {

namespace detail {
double gabor_sum(double x, double y, std::int64_t t, const GaborParams& g,
                 const std::vector<GaborOrientation>& orientations);
}

std::string to_string(NoiseVariant v) {
  return v == NoiseVariant::Perlin ? "perlin" : "gabor";
}

NoiseVariant parse_variant(const std::string& name) {
  if (name == "perlin") return NoiseVariant::Perlin;
  if (name == "gabor") return NoiseVariant::Gabor;
  throw ValidationError("unknown noise variant '" + name + "' (expected perlin|gabor)");
}

void validate(const NoiseSpec& spec) {
  if (spec.T < 1) throw ValidationError("perturbation period T must be >= 1");
  if (!(spec.epsilon > 0.0) || !std::isfinite(spec.epsilon))
    throw ValidationError("epsilon must be a positive finite number");
  if (const auto* p = std::get_if<PerlinParams>(&spec.params)) {
    for (double lambda : {p->lambda_x, p->lambda_y, p->lambda_t})
      if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ValidationError("Perlin wavelengths must be positive");
    if (p->num_octaves < 0) throw ValidationError("num_octaves must be >= 0");
    if (!(p->phi > 0.0) || !std::isfinite(p->phi)) throw ValidationError("phi must be positive");
  } else {
    const auto& g = std::get<GaborParams>(spec.params);
    if (!(g.sigma > 0.0) || !std::isfinite(g.sigma)) throw ValidationError("sigma must be positive");
    if (!std::isfinite(g.K) || !std::isfinite(g.F)) throw ValidationError("K and F must be finite");
    if (!(g.impulse_density > 0.0) || !std::isfinite(g.impulse_density))
      throw ValidationError("impulse_density must be positive");
    if (g.num_orientations < 1) throw ValidationError("num_orientations must be >= 1");
  }
}

std::vector<std::string> out_of_search_box(const NoiseSpec& spec) {
  std::vector<std::string> out;
  auto check = [&](const char* name, double v, double lo, double hi) {
    if (v < lo || v > hi) out.emplace_back(name);
  };
  if (const auto* p = std::get_if<PerlinParams>(&spec.params)) {
    check("lambda_x", p->lambda_x, 2, 180);
    check("lambda_y", p->lambda_y, 2, 180);
    check("lambda_t", p->lambda_t, 2, 180);
    check("num_octaves", p->num_octaves, 1, 5);
    check("phi", p->phi, 1, 60);
  } else {
    const auto& g = std::get<GaborParams>(spec.params);
    check("K", g.K, 1, 5);
    check("sigma", g.sigma, 1, 20);
    check("F", g.F, 0.25, 20);
  }
  return out;
}

void to_json(nlohmann::ordered_json& j, const PerlinParams& p) {
  j = {{"lambda_x", p.lambda_x}, {"lambda_y", p.lambda_y}, {"lambda_t", p.lambda_t},
       {"num_octaves", p.num_octaves}, {"phi", p.phi}};
}

void from_json(const nlohmann::ordered_json& j, PerlinParams& p) {
  PerlinParams d;
  p.lambda_x = j.value("lambda_x", d.lambda_x);
  p.lambda_y = j.value("lambda_y", d.lambda_y);
  p.lambda_t = j.value("lambda_t", d.lambda_t);
  p.num_octaves = j.value("num_octaves", d.num_octaves);
  p.phi = j.value("phi", d.phi);
}

void to_json(nlohmann::ordered_json& j, const GaborParams& p) {
  j = {{"K", p.K}, {"sigma", p.sigma}, {"F", p.F}, {"impulse_density", p.impulse_density},
       {"num_orientations", p.num_orientations}, {"seed", p.seed}};
}

void from_json(const nlohmann::ordered_json& j, GaborParams& p) {
  GaborParams d;
  p.K = j.value("K", d.K);
  p.sigma = j.value("sigma", d.sigma);
  p.F = j.value("F", d.F);
  p.impulse_density = j.value("impulse_density", d.impulse_density);
  p.num_orientations = j.value("num_orientations", d.num_orientations);
  p.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::ordered_json& j, const NoiseSpec& s) {
  j = nlohmann::ordered_json::object();
  j["variant"] = to_string(s.variant());
  j["T"] = s.T;
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  std::visit([&](const auto& p) { j["params"] = p; }, s.params);
}

void from_json(const nlohmann::ordered_json& j, NoiseSpec& s) {
  try {
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    const auto& params = j.contains("params") ? j.at("params") : nlohmann::ordered_json::object();
    if (variant == NoiseVariant::Perlin)
      s.params = params.get<PerlinParams>();
    else
      s.params = params.get<GaborParams>();
    s.T = j.value("T", 16u);
    s.epsilon = j.value("epsilon", 8.0);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed noise spec: ") + e.what());
  }
}

PerturbationVolume volume_from_tensor(Tensor t, double epsilon) {
  if (t.ndim() != 3) throw ValidationError("perturbation volume must be 3-D (T, H, W)");
  if (!t.all_finite()) throw ValidationError("perturbation volume contains non-finite values");
  PerturbationVolume vol;
  vol.epsilon = std::max<double>(epsilon, t.values().abs().maxCoeff());
  vol.spec.T = t.dim(0);
  vol.spec.epsilon = vol.epsilon;
  vol.volume = std::move(t);
  return vol;
}

PerturbationVolume temporal_shift(const PerturbationVolume& vol, std::int64_t tau) {
  PerturbationVolume out = vol;
  const std::uint32_t T = vol.frames();
  const std::size_t n = vol.frame_size();
  for (std::uint32_t t = 0; t < T; ++t) {
    const float* src = vol.frame(wrap_index(std::int64_t{t} + tau, T));
    std::copy(src, src + n, out.volume.data() + t * n);
  }
  return out;
}

std::vector<double> raw_noise(const NoiseSpec& spec, std::uint32_t H, std::uint32_t W,
                              std::uint64_t seed, unsigned threads) {
  validate(spec);
  if (H < 1 || W < 1) throw ValidationError("volume extents must be >= 1");
  const std::size_t plane = std::size_t{H} * W;
  std::vector<double> raw(spec.T * plane);

  if (const auto* p = std::get_if<PerlinParams>(&spec.params)) {
    const PerlinLattice lattice(seed);
    parallel_for(spec.T, threads, [&](std::size_t t) {
      double* out = raw.data() + t * plane;
      for (std::uint32_t y = 0; y < H; ++y)
        for (std::uint32_t x = 0; x < W; ++x)
          out[std::size_t{y} * W + x] = u3dp_value(x, y, static_cast<double>(t), *p, lattice);
    });
  } else {
    GaborParams g = std::get<GaborParams>(spec.params);
    g.seed = derive_seed(seed, {g.seed});
    const auto orientations = gabor_orientations(g);
    parallel_for(spec.T, threads, [&](std::size_t t) {
      double* out = raw.data() + t * plane;
      for (std::uint32_t y = 0; y < H; ++y)
        for (std::uint32_t x = 0; x < W; ++x)
          out[std::size_t{y} * W + x] =
              detail::gabor_sum(x, y, static_cast<std::int64_t>(t), g, orientations);
    });
  }
  return raw;
}

PerturbationVolume generate_volume(const NoiseSpec& spec, std::uint32_t H, std::uint32_t W,
                                   std::uint64_t seed, unsigned threads) {
  const std::vector<double> raw = raw_noise(spec, H, W, seed, threads);
  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));

  PerturbationVolume vol;
  vol.spec = spec;
  vol.epsilon = spec.epsilon;
  vol.volume = Tensor({spec.T, H, W});
  if (peak == 0.0) return vol;

  const double scale = spec.epsilon / peak;
  const float bound = static_cast<float>(spec.epsilon);
  // If epsilon is not representable in float, the nearest float may exceed it;
  // the certified bound is the largest float not above epsilon.
  const float cap = static_cast<double>(bound) > spec.epsilon
                        ? std::nextafter(bound, 0.0f)
                        : bound;
  float* out = vol.volume.data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = static_cast<float>(raw[i] * scale);
    out[i] = std::clamp(v, -cap, cap);
  }
  return vol;
}

}  // namespace u3d
