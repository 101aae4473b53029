#include "u3d/noise.hpp"
#include "u3d/rng.hpp"

#include <cmath>

namespace u3d {
namespace {

// Per-cell generator: cheap to seed, one per (seed, frame, cell).
class CellStream {
 public:
  explicit CellStream(std::uint64_t state) : state_(state) {}
  double next01() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Knuth's multiplication method; exact for the small per-cell means used here.
int poisson(CellStream& s, double mean) {
  const double limit = std::exp(-mean);
  int k = 0;
  double p = s.next01();
  while (p > limit) {
    ++k;
    p *= s.next01();
  }
  return k;
}

std::uint64_t cell_key(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

double gabor_support_radius(double sigma) {
  return std::sqrt(-std::log(0.05) / std::numbers::pi) / sigma;
}

std::vector<GaborOrientation> gabor_orientations(const GaborParams& g) {
  Rng rng(derive_seed(g.seed, {0x0a1e}));
  std::vector<GaborOrientation> out(static_cast<std::size_t>(std::max(g.num_orientations, 0)));
  for (auto& o : out) {
    o.theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    o.omega = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  return out;
}

std::vector<std::array<double, 2>> gabor_impulses_near(const GaborParams& g, std::int64_t t,
                                                       double x, double y, double radius) {
  std::vector<std::array<double, 2>> points;
  const double cell = 1.0 / g.sigma;
  const auto i0 = static_cast<std::int64_t>(std::floor((x - radius) / cell));
  const auto i1 = static_cast<std::int64_t>(std::floor((x + radius) / cell));
  const auto j0 = static_cast<std::int64_t>(std::floor((y - radius) / cell));
  const auto j1 = static_cast<std::int64_t>(std::floor((y + radius) / cell));
  const double r2 = radius * radius;
  for (std::int64_t j = j0; j <= j1; ++j) {
    for (std::int64_t i = i0; i <= i1; ++i) {
      CellStream s(derive_seed(g.seed, {cell_key(t), cell_key(i), cell_key(j)}));
      const int count = poisson(s, g.impulse_density);
      for (int k = 0; k < count; ++k) {
        const double px = (static_cast<double>(i) + s.next01()) * cell;
        const double py = (static_cast<double>(j) + s.next01()) * cell;
        const double dx = x - px, dy = y - py;
        if (dx * dx + dy * dy <= r2) points.push_back({px, py});
      }
    }
  }
  return points;
}

namespace detail {

double gabor_sum(double x, double y, std::int64_t t, const GaborParams& g,
                 const std::vector<GaborOrientation>& orientations) {
  const double radius = gabor_support_radius(g.sigma);
  double sum = 0.0;
  for (const auto& p : gabor_impulses_near(g, t, x, y, radius)) {
    for (const auto& o : orientations)
      sum += gabor_kernel(x - p[0], y - p[1], 0.0, g.K, g.sigma, g.F, o.theta, o.omega);
  }
  return sum;
}

}  // namespace detail

double u3dg_raw(double x, double y, std::int64_t t, const GaborParams& g) {
  return detail::gabor_sum(x, y, t, g, gabor_orientations(g));
}

}  // namespace u3d
