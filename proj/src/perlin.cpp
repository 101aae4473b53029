#include "u3d/noise.hpp"
#include "u3d/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace u3d {
namespace {

double fade(double u) { return u * u * u * (u * (u * 6.0 - 15.0) + 10.0); }

double lerp(double a, double b, double w) { return a + w * (b - a); }

// Dot product with one of the 12 cube-edge gradients (the four extra hash
// values repeat edges, as in the reference implementation).
double grad(std::uint8_t hash, double x, double y, double z) {
  switch (hash & 15) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x + z;
    case 5: return -x + z;
    case 6: return x - z;
    case 7: return -x - z;
    case 8: return y + z;
    case 9: return -y + z;
    case 10: return y - z;
    case 11: return -y - z;
    case 12: return x + y;
    case 13: return -y + z;
    case 14: return -x + y;
    default: return -y - z;
  }
}

}  // namespace

PerlinLattice::PerlinLattice(std::uint64_t seed) : seed_(seed) {
  std::array<std::uint8_t, 256> p{};
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  Rng rng(derive_seed(seed, {0x9e11}));
  for (std::size_t i = p.size() - 1; i > 0; --i)
    std::swap(p[i], p[uniform_index(rng, i + 1)]);
  for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = p[i & 255];
}

double PerlinLattice::operator()(double x, double y, double t) const {
  const double fx = std::floor(x), fy = std::floor(y), ft = std::floor(t);
  const int X = static_cast<int>(static_cast<std::int64_t>(fx) & 255);
  const int Y = static_cast<int>(static_cast<std::int64_t>(fy) & 255);
  const int Z = static_cast<int>(static_cast<std::int64_t>(ft) & 255);
  x -= fx;
  y -= fy;
  t -= ft;
  const double u = fade(x), v = fade(y), w = fade(t);

  const int A = perm_[X] + Y, AA = perm_[A] + Z, AB = perm_[A + 1] + Z;
  const int B = perm_[X + 1] + Y, BA = perm_[B] + Z, BB = perm_[B + 1] + Z;

  const double value =
      lerp(lerp(lerp(grad(perm_[AA], x, y, t), grad(perm_[BA], x - 1, y, t), u),
                lerp(grad(perm_[AB], x, y - 1, t), grad(perm_[BB], x - 1, y - 1, t), u), v),
           lerp(lerp(grad(perm_[AA + 1], x, y, t - 1), grad(perm_[BA + 1], x - 1, y, t - 1), u),
                lerp(grad(perm_[AB + 1], x, y - 1, t - 1),
                     grad(perm_[BB + 1], x - 1, y - 1, t - 1), u),
                v),
           w);
  return std::clamp(value, -1.0, 1.0);
}

double perlin_base(double x, double y, double t, std::uint64_t seed) {
  thread_local PerlinLattice cached(seed);
  if (cached.seed() != seed) cached = PerlinLattice(seed);
  return cached(x, y, t);
}

double u3dp_value(double x, double y, double t, const PerlinParams& p,
                  const PerlinLattice& lattice) {
  double sum = 0.0;
  double scale = 1.0;
  for (int octave = 0; octave <= p.num_octaves; ++octave) {
    sum += lattice(x * scale / p.lambda_x, y * scale / p.lambda_y, t * scale / p.lambda_t);
    scale *= 2.0;
  }
  return std::sin(sum * 2.0 * std::numbers::pi * p.phi);
}

double u3dp_value(double x, double y, double t, const PerlinParams& p, std::uint64_t seed) {
  thread_local PerlinLattice cached(seed);
  if (cached.seed() != seed) cached = PerlinLattice(seed);
  return u3dp_value(x, y, t, p, cached);
}

}  // namespace u3d
