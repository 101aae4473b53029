#pragma once

#include "u3d/noise_spec.hpp"
#include "u3d/volume.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace u3d {

// Classic 3-D gradient-lattice Perlin noise (12 edge gradients, quintic fade)
// over a permutation table shuffled from `seed`.
class PerlinLattice {
 public:
  explicit PerlinLattice(std::uint64_t seed);

  // In [-1, 1]; exactly 0 on integer lattice points.
  double operator()(double x, double y, double t) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint8_t, 512> perm_{};
};

double perlin_base(double x, double y, double t, std::uint64_t seed);

// sin(2*pi*phi * sum_{l=0..octaves} p(x 2^l / lambda_x, y 2^l / lambda_y, t 2^l / lambda_t))
double u3dp_value(double x, double y, double t, const PerlinParams& p,
                  const PerlinLattice& lattice);
double u3dp_value(double x, double y, double t, const PerlinParams& p, std::uint64_t seed);

// 3-D Gabor kernel: K exp(-pi sigma^2 (x^2 + y^2 + t^2)) cos(2 pi F (x' + y' + t'))
// with x' = x sin(theta) cos(omega), y' = y sin(theta) sin(omega), t' = t cos(theta).
template <typename Scalar>
Scalar gabor_kernel(Scalar x, Scalar y, Scalar t, Scalar K, Scalar sigma, Scalar F,
                    Scalar theta, Scalar omega) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar envelope = K * exp(-pi * sigma * sigma * (x * x + y * y + t * t));
  const Scalar phase = x * sin(theta) * cos(omega) + y * sin(theta) * sin(omega) + t * cos(theta);
  return envelope * cos(Scalar(2) * pi * F * phase);
}

struct GaborOrientation {
  double theta = 0.0;
  double omega = 0.0;
};

// Truncation radius of the kernel envelope (where it falls to 5% of K).
double gabor_support_radius(double sigma);

// Orientation samples (theta_i, omega_i) ~ U[0, 2pi)^2, fixed by g.seed.
std::vector<GaborOrientation> gabor_orientations(const GaborParams& g);

// Impulses of frame t lying within `radius` of (x, y). The impulse process is
// a homogeneous Poisson process on the plane, realized per grid cell of side
// 1/sigma with a mean of impulse_density points per cell; each cell's points
// are a pure function of (seed, t, cell), independent of frame extents.
std::vector<std::array<double, 2>> gabor_impulses_near(const GaborParams& g, std::int64_t t,
                                                       double x, double y, double radius);

// Sum over orientations and over impulses of frame t of
// gabor_kernel(x - x_k, y - y_k, 0; ...). Impulses share the pixel's frame, so
// the kernel's temporal offset is zero.
double u3dg_raw(double x, double y, std::int64_t t, const GaborParams& g);

// Evaluates the spec's noise on every (t < T, y < H, x < W), then rescales so
// max |value| == epsilon (or returns zeros when the raw noise vanishes).
PerturbationVolume generate_volume(const NoiseSpec& spec, std::uint32_t H, std::uint32_t W,
                                   std::uint64_t seed, unsigned threads = 1);
inline PerturbationVolume generate_volume(const NoiseSpec& spec, std::uint32_t H,
                                          std::uint32_t W) {
  return generate_volume(spec, H, W, spec.seed);
}

// Pre-rescale noise values, (T, H, W) row-major, in double precision.
std::vector<double> raw_noise(const NoiseSpec& spec, std::uint32_t H, std::uint32_t W,
                              std::uint64_t seed, unsigned threads = 1);

}  // namespace u3d
