#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace u3d {

enum class NoiseVariant { Perlin, Gabor };

std::string to_string(NoiseVariant v);
NoiseVariant parse_variant(const std::string& name);

// Octave-summed Perlin noise passed through a sine colour map.
struct PerlinParams {
  double lambda_x = 32.0;
  double lambda_y = 32.0;
  double lambda_t = 32.0;
  int num_octaves = 2;  // octave sum runs over 0..num_octaves inclusive
  double phi = 4.0;

  bool operator==(const PerlinParams&) const = default;
};

// Sparse-convolution Gabor noise with isotropic orientation sampling.
struct GaborParams {
  double K = 2.0;
  double sigma = 4.0;
  double F = 1.0;
  double impulse_density = 0.05;  // expected impulses per (1/sigma)^2 cell
  int num_orientations = 8;
  std::uint64_t seed = 0;

  bool operator==(const GaborParams&) const = default;
};

struct NoiseSpec {
  std::variant<PerlinParams, GaborParams> params = PerlinParams{};
  std::uint32_t T = 16;
  double epsilon = 8.0;
  std::uint64_t seed = 0;

  NoiseVariant variant() const {
    return params.index() == 0 ? NoiseVariant::Perlin : NoiseVariant::Gabor;
  }
  bool operator==(const NoiseSpec&) const = default;
};

// Throws ValidationError for specs that cannot be realized (T = 0, epsilon <= 0,
// non-positive wavelengths, sigma <= 0, ...). Values outside the optimizer's
// search box are accepted; see out_of_search_box.
void validate(const NoiseSpec& spec);

// Names of parameters lying outside the default search ranges.
std::vector<std::string> out_of_search_box(const NoiseSpec& spec);

void to_json(nlohmann::ordered_json& j, const PerlinParams& p);
void from_json(const nlohmann::ordered_json& j, PerlinParams& p);
void to_json(nlohmann::ordered_json& j, const GaborParams& p);
void from_json(const nlohmann::ordered_json& j, GaborParams& p);
void to_json(nlohmann::ordered_json& j, const NoiseSpec& s);
void from_json(const nlohmann::ordered_json& j, NoiseSpec& s);

}  // namespace u3d
