#include "u3d/search_space.hpp"

#include "u3d/error.hpp"

#include <cmath>

namespace u3d {

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  lower_.resize(size());
  upper_.resize(size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    const auto& d = dims_[static_cast<std::size_t>(j)];
    if (!(d.lower < d.upper)) throw ValidationError("dimension '" + d.name + "' needs lower < upper");
    lower_[j] = d.lower;
    upper_[j] = d.upper;
  }
}

SearchSpace SearchSpace::perlin() {
  return SearchSpace({{"lambda_x", 2, 180, DimKind::Continuous},
                      {"lambda_y", 2, 180, DimKind::Continuous},
                      {"lambda_t", 2, 180, DimKind::Continuous},
                      {"num_octaves", 1, 5, DimKind::Integer},
                      {"phi", 1, 60, DimKind::Continuous}});
}

SearchSpace SearchSpace::gabor() {
  return SearchSpace({{"K", 1, 5, DimKind::Continuous},
                      {"sigma", 1, 20, DimKind::Continuous},
                      {"F", 0.25, 20, DimKind::Continuous}});
}

SearchSpace SearchSpace::for_variant(NoiseVariant v) {
  return v == NoiseVariant::Perlin ? perlin() : gabor();
}

Eigen::VectorXd SearchSpace::sample(Rng& rng) const {
  Eigen::VectorXd x(size());
  for (Eigen::Index j = 0; j < size(); ++j) x[j] = uniform(rng, lower_[j], upper_[j]);
  return x;
}

Eigen::VectorXd SearchSpace::round_integers(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = x;
  for (Eigen::Index j = 0; j < size(); ++j)
    if (dims_[static_cast<std::size_t>(j)].kind == DimKind::Integer) out[j] = std::round(out[j]);
  return out;
}

NoiseSpec decode(const NoiseSpec& base, const Eigen::VectorXd& x) {
  NoiseSpec spec = base;
  if (auto* p = std::get_if<PerlinParams>(&spec.params)) {
    if (x.size() != 5) throw ValidationError("Perlin points have 5 coordinates");
    p->lambda_x = x[0];
    p->lambda_y = x[1];
    p->lambda_t = x[2];
    p->num_octaves = static_cast<int>(std::lround(x[3]));
    p->phi = x[4];
  } else {
    auto& g = std::get<GaborParams>(spec.params);
    if (x.size() != 3) throw ValidationError("Gabor points have 3 coordinates");
    g.K = x[0];
    g.sigma = x[1];
    g.F = x[2];
  }
  return spec;
}

Eigen::VectorXd encode(const NoiseSpec& spec) {
  if (const auto* p = std::get_if<PerlinParams>(&spec.params))
    return (Eigen::VectorXd(5) << p->lambda_x, p->lambda_y, p->lambda_t,
            static_cast<double>(p->num_octaves), p->phi)
        .finished();
  const auto& g = std::get<GaborParams>(spec.params);
  return (Eigen::VectorXd(3) << g.K, g.sigma, g.F).finished();
}

}  // namespace u3d
