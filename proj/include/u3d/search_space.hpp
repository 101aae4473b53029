#pragma once

#include "u3d/noise_spec.hpp"
#include "u3d/rng.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace u3d {

enum class DimKind { Continuous, Integer };

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  DimKind kind = DimKind::Continuous;
};

// Axis-aligned box. Optimizer state stays continuous; integer dimensions are
// rounded to nearest only when a point is decoded.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Dimension> dims);

  // lambda_x, lambda_y, lambda_t in [2, 180]; num_octaves in [1, 5]; phi in [1, 60].
  static SearchSpace perlin();
  // K in [1, 5]; sigma in [1, 20]; F in [0.25, 20].
  static SearchSpace gabor();
  static SearchSpace for_variant(NoiseVariant v);

  Eigen::Index size() const { return static_cast<Eigen::Index>(dims_.size()); }
  const std::vector<Dimension>& dims() const { return dims_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  Eigen::VectorXd width() const { return upper_ - lower_; }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower_).cwiseMin(upper_);
  }
  bool contains(const Eigen::VectorXd& x) const {
    return x.size() == size() && (x.array() >= lower_.array()).all() &&
           (x.array() <= upper_.array()).all();
  }
  Eigen::VectorXd sample(Rng& rng) const;
  // Integer dimensions rounded to nearest.
  Eigen::VectorXd round_integers(const Eigen::VectorXd& x) const;

 private:
  std::vector<Dimension> dims_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

// Writes point x into the variant parameters of `base` (T, epsilon, seeds and
// Gabor density/orientations are kept).
NoiseSpec decode(const NoiseSpec& base, const Eigen::VectorXd& x);
Eigen::VectorXd encode(const NoiseSpec& spec);

}  // namespace u3d
