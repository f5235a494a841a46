#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "divlab/errors.hpp"
#include "divlab/gaussian.hpp"

namespace divlab {

/// Quadrature normalization tolerance for grid densities.
inline constexpr double kQuadratureTolerance = 1e-3;

namespace detail {

/// Neumaier-compensated sum. A 256^2 grid summed naively drifts by ~1e-13,
/// enough to make renormalization visibly non-idempotent.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

}  // namespace detail

struct GridSpec {
  double x_min = -6.0;
  double x_max = 6.0;
  double y_min = -6.0;
  double y_max = 6.0;
  std::size_t resolution = 256;

  double dx() const { return (x_max - x_min) / static_cast<double>(resolution); }
  double dy() const { return (y_max - y_min) / static_cast<double>(resolution); }
  double cell_area() const { return dx() * dy(); }

  /// Center of cell (i, j); i indexes x, j indexes y.
  Vec2 center(std::size_t i, std::size_t j) const {
    return {x_min + (static_cast<double>(i) + 0.5) * dx(), y_min + (static_cast<double>(j) + 0.5) * dy()};
  }

  void validate() const {
    if (resolution == 0) throw InvalidArgument("grid resolution must be positive");
    if (!(x_max > x_min) || !(y_max > y_min)) throw InvalidArgument("grid bounds are empty");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Mean +/- 6 standard deviations per axis using the largest covariance
/// eigenvalue, so the box is the same for every rotation of the covariance.
inline GridSpec default_grid_for(const Gaussian2D& g, std::size_t resolution = 256) {
  const double half = 6.0 * std::sqrt(g.covariance().eigenvalues()[0]);
  return GridSpec{g.mean()[0] - half, g.mean()[0] + half, g.mean()[1] - half, g.mean()[1] + half,
                  resolution};
}

/// Density sampled at cell centers and renormalized to unit quadrature mass.
class GridDensity {
 public:
  GridDensity(GridSpec spec, std::vector<double> values) : spec_(spec), values_(std::move(values)) {
    spec_.validate();
    if (values_.size() != spec_.resolution * spec_.resolution) {
      throw InvalidArgument("GridDensity: value count differs from resolution^2");
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("GridDensity: negative or non-finite value");
    }
    raw_mass_ = detail::compensated_sum(values_) * spec_.cell_area();
    if (raw_mass_ < 1e-12) throw DegenerateGrid("grid carries no density mass; bounds miss the support");
    const double scale = 1.0 / raw_mass_;
    for (double& v : values_) v *= scale;
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t resolution() const { return spec_.resolution; }
  double cell_area() const { return spec_.cell_area(); }
  /// Row-major with x fastest: index = j * resolution + i.
  std::span<const double> values() const { return values_; }
  double at(std::size_t i, std::size_t j) const { return values_[j * spec_.resolution + i]; }
  /// Quadrature mass before renormalization.
  double raw_mass() const { return raw_mass_; }

  double mass() const { return detail::compensated_sum(values_) * cell_area(); }

  /// Renormalized copy; a fixed point for any GridDensity.
  GridDensity renormalized() const { return GridDensity(spec_, values_); }

 private:
  GridSpec spec_;
  std::vector<double> values_;
  double raw_mass_ = 0.0;
};

inline GridDensity grid_from_density(const std::function<double(const Vec2&)>& density, const GridSpec& spec) {
  spec.validate();
  std::vector<double> values(spec.resolution * spec.resolution);
  for (std::size_t j = 0; j < spec.resolution; ++j) {
    for (std::size_t i = 0; i < spec.resolution; ++i) {
      values[j * spec.resolution + i] = density(spec.center(i, j));
    }
  }
  return GridDensity(spec, std::move(values));
}

/// Isotropic Gaussians are separable, so evaluate one exponential per axis
/// instead of one per cell. The fitting loop calls this thousands of times.
inline GridDensity grid_from_isotropic(const IsotropicGaussian& g, const GridSpec& spec) {
  spec.validate();
  const std::size_t n = spec.resolution;
  std::vector<double> fx(n);
  std::vector<double> fy(n);
  const double inv2v = 0.5 / g.variance();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 c = spec.center(i, i);
    const double dx = c[0] - g.mean()[0];
    const double dy = c[1] - g.mean()[1];
    fx[i] = std::exp(-dx * dx * inv2v);
    fy[i] = std::exp(-dy * dy * inv2v);
  }
  const double norm = 1.0 / (2.0 * std::numbers::pi * g.variance());
  std::vector<double> values(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) values[j * n + i] = norm * fx[i] * fy[j];
  }
  return GridDensity(spec, std::move(values));
}

}  // namespace divlab
