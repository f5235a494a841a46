#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "divlab/errors.hpp"
#include "divlab/rng.hpp"

namespace divlab {

using Vec2 = std::array<double, 2>;

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double trace() const { return xx + yy; }
  double det() const { return xx * yy - xy * xy; }

  Sym2 inverse() const {
    const double d = det();
    return Sym2{yy / d, -xy / d, xx / d};
  }

  /// v^T M v
  double quad(const Vec2& v) const { return xx * v[0] * v[0] + 2.0 * xy * v[0] * v[1] + yy * v[1] * v[1]; }

  std::array<double, 2> eigenvalues() const {
    const double half_tr = 0.5 * trace();
    const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - det()));
    return {half_tr + disc, half_tr - disc};
  }

  static Sym2 identity() { return Sym2{}; }
  static Sym2 diagonal(double a, double b) { return Sym2{a, 0.0, b}; }

  /// R diag(major, minor) R^T with R the rotation by `radians`.
  static Sym2 rotated(double major, double minor, double radians) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    return Sym2{major * c * c + minor * s * s, (major - minor) * c * s, major * s * s + minor * c * c};
  }
};

class Gaussian2D {
 public:
  Gaussian2D(Vec2 mean, Sym2 covariance) : mean_(mean), cov_(covariance) {
    const auto ev = cov_.eigenvalues();
    if (!std::isfinite(mean_[0]) || !std::isfinite(mean_[1])) {
      throw InvalidArgument("Gaussian2D: mean must be finite");
    }
    if (!(ev[1] > 0.0) || !std::isfinite(ev[0])) {
      throw InvalidArgument("Gaussian2D: covariance must be positive definite");
    }
  }

  const Vec2& mean() const { return mean_; }
  const Sym2& covariance() const { return cov_; }

  double density(const Vec2& x) const {
    const Vec2 d{x[0] - mean_[0], x[1] - mean_[1]};
    const double maha = cov_.inverse().quad(d);
    return std::exp(-0.5 * maha) / (2.0 * std::numbers::pi * std::sqrt(cov_.det()));
  }

  Vec2 sample(Rng& rng) const {
    // Cholesky factor of the covariance.
    const double l11 = std::sqrt(cov_.xx);
    const double l21 = cov_.xy / l11;
    const double l22 = std::sqrt(cov_.yy - l21 * l21);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    return {mean_[0] + l11 * z1, mean_[1] + l21 * z1 + l22 * z2};
  }

 private:
  Vec2 mean_;
  Sym2 cov_;
};

class IsotropicGaussian {
 public:
  IsotropicGaussian(Vec2 mean, double variance) : mean_(mean), variance_(variance) {
    if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
      throw InvalidArgument("IsotropicGaussian: variance must be positive, got " +
                            std::to_string(variance_));
    }
  }

  const Vec2& mean() const { return mean_; }
  double variance() const { return variance_; }
  Sym2 covariance() const { return Sym2::diagonal(variance_, variance_); }
  Gaussian2D as_gaussian() const { return Gaussian2D(mean_, covariance()); }

  double density(const Vec2& x) const {
    const double dx = x[0] - mean_[0];
    const double dy = x[1] - mean_[1];
    return std::exp(-0.5 * (dx * dx + dy * dy) / variance_) / (2.0 * std::numbers::pi * variance_);
  }

  Vec2 sample(Rng& rng) const {
    const double sd = std::sqrt(variance_);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    return {mean_[0] + sd * z1, mean_[1] + sd * z2};
  }

 private:
  Vec2 mean_;
  double variance_;
};

inline double gaussian_density(const Gaussian2D& g, const Vec2& x) { return g.density(x); }
inline double gaussian_density(const IsotropicGaussian& g, const Vec2& x) { return g.density(x); }

}  // namespace divlab
