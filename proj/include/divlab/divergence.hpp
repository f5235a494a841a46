#pragma once

// Entropy, cross-entropy, KL and the generalized Jensen-Shannon divergence
//
//   JS_pi[P||Q] = pi KL[P || M] + (1 - pi) KL[Q || M],   M = pi P + (1 - pi) Q
//
// on exact discrete tables and on quadrature grids. All logarithms are
// natural; every value is reported in nats.

#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>

#include "divlab/dist.hpp"
#include "divlab/errors.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/grid.hpp"
#include "divlab/nats.hpp"

namespace divlab {

/// A discrete table the divergences accept: a single distribution or a joint.
template <class T>
concept ProbabilityTable = std::same_as<T, DiscreteDist> || std::same_as<T, DiscreteJoint>;

inline std::span<const double> cells_of(const DiscreteDist& d) { return d.probs(); }
inline std::span<const double> cells_of(const DiscreteJoint& j) { return j.cells(); }

namespace detail {

inline void require_same_shape(std::span<const double> p, std::span<const double> q, const char* op) {
  if (p.size() != q.size()) {
    throw AlphabetMismatch(std::string(op) + ": operands have " + std::to_string(p.size()) + " and " +
                           std::to_string(q.size()) + " cells");
  }
}

inline double entropy_raw(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline double cross_entropy_raw(std::span<const double> p, std::span<const double> q) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

inline double kl_raw(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

/// Sum over cells of pi p ln(p/m) + (1-pi) q ln(q/m). The log ratios are
/// written as log1p of the relative mixture offset so the pi -> 0 and
/// pi -> 1 limits keep full precision.
inline double js_pi_raw(std::span<const double> p, std::span<const double> q, double pi) {
  const double rest = 1.0 - pi;
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pv = p[i];
    const double qv = q[i];
    if (pv > 0.0) {
      // ln(p/m) = -ln(1 + (1-pi)(q/p - 1))
      d -= pi * pv * std::log1p(rest * (qv / pv - 1.0));
    }
    if (qv > 0.0) {
      // ln(q/m) = -ln(1 + pi(p/q - 1))
      d -= rest * qv * std::log1p(pi * (pv / qv - 1.0));
    }
  }
  return d;
}

}  // namespace detail

template <ProbabilityTable T>
Nats entropy(const T& p) {
  return Nats::from_raw(detail::entropy_raw(cells_of(p)));
}

/// -sum p ln q; infinite iff q vanishes somewhere p has mass.
template <ProbabilityTable T>
Nats cross_entropy(const T& p, const T& q) {
  detail::require_same_shape(cells_of(p), cells_of(q), "cross_entropy");
  return Nats::from_raw(detail::cross_entropy_raw(cells_of(p), cells_of(q)));
}

template <ProbabilityTable T>
Nats kl(const T& p, const T& q) {
  detail::require_same_shape(cells_of(p), cells_of(q), "kl");
  return Nats::from_raw(detail::kl_raw(cells_of(p), cells_of(q)));
}

/// Closed-form KL between bivariate Gaussians:
/// 0.5 [tr(Sb^-1 Sa) + d^T Sb^-1 d - 2 + ln(det Sb / det Sa)].
inline Nats kl_gaussian(const Gaussian2D& a, const Gaussian2D& b) {
  const Sym2& sa = a.covariance();
  const Sym2 sb_inv = b.covariance().inverse();
  const double trace_term = sb_inv.xx * sa.xx + 2.0 * sb_inv.xy * sa.xy + sb_inv.yy * sa.yy;
  const Vec2 d{b.mean()[0] - a.mean()[0], b.mean()[1] - a.mean()[1]};
  const double value =
      0.5 * (trace_term + sb_inv.quad(d) - 2.0 + std::log(b.covariance().det() / sa.det()));
  return Nats::from_raw(value);
}

inline Nats kl_gaussian(const IsotropicGaussian& a, const IsotropicGaussian& b) {
  return kl_gaussian(a.as_gaussian(), b.as_gaussian());
}
inline Nats kl_gaussian(const Gaussian2D& a, const IsotropicGaussian& b) {
  return kl_gaussian(a, b.as_gaussian());
}
inline Nats kl_gaussian(const IsotropicGaussian& a, const Gaussian2D& b) {
  return kl_gaussian(a.as_gaussian(), b);
}

/// Generalized Jensen-Shannon divergence with weight pi on p. Always finite.
template <ProbabilityTable T>
Nats js_pi(const T& p, const T& q, MixtureWeight w) {
  detail::require_same_shape(cells_of(p), cells_of(q), "js_pi");
  return Nats::from_raw(detail::js_pi_raw(cells_of(p), cells_of(q), w.value()));
}

template <ProbabilityTable T>
Nats jsd(const T& p, const T& q) {
  return js_pi(p, q, MixtureWeight{0.5});
}

/// Quadrature of the JS_pi integrand over two densities on one grid.
inline Nats js_pi_grid(const GridDensity& p, const GridDensity& q, MixtureWeight w) {
  if (!(p.spec() == q.spec())) throw GridMismatch("js_pi_grid: densities live on different grids");
  return Nats::from_raw(detail::js_pi_raw(p.values(), q.values(), w.value()) * p.cell_area());
}

/// js_pi(p, q, pi) / pi, which tends to kl(p, q) as pi -> 0 with O(pi) error.
template <ProbabilityTable T>
double kl_limit_ratio(const T& p, const T& q, double pi) {
  if (!(pi > 0.0 && pi <= 0.1)) throw InvalidArgument("kl_limit_ratio: pi must lie in (0, 0.1]");
  return js_pi(p, q, MixtureWeight{pi}).value() / pi;
}

/// js_pi(p, q, 1 - pi) / pi, which tends to kl(q, p) as pi -> 0.
template <ProbabilityTable T>
double kl_limit_ratio_mirrored(const T& p, const T& q, double pi) {
  if (!(pi > 0.0 && pi <= 0.1)) throw InvalidArgument("kl_limit_ratio_mirrored: pi must lie in (0, 0.1]");
  return js_pi(p, q, MixtureWeight{1.0 - pi}).value() / pi;
}

}  // namespace divlab
