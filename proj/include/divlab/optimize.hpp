#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "divlab/dist.hpp"
#include "divlab/divergence.hpp"
#include "divlab/errors.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/grid.hpp"
#include "divlab/nats.hpp"
#include "divlab/objectives.hpp"
#include "divlab/rng.hpp"

namespace divlab {

struct OptConfig {
  std::size_t max_iters = 20000;
  double step_size = 1.0;
  double grad_tolerance = 1e-9;
  double objective_tolerance = 1e-15;
  double fd_step = 1e-4;
  RngSeed seed{0};
  /// Restart 0 starts from uniform logits; restart r >= 1 draws N(0, 1)
  /// logits from split(seed, r).
  std::size_t restarts = 1;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("OptConfig: max_iters must be at least 1");
    if (!(step_size > 0.0) || !(grad_tolerance > 0.0) || !(objective_tolerance > 0.0) || !(fd_step > 0.0)) {
      throw InvalidArgument("OptConfig: step size, tolerances and fd_step must be positive");
    }
    if (restarts < 1) throw InvalidArgument("OptConfig: restarts must be at least 1");
  }
};

struct OptResult {
  /// Final point: cell probabilities for simplex problems, raw parameters otherwise.
  std::vector<double> params;
  /// Final logits for simplex problems; empty otherwise.
  std::vector<double> logits;
  Nats objective_value;
  std::vector<double> trace;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Smallest step the backtracking line search will try.
inline constexpr double kMinStep = 1e-12;

inline std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// Pulls a gradient with respect to the cells q = softmax(theta) back to
/// the logits: q * (g - <q, g>).
inline std::vector<double> chain_through_softmax(std::span<const double> q, std::vector<double> g) {
  double mean = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) mean += q[c] * g[c];
  for (std::size_t c = 0; c < q.size(); ++c) g[c] = q[c] * (g[c] - mean);
  return g;
}

/// Central differences, one coordinate at a time.
inline std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                                      std::span<const double> x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_difference_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteObjective("finite_difference_gradient: objective not finite near the probe point");
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Gradient descent with Armijo backtracking. The step halves until the
/// sufficient-decrease test passes (floor kMinStep) and doubles after each
/// accepted step, capped at 1000x the configured step.
inline OptResult descend(const std::function<double(std::span<const double>)>& f,
                         const std::function<std::vector<double>(std::span<const double>)>& grad,
                         std::vector<double> x, const OptConfig& cfg) {
  OptResult res;
  double fx = f(x);
  if (!std::isfinite(fx)) throw NonFiniteObjective("objective is not finite at the initial point");
  res.trace.push_back(fx);

  double step = cfg.step_size;
  const double max_step = 1000.0 * cfg.step_size;
  std::vector<double> trial(x.size());
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const std::vector<double> g = grad(x);
    const double gnorm = norm2(g);
    if (!std::isfinite(gnorm)) throw NonFiniteObjective("gradient is not finite");
    if (gnorm < cfg.grad_tolerance) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double f_trial = fx;
    while (step >= kMinStep) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - step * g[i];
      f_trial = f(trial);
      if (std::isfinite(f_trial) && f_trial <= fx - 1e-4 * step * gnorm * gnorm) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable descent left along the gradient.
      res.converged = gnorm < std::sqrt(cfg.grad_tolerance);
      break;
    }
    const double change = fx - f_trial;
    x.swap(trial);
    fx = f_trial;
    res.trace.push_back(fx);
    res.iterations = it + 1;
    step = std::min(2.0 * step, max_step);
    if (change <= cfg.objective_tolerance * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  res.params = std::move(x);
  res.objective_value = Nats::from_raw(fx);
  return res;
}

inline std::vector<double> initial_logits(std::size_t cells, std::size_t restart, RngSeed seed) {
  std::vector<double> logits(cells, 0.0);
  if (restart == 0) return logits;
  Rng rng(split(seed, restart));
  for (double& v : logits) v = rng.normal();
  return logits;
}

}  // namespace detail

/// Minimizes f over the probability simplex on `cells` entries through
/// softmax logits. `cell_grad` returns df/dq at a strictly positive q. The
/// best of cfg.restarts runs is returned; ties go to the earliest restart.
inline OptResult minimize_simplex(const std::function<double(std::span<const double>)>& f,
                                  const std::function<std::vector<double>(std::span<const double>)>& cell_grad,
                                  std::size_t cells, const OptConfig& cfg) {
  cfg.validate();
  const auto on_logits = [&](std::span<const double> theta) { return f(softmax(theta)); };
  const auto logit_grad = [&](std::span<const double> theta) {
    const std::vector<double> q = softmax(theta);
    return chain_through_softmax(q, cell_grad(q));
  };

  OptResult best;
  bool have_best = false;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    OptResult run = detail::descend(on_logits, logit_grad, detail::initial_logits(cells, r, cfg.seed), cfg);
    if (!have_best || run.objective_value < best.objective_value) {
      best = std::move(run);
      have_best = true;
    }
  }
  best.logits = best.params;
  best.params = softmax(best.logits);
  return best;
}

/// Gradient descent on the K*K joint logits of Q for objective `kind` at data P.
inline OptResult minimize_discrete(const ObjectiveKind& kind, const DiscreteJoint& p, const OptConfig& cfg) {
  const std::size_t k = p.alphabet_size();
  {
    const Nats at_uniform = evaluate(kind, p, DiscreteJoint::uniform(k));
    if (at_uniform.is_infinite()) {
      throw NonFiniteObjective("objective " + objective_name(kind) + " is infinite at the uniform initializer");
    }
  }
  const auto f = [&](std::span<const double> q) {
    return evaluate(kind, p, DiscreteJoint::normalized(k, std::vector<double>(q.begin(), q.end()))).value();
  };
  const auto g = [&](std::span<const double> q) {
    return cell_gradient(kind, p, DiscreteJoint::normalized(k, std::vector<double>(q.begin(), q.end())));
  };
  return minimize_simplex(f, g, k * k, cfg);
}

/// Analytic gradient of `kind` with respect to the joint logits of Q.
inline std::vector<double> discrete_logit_gradient(const ObjectiveKind& kind, const DiscreteJoint& p,
                                                   std::span<const double> logits) {
  const std::size_t k = p.alphabet_size();
  if (logits.size() != k * k) throw AlphabetMismatch("discrete_logit_gradient: expected K*K logits");
  const std::vector<double> q = softmax(logits);
  return chain_through_softmax(q, cell_gradient(kind, p, DiscreteJoint(k, q)));
}

inline DiscreteJoint as_joint(const OptResult& r, std::size_t k) { return DiscreteJoint::normalized(k, r.params); }

/// Largest simplex grid brute_force_minimize will enumerate.
inline constexpr double kMaxBruteForcePoints = 1e7;

/// Number of points on the regular simplex grid with `divisions` steps over `cells` cells.
inline double simplex_grid_size(std::size_t cells, std::size_t divisions) {
  // C(divisions + cells - 1, cells - 1)
  double count = 1.0;
  for (std::size_t i = 1; i < cells; ++i) {
    count *= static_cast<double>(divisions + i) / static_cast<double>(i);
  }
  return count;
}

/// Exhaustive search over joints whose cells are multiples of 1/divisions.
/// Points are visited in lexicographic order of their cell counts and only
/// a strict improvement replaces the incumbent, so ties resolve to the
/// lexicographically first point. Infinite objective values are skipped.
inline OptResult brute_force_minimize(const ObjectiveKind& kind, const DiscreteJoint& p, std::size_t divisions) {
  const std::size_t k = p.alphabet_size();
  const std::size_t cells = k * k;
  if (divisions < 1) throw InvalidArgument("brute_force_minimize: divisions must be positive");
  if (simplex_grid_size(cells, divisions) > kMaxBruteForcePoints) {
    throw GridTooLarge("brute_force_minimize: simplex grid exceeds 1e7 points");
  }
  const double inv = 1.0 / static_cast<double>(divisions);

  std::vector<std::size_t> counts(cells, 0);
  std::vector<double> q(cells);
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> best_q;
  std::size_t visited = 0;

  // Compositions of `divisions` into `cells` parts, first cell slowest.
  std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t cell, std::size_t remaining) {
    if (cell + 1 == cells) {
      counts[cell] = remaining;
      for (std::size_t c = 0; c < cells; ++c) q[c] = static_cast<double>(counts[c]) * inv;
      ++visited;
      const Nats v = evaluate(kind, p, DiscreteJoint::normalized(k, q));
      if (v.is_finite() && v.value() < best_value) {
        best_value = v.value();
        best_q = q;
      }
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[cell] = c;
      recurse(cell + 1, remaining - c);
    }
  };
  recurse(0, divisions);

  if (best_q.empty()) throw NonFiniteObjective("brute_force_minimize: objective infinite on the whole grid");
  OptResult res;
  res.params = std::move(best_q);
  res.objective_value = Nats::from_raw(best_value);
  res.trace = {best_value};
  res.converged = true;
  res.iterations = visited;
  return res;
}

/// Isotropic Gaussian minimizing KL[P || Q]: moment matching, sigma^2 = tr(S)/2.
inline IsotropicGaussian ml_isotropic_closed_form(const Gaussian2D& p) {
  return IsotropicGaussian(p.mean(), 0.5 * p.covariance().trace());
}

/// Isotropic Gaussian minimizing KL[Q || P]: sigma^2 = 2 / tr(S^-1).
inline IsotropicGaussian exclusive_isotropic_closed_form(const Gaussian2D& p) {
  return IsotropicGaussian(p.mean(), 2.0 / p.covariance().inverse().trace());
}

struct IsotropicFit {
  IsotropicGaussian q;
  /// js_pi on the grid at the fitted Q.
  Nats divergence;
  /// params = (mean_x, mean_y, ln sigma^2); trace holds the scaled objective.
  OptResult opt;
};

/// Default descent settings for the quadrature fits.
inline OptConfig isotropic_fit_defaults() {
  OptConfig cfg;
  cfg.max_iters = 2000;
  cfg.step_size = 1.0;
  cfg.grad_tolerance = 1e-7;
  cfg.objective_tolerance = 1e-13;
  cfg.fd_step = 1e-4;
  return cfg;
}

/// Fits an isotropic Gaussian to P by minimizing js_pi on the quadrature grid.
///
/// Parameters are (mean_x, mean_y, ln sigma^2), started at the grid center
/// with unit variance. The descent runs on js_pi / (pi (1 - pi)), which
/// keeps gradients O(KL) at both ends of the pi range without moving the
/// minimizer. Gradients are central finite differences with cfg.fd_step.
inline IsotropicFit fit_isotropic_detailed(const Gaussian2D& p, MixtureWeight w, const GridSpec& spec,
                                           const OptConfig& cfg) {
  cfg.validate();
  const GridDensity target = grid_from_density([&](const Vec2& x) { return p.density(x); }, spec);
  const double scale = 1.0 / (w.value() * w.complement());
  const auto model = [](std::span<const double> th) { return IsotropicGaussian({th[0], th[1]}, std::exp(th[2])); };
  const auto objective = [&](std::span<const double> th) {
    if (!std::isfinite(th[2]) || std::abs(th[2]) > 50.0) return std::numeric_limits<double>::infinity();
    try {
      return scale * js_pi_grid(target, grid_from_isotropic(model(th), spec), w).value();
    } catch (const DegenerateGrid&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const auto gradient = [&](std::span<const double> th) { return finite_difference_gradient(objective, th, cfg.fd_step); };

  const std::vector<double> start{0.5 * (spec.x_min + spec.x_max), 0.5 * (spec.y_min + spec.y_max), 0.0};
  OptResult opt = detail::descend(objective, gradient, start, cfg);
  IsotropicGaussian q = model(opt.params);
  const Nats div = js_pi_grid(target, grid_from_isotropic(q, spec), w);
  return IsotropicFit{q, div, std::move(opt)};
}

inline IsotropicGaussian fit_isotropic(const Gaussian2D& p, MixtureWeight w, const GridSpec& spec,
                                       const OptConfig& cfg = isotropic_fit_defaults()) {
  return fit_isotropic_detailed(p, w, spec, cfg).q;
}

}  // namespace divlab
