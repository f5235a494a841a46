#pragma once

// Adversarial training with discriminator class ratio pi.
//
// A training example is real (drawn from P) with probability pi and fake
// (drawn from Q) otherwise. The discriminator maximizes
//
//   V(D) = pi E_P[ln D] + (1 - pi) E_Q[ln(1 - D)],
//
// whose maximizer is D*(x) = pi P(x) / (pi P(x) + (1 - pi) Q(x)), and
//
//   V(D*) = JS_pi[P || Q] - H_b(pi).
//
// So V(D) + H_b(pi) is a lower bound on JS_pi that is tight at D*.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "divlab/dist.hpp"
#include "divlab/divergence.hpp"
#include "divlab/errors.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/nats.hpp"
#include "divlab/optimize.hpp"
#include "divlab/rng.hpp"

namespace divlab {

/// Per-symbol probability that an example is real.
struct TabularDiscriminator {
  std::vector<double> real_prob;
};

/// D(x) = sigmoid(w . phi(x) + b) with phi(x) = (u, v, u^2, v^2, u v),
/// u and v being x standardized by a fixed center and scale.
struct LogisticDiscriminator {
  std::array<double, 5> weights{};
  double bias = 0.0;
  Vec2 center{0.0, 0.0};
  double scale = 1.0;

  std::array<double, 5> features(const Vec2& x) const {
    const double u = (x[0] - center[0]) / scale;
    const double v = (x[1] - center[1]) / scale;
    return {u, v, u * u, v * v, u * v};
  }

  double logit(const Vec2& x) const {
    const auto f = features(x);
    double h = bias;
    for (std::size_t i = 0; i < f.size(); ++i) h += weights[i] * f[i];
    return h;
  }

  /// d logit / dx.
  Vec2 logit_gradient(const Vec2& x) const {
    const double u = (x[0] - center[0]) / scale;
    const double v = (x[1] - center[1]) / scale;
    const double du = weights[0] + 2.0 * weights[2] * u + weights[4] * v;
    const double dv = weights[1] + 2.0 * weights[3] * v + weights[4] * u;
    return {du / scale, dv / scale};
  }
};

using Discriminator = std::variant<TabularDiscriminator, LogisticDiscriminator>;

inline double sigmoid(double h) {
  return h >= 0.0 ? 1.0 / (1.0 + std::exp(-h)) : std::exp(h) / (1.0 + std::exp(h));
}

/// -pi ln pi - (1 - pi) ln(1 - pi)
inline double binary_entropy(MixtureWeight w) {
  const double pi = w.value();
  return -pi * std::log(pi) - (1.0 - pi) * std::log1p(-pi);
}

inline TabularDiscriminator optimal_discriminator(const DiscreteDist& p, const DiscreteDist& q, MixtureWeight w) {
  if (p.size() != q.size()) throw AlphabetMismatch("optimal_discriminator: alphabet sizes differ");
  const double pi = w.value();
  TabularDiscriminator d;
  d.real_prob.resize(p.size());
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double real = pi * p[x];
    const double fake = (1.0 - pi) * q[x];
    d.real_prob[x] = (real + fake) > 0.0 ? real / (real + fake) : pi;
  }
  return d;
}

/// pi E_P[ln D] + (1 - pi) E_Q[ln(1 - D)], in nats. May be -inf.
inline double discriminator_value(const DiscreteDist& p, const DiscreteDist& q, MixtureWeight w,
                                  const TabularDiscriminator& d) {
  if (p.size() != q.size() || d.real_prob.size() != p.size()) {
    throw AlphabetMismatch("discriminator_value: alphabet sizes differ");
  }
  const double pi = w.value();
  double real_term = 0.0;
  double fake_term = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] > 0.0) real_term += p[x] * std::log(d.real_prob[x]);
    if (q[x] > 0.0) fake_term += q[x] * std::log1p(-d.real_prob[x]);
  }
  return pi * real_term + (1.0 - pi) * fake_term;
}

inline DiscreteDist empirical(std::span<const std::size_t> samples, std::size_t k) {
  if (samples.empty()) throw EmptySamples("empirical: no samples");
  std::vector<double> counts(k, 0.0);
  for (std::size_t s : samples) {
    if (s >= k) throw InvalidArgument("empirical: sample outside the support");
    counts[s] += 1.0;
  }
  return DiscreteDist::normalized(std::move(counts));
}

struct EstimatorConfig {
  std::size_t max_iters = 200;
  double tolerance = 1e-14;
  /// Logits are kept inside [-logit_bound, logit_bound].
  double logit_bound = 40.0;
};

struct TabularFit {
  TabularDiscriminator discriminator;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Maximizes the pi-weighted log loss over per-symbol logits with Newton
/// ascent, starting from D = pi. Each cell is an independent concave
/// problem a ln s(h) + b ln(1 - s(h)), a = pi P(x), b = (1 - pi) Q(x).
inline TabularFit train_tabular_discriminator(const DiscreteDist& p, const DiscreteDist& q, MixtureWeight w,
                                              const EstimatorConfig& cfg = {}) {
  if (p.size() != q.size()) throw AlphabetMismatch("train_tabular_discriminator: alphabet sizes differ");
  const double pi = w.value();
  const double start = std::log(pi / (1.0 - pi));
  std::vector<double> logits(p.size(), start);
  // a ln s(h) + b ln(1 - s(h)) with ln s(h) = -softplus(-h).
  const auto softplus = [](double h) { return h > 0.0 ? h + std::log1p(std::exp(-h)) : std::log1p(std::exp(h)); };
  const auto cell_value = [&](double a, double b, double h) { return -a * softplus(-h) - b * softplus(h); };
  TabularFit fit;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    double worst = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
      const double a = pi * p[x];
      const double b = (1.0 - pi) * q[x];
      if (a + b == 0.0) continue;
      const double h = logits[x];
      const double s = sigmoid(h);
      const double grad = a * (1.0 - s) - b * s;
      const bool pinned = (grad > 0.0 && h >= cfg.logit_bound) || (grad < 0.0 && h <= -cfg.logit_bound);
      if (pinned) continue;
      worst = std::max(worst, std::abs(grad));
      const double curv = (a + b) * s * (1.0 - s);
      // Newton step, halved until the cell objective does not decrease. Close
      // to the optimum the gain drops below the rounding of the objective, so
      // a step that shrinks the gradient is accepted as well.
      double step = curv > 0.0 ? grad / curv : std::copysign(1.0, grad);
      const double base = cell_value(a, b, h);
      for (int halvings = 0; halvings < 60; ++halvings) {
        const double trial = std::clamp(h + step, -cfg.logit_bound, cfg.logit_bound);
        const double st = sigmoid(trial);
        if (cell_value(a, b, trial) >= base || std::abs(a * (1.0 - st) - b * st) < std::abs(grad)) {
          logits[x] = trial;
          break;
        }
        step *= 0.5;
      }
    }
    fit.iterations = it + 1;
    if (worst < cfg.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.discriminator.real_prob.resize(p.size());
  for (std::size_t x = 0; x < p.size(); ++x) fit.discriminator.real_prob[x] = sigmoid(logits[x]);
  return fit;
}

/// Trains a tabular discriminator on the two sample sets and returns its
/// log-likelihood plus H_b(pi), an estimate of js_pi from below.
inline Nats estimate_js_pi(std::span<const std::size_t> samples_p, std::span<const std::size_t> samples_q,
                           std::size_t k, MixtureWeight w, const EstimatorConfig& cfg = {}) {
  if (samples_p.empty() || samples_q.empty()) throw EmptySamples("estimate_js_pi: both sample sets must be nonempty");
  const DiscreteDist p_hat = empirical(samples_p, k);
  const DiscreteDist q_hat = empirical(samples_q, k);
  const TabularFit fit = train_tabular_discriminator(p_hat, q_hat, w, cfg);
  return Nats::from_raw(discriminator_value(p_hat, q_hat, w, fit.discriminator) + binary_entropy(w));
}

struct AdvConfig {
  MixtureWeight pi;
  std::size_t discriminator_steps = 5;
  std::size_t batch_size = 256;
  double lr_discriminator = 1.0;
  double lr_generator = 0.1;
  std::size_t rounds = 2000;
  RngSeed seed{0};

  explicit AdvConfig(MixtureWeight weight) : pi(weight) {}

  void validate() const {
    if (discriminator_steps < 1 || batch_size < 1 || rounds < 1) {
      throw InvalidArgument("AdvConfig: counts must be at least 1");
    }
    if (!(lr_discriminator > 0.0) || !(lr_generator > 0.0)) {
      throw InvalidArgument("AdvConfig: learning rates must be positive");
    }
  }
};

struct AdvRound {
  std::size_t round = 0;
  /// V(D) + H_b(pi) for the current discriminator.
  double estimate = 0.0;
  /// Exact js_pi(P, Q) when it is available in closed form (discrete); NaN otherwise.
  double exact = 0.0;
  /// Generator summary: TV to P (discrete) or sigma^2 (Gaussian).
  double generator_stat = 0.0;
};

struct DiscreteAdvResult {
  DiscreteDist generator;
  TabularDiscriminator discriminator;
  std::vector<AdvRound> trace;
};

struct GaussianAdvResult {
  /// Polyak average over the last quarter of rounds.
  IsotropicGaussian generator;
  IsotropicGaussian last;
  LogisticDiscriminator discriminator;
  std::vector<AdvRound> trace;
};

namespace detail {

inline void require_finite(std::span<const double> params, const char* what) {
  for (double v : params) {
    if (!std::isfinite(v)) throw DivergedTraining(std::string(what) + ": generator parameters became non-finite");
  }
}

}  // namespace detail

/// Alternating training of a softmax generator against a tabular
/// discriminator.
///
/// Each round runs `discriminator_steps` stochastic ascent steps on batches
/// whose examples are real with probability pi, then one generator descent
/// step on E_Q[ln(1 - D)] computed exactly by enumerating the support
/// (divided by pi so step sizes are comparable across pi). Streams:
/// split(seed, 0) for batches.
inline DiscreteAdvResult train_generalized_adversarial(const DiscreteDist& p, const AdvConfig& cfg) {
  cfg.validate();
  const std::size_t k = p.size();
  const double pi = cfg.pi.value();
  Rng rng(split(cfg.seed, 0));

  std::vector<double> gen_logits(k, 0.0);
  std::vector<double> d_logits(k, std::log(pi / (1.0 - pi)));
  std::vector<double> d_grad(k);
  std::vector<AdvRound> trace;
  trace.reserve(cfg.rounds);

  const auto discriminator = [&] {
    TabularDiscriminator d;
    d.real_prob.resize(k);
    for (std::size_t x = 0; x < k; ++x) d.real_prob[x] = sigmoid(d_logits[x]);
    return d;
  };

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const DiscreteDist q(softmax(gen_logits));
    for (std::size_t s = 0; s < cfg.discriminator_steps; ++s) {
      std::fill(d_grad.begin(), d_grad.end(), 0.0);
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const bool real = rng.bernoulli(pi);
        const std::size_t x = real ? sample(p, rng) : sample(q, rng);
        d_grad[x] += (real ? 1.0 : 0.0) - sigmoid(d_logits[x]);
      }
      for (std::size_t x = 0; x < k; ++x) {
        d_logits[x] += cfg.lr_discriminator * d_grad[x] / static_cast<double>(cfg.batch_size);
      }
    }

    const TabularDiscriminator d = discriminator();
    std::vector<double> log_fake(k);
    double mean = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
      log_fake[x] = std::log1p(-d.real_prob[x]);
      mean += q[x] * log_fake[x];
    }
    for (std::size_t x = 0; x < k; ++x) {
      gen_logits[x] -= cfg.lr_generator * q[x] * (log_fake[x] - mean) / pi;
    }
    detail::require_finite(gen_logits, "train_generalized_adversarial");

    AdvRound r;
    r.round = round;
    r.estimate = discriminator_value(p, q, cfg.pi, d) + binary_entropy(cfg.pi);
    r.exact = js_pi(p, q, cfg.pi).value();
    r.generator_stat = total_variation(p, q);
    trace.push_back(r);
  }
  return DiscreteAdvResult{DiscreteDist(softmax(gen_logits)), discriminator(), std::move(trace)};
}

/// Alternating training of an isotropic Gaussian generator against a
/// quadratic logistic discriminator.
///
/// Generator samples are reparametrized as x = mu + exp(log_sd) z, so the
/// generator gradient of E_Q[ln(1 - D(x))] flows through the samples. The
/// discriminator features are standardized by the mean and largest standard
/// deviation of a pilot batch from P. Streams: split(seed, 0) for the pilot
/// batch, split(seed, 1) for training batches.
inline GaussianAdvResult train_generalized_adversarial(const Gaussian2D& p, const AdvConfig& cfg) {
  cfg.validate();
  const double pi = cfg.pi.value();

  LogisticDiscriminator disc;
  {
    Rng pilot(split(cfg.seed, 0));
    constexpr std::size_t kPilot = 4096;
    Vec2 mean{0.0, 0.0};
    std::vector<Vec2> xs(kPilot);
    for (auto& x : xs) {
      x = p.sample(pilot);
      mean[0] += x[0] / kPilot;
      mean[1] += x[1] / kPilot;
    }
    double vx = 0.0;
    double vy = 0.0;
    for (const auto& x : xs) {
      vx += (x[0] - mean[0]) * (x[0] - mean[0]) / kPilot;
      vy += (x[1] - mean[1]) * (x[1] - mean[1]) / kPilot;
    }
    disc.center = mean;
    disc.scale = std::sqrt(std::max(vx, vy));
    disc.bias = std::log(pi / (1.0 - pi));
  }

  Rng rng(split(cfg.seed, 1));
  // Generator starts at the pilot center with unit log-scale of the pilot spread.
  Vec2 mu = disc.center;
  double log_sd = std::log(disc.scale);
  Vec2 mu_avg{0.0, 0.0};
  double var_avg = 0.0;
  std::size_t averaged = 0;
  const std::size_t average_from = cfg.rounds - cfg.rounds / 4;

  std::vector<AdvRound> trace;
  trace.reserve(cfg.rounds);
  const double batch = static_cast<double>(cfg.batch_size);

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const IsotropicGaussian q(mu, std::exp(2.0 * log_sd));
    double value = 0.0;
    for (std::size_t s = 0; s < cfg.discriminator_steps; ++s) {
      std::array<double, 5> gw{};
      double gb = 0.0;
      value = 0.0;
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const bool real = rng.bernoulli(pi);
        const Vec2 x = real ? p.sample(rng) : q.sample(rng);
        const double h = disc.logit(x);
        const double d = sigmoid(h);
        const double err = (real ? 1.0 : 0.0) - d;
        const auto f = disc.features(x);
        for (std::size_t i = 0; i < f.size(); ++i) gw[i] += err * f[i];
        gb += err;
        value += real ? std::log(std::max(d, 1e-300)) : std::log(std::max(1.0 - d, 1e-300));
      }
      for (std::size_t i = 0; i < gw.size(); ++i) disc.weights[i] += cfg.lr_discriminator * gw[i] / batch;
      disc.bias += cfg.lr_discriminator * gb / batch;
      value /= batch;
    }

    // Generator descent on E_z[ln(1 - D(mu + sd z))] / pi.
    const double sd = std::exp(log_sd);
    Vec2 g_mu{0.0, 0.0};
    double g_log_sd = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      const Vec2 x{mu[0] + sd * z1, mu[1] + sd * z2};
      const double d = sigmoid(disc.logit(x));
      const Vec2 dh = disc.logit_gradient(x);
      // d ln(1 - D)/dx = -D dh/dx
      const double gx = -d * dh[0];
      const double gy = -d * dh[1];
      g_mu[0] += gx;
      g_mu[1] += gy;
      g_log_sd += (gx * z1 + gy * z2) * sd;
    }
    const double step = cfg.lr_generator / (pi * batch);
    mu[0] -= step * g_mu[0];
    mu[1] -= step * g_mu[1];
    log_sd -= step * g_log_sd;
    detail::require_finite(std::array<double, 3>{mu[0], mu[1], log_sd}, "train_generalized_adversarial");

    if (round >= average_from) {
      mu_avg[0] += mu[0];
      mu_avg[1] += mu[1];
      var_avg += std::exp(2.0 * log_sd);
      ++averaged;
    }

    AdvRound r;
    r.round = round;
    r.estimate = value + binary_entropy(cfg.pi);
    r.exact = std::numeric_limits<double>::quiet_NaN();
    r.generator_stat = std::exp(2.0 * log_sd);
    trace.push_back(r);
  }

  const double n = static_cast<double>(averaged);
  return GaussianAdvResult{IsotropicGaussian({mu_avg[0] / n, mu_avg[1] / n}, var_avg / n),
                           IsotropicGaussian(mu, std::exp(2.0 * log_sd)), disc, std::move(trace)};
}

}  // namespace divlab
