#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "divlab/optimize.hpp"
#include "support/oracles.hpp"

using namespace divlab;
using Catch::Approx;

namespace {

const DiscreteJoint kCorrelated{{0.4, 0.1}, {0.1, 0.4}};

bool nonincreasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] + 1e-10) return false;
  }
  return true;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

std::vector<double> random_logits(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("OptConfig validation", "[optimize]") {
  OptConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = OptConfig{};
  cfg.fd_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = OptConfig{};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("finite differences", "[optimize][gradient]") {
  const auto sq = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> x{0.3, -1.2, 2.5};
  const auto g = finite_difference_gradient(sq, x, 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(g[i] - 2.0 * x[i]) < 1e-8);

  const std::vector<double> zero{0.0, 0.0, 0.0};
  double n = 0.0;
  for (double v : finite_difference_gradient(sq, zero, 1e-4)) n += v * v;
  CHECK(std::sqrt(n) < 1e-6);

  const auto wall = [](std::span<const double> v) {
    return v[0] > 0.0 ? std::log(v[0]) : std::numeric_limits<double>::infinity();
  };
  const std::vector<double> edge{1e-6};
  CHECK_THROWS_AS(finite_difference_gradient(wall, edge, 1e-4), NonFiniteObjective);
  CHECK_THROWS_AS(finite_difference_gradient(sq, x, 0.0), InvalidArgument);
}

TEST_CASE("analytic logit gradients match finite differences", "[optimize][gradient]") {
  Rng rng(RngSeed{51});
  for (int t = 0; t < 40; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(t % 3);
    const auto p = random_joint(k, 1.0, rng);
    const auto logits = random_logits(k * k, rng);
    const std::vector<ObjectiveKind> kinds{objective::ML{}, objective::Alternative{},
                                           objective::SS{SSWeight{0.3}}, objective::PerceptualKL{},
                                           objective::JSpi{MixtureWeight{0.2}}};
    for (const auto& kind : kinds) {
      const auto f = [&](std::span<const double> th) { return evaluate(kind, p, DiscreteJoint(k, softmax(th))).value(); };
      const auto numeric = finite_difference_gradient(f, logits, 1e-5);
      const auto analytic = discrete_logit_gradient(kind, p, logits);
      INFO(objective_name(kind));
      CHECK(relative_error(analytic, numeric) < 1e-6);
    }
  }
}

TEST_CASE("ML minimizer recovers P", "[optimize]") {
  Rng rng(RngSeed{52});
  for (std::size_t k : {2u, 3u}) {
    const auto p = random_joint(k, 2.0, rng);
    const auto res = minimize_discrete(objective::ML{}, p, OptConfig{});
    CHECK(total_variation(as_joint(res, k), p) < 1e-3);
    CHECK(nonincreasing(res.trace));
    CHECK(res.objective_value.value() == Approx(res.trace.back()));
  }
}

TEST_CASE("scheduled sampling minimizers move from the factorization to P", "[optimize]") {
  OptConfig cfg;
  cfg.restarts = 3;
  const auto fact = factorized(kCorrelated);
  const auto at0 = as_joint(minimize_discrete(objective::SS{SSWeight{0.0}}, kCorrelated, cfg), 2);
  CHECK(total_variation(at0, fact) < 1e-3);
  CHECK(total_variation(at0, kCorrelated) > 0.05);

  const auto at_half = as_joint(minimize_discrete(objective::SS{SSWeight{0.5}}, kCorrelated, cfg), 2);
  const double gap = total_variation(kCorrelated, fact);
  CHECK(total_variation(at_half, kCorrelated) > 1e-3);
  CHECK(total_variation(at_half, kCorrelated) < gap);
  CHECK(total_variation(at_half, fact) > 1e-3);
  CHECK(total_variation(at_half, fact) < gap);

  double last_to_p = 1.0;
  for (double eps : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto q = as_joint(minimize_discrete(objective::SS{SSWeight{eps}}, kCorrelated, cfg), 2);
    const double to_p = total_variation(q, kCorrelated);
    CHECK(to_p <= last_to_p + 1e-6);
    last_to_p = to_p;
  }
  CHECK(last_to_p < 1e-3);
}

TEST_CASE("minimize_discrete refuses an infinite start", "[optimize]") {
  const DiscreteJoint sparse{{0.5, 0.0}, {0.0, 0.5}};
  CHECK_THROWS_AS(minimize_discrete(objective::PerceptualKL{}, sparse, OptConfig{}), NonFiniteObjective);
}

TEST_CASE("seeded restarts are reproducible", "[optimize]") {
  OptConfig cfg;
  cfg.restarts = 4;
  cfg.seed = RngSeed{77};
  const auto a = minimize_discrete(objective::SS{SSWeight{0.4}}, kCorrelated, cfg);
  const auto b = minimize_discrete(objective::SS{SSWeight{0.4}}, kCorrelated, cfg);
  CHECK(a.params == b.params);
  CHECK(a.trace == b.trace);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("brute force agrees with the optimizer on K = 2", "[optimize][brute]") {
  const std::size_t divisions = 40;
  const double cell = 1.0 / divisions;
  const std::vector<ObjectiveKind> kinds{objective::ML{}, objective::Alternative{}, objective::SS{SSWeight{0.5}},
                                         objective::PerceptualKL{}, objective::JSpi{MixtureWeight{0.5}}};
  const DiscreteJoint p{{0.35, 0.15}, {0.1, 0.4}};
  for (const auto& kind : kinds) {
    INFO(objective_name(kind));
    const auto brute = brute_force_minimize(kind, p, divisions);
    OptConfig cfg;
    cfg.restarts = 3;
    const auto opt = minimize_discrete(kind, p, cfg);
    CHECK(opt.objective_value.value() <= brute.objective_value.value() + 1e-12);
    double worst = 0.0;
    for (std::size_t c = 0; c < 4; ++c) worst = std::max(worst, std::abs(opt.params[c] - brute.params[c]));
    CHECK(worst <= cell + 1e-9);
  }
}

TEST_CASE("brute force on ML lands on the nearest grid point", "[optimize][brute]") {
  const auto res = brute_force_minimize(objective::ML{}, kCorrelated, 20);
  const std::vector<double> expected{0.4, 0.1, 0.1, 0.4};
  for (std::size_t c = 0; c < 4; ++c) CHECK(res.params[c] == Approx(expected[c]).margin(1e-15));
  CHECK(res.iterations == static_cast<std::size_t>(simplex_grid_size(4, 20)));

  const DiscreteJoint p{{0.33, 0.17}, {0.21, 0.29}};
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t d : {5u, 10u, 20u, 40u}) {
    const double v = brute_force_minimize(objective::ML{}, p, d).objective_value.value();
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(brute_force_minimize(objective::ML{}, DiscreteJoint::uniform(3), 200), GridTooLarge);
}

TEST_CASE("brute-force ML minimizer is near P on random fixtures", "[optimize][brute][property]") {
  Rng rng(RngSeed{53});
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = t % 2 == 0 ? 2 : 3;
    const std::size_t divisions = k == 2 ? 50 : 16;
    const auto p = random_joint(k, 2.0, rng);
    const auto res = brute_force_minimize(objective::ML{}, p, divisions);

    // One unit per cell, the rest by largest remainder, so every cell of the
    // reference point is positive and its KL stays finite.
    const std::size_t cells = k * k;
    std::vector<std::size_t> units(cells);
    std::vector<std::pair<double, std::size_t>> rest;
    std::size_t used = 0;
    for (std::size_t c = 0; c < cells; ++c) {
      const double scaled = p.cells()[c] * static_cast<double>(divisions - cells);
      units[c] = 1 + static_cast<std::size_t>(std::floor(scaled));
      used += units[c];
      rest.emplace_back(scaled - std::floor(scaled), c);
    }
    std::sort(rest.begin(), rest.end(), std::greater<>());
    for (std::size_t i = 0; used < divisions; ++i, ++used) ++units[rest[i].second];
    std::vector<double> rounded(cells);
    for (std::size_t c = 0; c < cells; ++c) rounded[c] = static_cast<double>(units[c]) / static_cast<double>(divisions);
    const double at_rounded = oracle::kl(std::vector<double>(p.cells().begin(), p.cells().end()), rounded);

    const double best = res.objective_value.value();
    CHECK(best <= at_rounded + 1e-12);
    // Pinsker: TV <= sqrt(KL / 2).
    CHECK(total_variation(res.params, p.cells()) <= std::sqrt(best / 2.0) + 1e-12);
    CHECK(total_variation(res.params, p.cells()) <= std::sqrt(at_rounded / 2.0) + 1e-12);
  }
}

TEST_CASE("closed-form isotropic fits", "[optimize][gaussian]") {
  const Gaussian2D p({0.0, 0.0}, Sym2::diagonal(4.0, 1.0));
  CHECK(ml_isotropic_closed_form(p).variance() == Approx(2.5));
  CHECK(exclusive_isotropic_closed_form(p).variance() == Approx(1.6));

  const Gaussian2D iso({1.0, 2.0}, Sym2::diagonal(3.0, 3.0));
  CHECK(ml_isotropic_closed_form(iso).variance() == Approx(3.0));
  CHECK(exclusive_isotropic_closed_form(iso).variance() == Approx(3.0));
  CHECK(ml_isotropic_closed_form(iso).mean() == iso.mean());

  for (double angle = 0.0; angle < 3.0; angle += 0.37) {
    const Gaussian2D r({0.0, 0.0}, Sym2::rotated(4.0, 1.0, angle));
    CHECK(ml_isotropic_closed_form(r).variance() == Approx(2.5).epsilon(1e-12));
    CHECK(exclusive_isotropic_closed_form(r).variance() == Approx(1.6).epsilon(1e-12));
  }

  Rng rng(RngSeed{54});
  for (int t = 0; t < 50; ++t) {
    const Gaussian2D g({0.0, 0.0}, Sym2::rotated(0.1 + 5.0 * rng.uniform(), 0.1 + 5.0 * rng.uniform(), rng.uniform()));
    CHECK(exclusive_isotropic_closed_form(g).variance() <= ml_isotropic_closed_form(g).variance() + 1e-12);
  }

  // The closed forms are the minimizers of the two Gaussian KLs over sigma^2.
  const auto kl_forward = [&](double s2) { return kl_gaussian(p, IsotropicGaussian({0.0, 0.0}, s2)).value(); };
  const auto kl_reverse = [&](double s2) { return kl_gaussian(IsotropicGaussian({0.0, 0.0}, s2), p).value(); };
  CHECK(kl_forward(2.5) < kl_forward(2.45));
  CHECK(kl_forward(2.5) < kl_forward(2.55));
  CHECK(kl_reverse(1.6) < kl_reverse(1.55));
  CHECK(kl_reverse(1.6) < kl_reverse(1.65));
}

TEST_CASE("isotropic fit recovers an isotropic truth", "[optimize][gaussian]") {
  const Gaussian2D p({0.7, -0.4}, Sym2::diagonal(1.5, 1.5));
  const auto spec = default_grid_for(p, 128);
  for (double pi : {0.1, 0.5, 0.9}) {
    const auto q = fit_isotropic(p, MixtureWeight{pi}, spec);
    CHECK(std::abs(q.mean()[0] - 0.7) < 1e-2);
    CHECK(std::abs(q.mean()[1] + 0.4) < 1e-2);
    CHECK(q.variance() == Approx(1.5).epsilon(0.02));
  }
}

TEST_CASE("isotropic fit interpolates between the closed forms", "[optimize][gaussian]") {
  const Gaussian2D p({0.0, 0.0}, Sym2::diagonal(4.0, 1.0));
  const auto spec = default_grid_for(p, 128);
  const auto low = fit_isotropic_detailed(p, MixtureWeight{0.01}, spec, isotropic_fit_defaults());
  const auto mid = fit_isotropic(p, MixtureWeight{0.5}, spec);
  const auto high = fit_isotropic(p, MixtureWeight{0.99}, spec);
  CHECK(low.q.variance() == Approx(2.5).epsilon(0.05));
  CHECK(high.variance() == Approx(1.6).epsilon(0.05));
  CHECK(std::abs(low.q.mean()[0]) < 0.05);
  CHECK(std::abs(high.mean()[1]) < 0.05);
  CHECK(mid.variance() < low.q.variance());
  CHECK(mid.variance() > high.variance());
  CHECK(nonincreasing(low.opt.trace));
}
