#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "divlab/adversary.hpp"
#include "support/oracles.hpp"

using namespace divlab;
using Catch::Approx;

namespace {

std::vector<std::size_t> draw(const DiscreteDist& d, std::size_t n, Rng& rng) {
  std::vector<std::size_t> out(n);
  for (auto& s : out) s = sample(d, rng);
  return out;
}

}  // namespace

TEST_CASE("binary entropy", "[adversary]") {
  CHECK(binary_entropy(MixtureWeight{0.5}) == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(binary_entropy(MixtureWeight{0.25}) == Approx(oracle::kBinaryEntropyQuarter).epsilon(1e-15));
  CHECK(std::abs(binary_entropy(MixtureWeight{0.25}) - 0.562335) < 1e-6);
  for (double pi = 0.05; pi < 1.0; pi += 0.05) {
    CHECK(binary_entropy(MixtureWeight{pi}) == Approx(binary_entropy(MixtureWeight{1.0 - pi})).epsilon(1e-14));
  }
}

TEST_CASE("optimal discriminator examples", "[adversary]") {
  const DiscreteDist p{0.2, 0.3, 0.5};
  const auto same = optimal_discriminator(p, p, MixtureWeight{0.3});
  for (double d : same.real_prob) CHECK(d == Approx(0.3).epsilon(1e-14));

  const auto split = optimal_discriminator(DiscreteDist{1.0, 0.0}, DiscreteDist{0.0, 1.0}, MixtureWeight{0.5});
  CHECK(split.real_prob == std::vector<double>{1.0, 0.0});

  const auto one = optimal_discriminator(DiscreteDist{0.2, 0.8}, DiscreteDist{0.6, 0.4}, MixtureWeight{0.25});
  CHECK(one.real_prob[0] == Approx(0.1).epsilon(1e-14));

  const auto empty_cell = optimal_discriminator(DiscreteDist{0.5, 0.5, 0.0}, DiscreteDist{0.5, 0.5, 0.0},
                                                MixtureWeight{0.7});
  CHECK(empty_cell.real_prob[2] == 0.7);
  CHECK_THROWS_AS(optimal_discriminator(p, DiscreteDist::uniform(2), MixtureWeight{0.5}), AlphabetMismatch);
}

TEST_CASE("discriminator value at the optimum", "[adversary][property]") {
  const DiscreteDist p{0.1, 0.6, 0.3};
  for (double pi : {0.1, 0.5, 0.8}) {
    const MixtureWeight w{pi};
    CHECK(discriminator_value(p, p, w, optimal_discriminator(p, p, w)) ==
          Approx(-binary_entropy(w)).epsilon(1e-14));
  }

  Rng rng(RngSeed{81});
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(t % 15);
    const auto a = random_dist(k, 0.7, rng);
    const auto b = random_dist(k, 0.7, rng);
    const MixtureWeight w{0.3};
    const auto opt = optimal_discriminator(a, b, w);
    const double best = discriminator_value(a, b, w, opt);
    CHECK(std::abs(best + binary_entropy(w) - js_pi(a, b, w).value()) < 1e-12);

    TabularDiscriminator other{std::vector<double>(k)};
    for (double& d : other.real_prob) d = 0.01 + 0.98 * rng.uniform();
    CHECK(discriminator_value(a, b, w, other) <= best + 1e-12);
    CHECK(discriminator_value(a, b, w, other) + binary_entropy(w) <= js_pi(a, b, w).value() + 1e-12);
  }
}

TEST_CASE("trained tabular discriminator matches the optimum", "[adversary]") {
  Rng rng(RngSeed{82});
  for (int t = 0; t < 30; ++t) {
    const auto a = random_dist(6, 1.0, rng);
    const auto b = random_dist(6, 1.0, rng);
    const MixtureWeight w{0.1 + 0.8 * rng.uniform()};
    const auto fit = train_tabular_discriminator(a, b, w);
    CHECK(fit.converged);
    const auto opt = optimal_discriminator(a, b, w);
    for (std::size_t x = 0; x < 6; ++x) CHECK(fit.discriminator.real_prob[x] == Approx(opt.real_prob[x]).epsilon(1e-8));
  }
}

TEST_CASE("sample estimator", "[adversary][estimator]") {
  Rng rng(RngSeed{83});
  const std::size_t n = 100000;
  const auto p = random_dist(8, 1.0, rng);
  const auto q = random_dist(8, 1.0, rng);
  const auto sp = draw(p, n, rng);
  const auto sq = draw(q, n, rng);
  const MixtureWeight half{0.5};
  const double est = estimate_js_pi(sp, sq, 8, half).value();
  const double on_empirical = js_pi(empirical(sp, 8), empirical(sq, 8), half).value();
  CHECK(std::abs(est - on_empirical) < 1e-9);
  CHECK(std::abs(est - js_pi(p, q, half).value()) < 0.01);

  // Weak symmetry survives estimation.
  const MixtureWeight w{0.3};
  CHECK(std::abs(estimate_js_pi(sp, sq, 8, w).value() - estimate_js_pi(sq, sp, 8, w.mirrored()).value()) < 1e-9);

  CHECK_THROWS_AS(estimate_js_pi({}, sq, 8, half), EmptySamples);
}

TEST_CASE("estimator on identical distributions shrinks with the sample size", "[adversary][estimator]") {
  Rng rng(RngSeed{84});
  const std::size_t k = 8;
  const auto p = random_dist(k, 2.0, rng);
  const MixtureWeight w{0.5};
  double prev = 1.0;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const double est = estimate_js_pi(draw(p, n, rng), draw(p, n, rng), k, w).value();
    // Null mean pi (1 - pi) (K - 1) / N with a 3-sd allowance.
    const double dof = static_cast<double>(k - 1);
    const double band = w.value() * w.complement() * (dof + 3.0 * std::sqrt(2.0 * dof)) / static_cast<double>(n);
    CHECK(est <= band);
    CHECK(est >= 0.0);
    CHECK(band < prev);
    prev = band;
  }
}

TEST_CASE("AdvConfig validation", "[adversary]") {
  CHECK_THROWS_AS(AdvConfig(MixtureWeight{1.0}), InvalidArgument);
  AdvConfig cfg(MixtureWeight{0.5});
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = AdvConfig(MixtureWeight{0.5});
  cfg.lr_generator = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("discrete adversarial training approaches P", "[adversary][training]") {
  const DiscreteDist p{0.1, 0.2, 0.3, 0.4};
  AdvConfig cfg(MixtureWeight{0.5});
  cfg.seed = RngSeed{85};
  const auto res = train_generalized_adversarial(p, cfg);
  CHECK(total_variation(res.generator, p) < 0.1);
  REQUIRE(res.trace.size() == cfg.rounds);
  CHECK(res.trace.back().exact < res.trace.front().exact);

  // Cross-check against the direct minimizer of js_pi over the same family.
  const auto direct = minimize_simplex(
      [&](std::span<const double> q) { return js_pi(p, DiscreteDist(std::vector<double>(q.begin(), q.end())), cfg.pi).value(); },
      [&](std::span<const double> q) {
        std::vector<double> g(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
          g[i] = cfg.pi.complement() * std::log(q[i] / (cfg.pi.value() * p[i] + cfg.pi.complement() * q[i]));
        }
        return g;
      },
      4, OptConfig{});
  CHECK(total_variation(res.generator.probs(), direct.params) < 0.1);

  const auto again = train_generalized_adversarial(p, cfg);
  CHECK(again.generator.probs().size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.generator[i] == res.generator[i]);
}

TEST_CASE("discrete adversarial training diverges loudly", "[adversary][training]") {
  AdvConfig cfg(MixtureWeight{0.5});
  cfg.lr_generator = std::numeric_limits<double>::infinity();
  cfg.rounds = 5;
  CHECK_THROWS_AS(train_generalized_adversarial(DiscreteDist{0.1, 0.9}, cfg), DivergedTraining);
  CHECK_THROWS_AS(train_generalized_adversarial(Gaussian2D({0.0, 0.0}, Sym2::identity()), cfg), DivergedTraining);
}

TEST_CASE("gaussian adversarial training follows the pi ordering", "[adversary][training]") {
  const Gaussian2D p({0.0, 0.0}, Sym2::diagonal(4.0, 1.0));
  AdvConfig low(MixtureWeight{0.1});
  low.seed = RngSeed{86};
  AdvConfig high(MixtureWeight{0.9});
  high.seed = RngSeed{86};
  const auto a = train_generalized_adversarial(p, low);
  const auto b = train_generalized_adversarial(p, high);
  CHECK(a.generator.variance() > b.generator.variance());
  CHECK(std::abs(a.generator.mean()[0]) < 0.2);
  CHECK(std::abs(b.generator.mean()[1]) < 0.2);
  CHECK(a.generator.variance() < 3.5);
  CHECK(b.generator.variance() > 1.0);

  const auto again = train_generalized_adversarial(p, low);
  CHECK(again.generator.variance() == a.generator.variance());
  CHECK(again.trace.back().estimate == a.trace.back().estimate);
  CHECK(std::isnan(a.trace.back().exact));
}
