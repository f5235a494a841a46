// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "divlab/divlab.hpp"
#include "runner/config.hpp"
#include "runner/experiments.hpp"
#include "runner/report.hpp"
#include "support/oracles.hpp"

using namespace divlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

bool criterion(int id, const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_seconds > 0.0 && secs > budget_seconds) {
    o.require(false, "runtime " + std::to_string(secs) + " s over budget");
  }
  std::printf("%s %2d %s (%.2f s)%s%s\n", o.ok ? "PASS" : "FAIL", id, name, secs, o.ok ? "" : ": ",
              o.detail.c_str());
  std::fflush(stdout);
  return o.ok;
}

// Fixtures shared by criteria 1 and 2: strictly positive joints, K cycling 2, 3, 4.
std::vector<std::pair<DiscreteJoint, DiscreteJoint>> joint_fixtures() {
  Rng rng(RngSeed{1});
  std::vector<std::pair<DiscreteJoint, DiscreteJoint>> out;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(t % 3);
    out.emplace_back(random_joint(k, 1.0, rng), random_joint(k, 1.0, rng));
  }
  return out;
}

bool strictly_positive(std::span<const double> v) {
  for (double x : v) {
    if (!(x > 0.0)) return false;
  }
  return true;
}

oracle::Table table_of(const DiscreteJoint& j) {
  oracle::Table t(j.alphabet_size(), std::vector<double>(j.alphabet_size()));
  for (std::size_t a = 0; a < j.alphabet_size(); ++a) {
    for (std::size_t b = 0; b < j.alphabet_size(); ++b) t[a][b] = j.at(a, b);
  }
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  int failures = 0;
  const auto tally = [&](bool ok) { failures += ok ? 0 : 1; };

  tally(criterion(1, "chain rule: d_ml equals joint kl", 1.0, [] {
    Outcome o;
    for (const auto& [p, q] : joint_fixtures()) {
      o.require(strictly_positive(p.cells()) && strictly_positive(q.cells()), "fixture not strictly positive");
      const double gap = std::abs(d_ml(p, q).value() - kl(p, q).value());
      o.require(gap < 1e-12, "gap " + std::to_string(gap));
      const double ref = oracle::kl(oracle::flat(table_of(p)), oracle::flat(table_of(q)));
      o.require(std::abs(kl(p, q).value() - ref) < 1e-12, "kl disagrees with the direct sum");
    }
    return o;
  }));

  tally(criterion(2, "convex combination: d_ss = eps d_ml + (1 - eps) d_alt", 1.0, [] {
    Outcome o;
    for (const auto& [p, q] : joint_fixtures()) {
      const double ml = d_ml(p, q).value();
      const double alt = d_alternative(p, q).value();
      o.require(std::abs(alt - oracle::d_alternative(table_of(p), table_of(q))) < 1e-12,
                "d_alternative disagrees with the double sum");
      for (double eps : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double ss = d_ss(p, q, SSWeight{eps}).value();
        o.require(std::abs(ss - (eps * ml + (1.0 - eps) * alt)) < 1e-12, "combination off at eps " + std::to_string(eps));
      }
      o.require(d_ss(p, q, SSWeight{1.0}).value() == ml, "d_ss at eps 1 not bit-equal to d_ml");
    }
    return o;
  }));

  tally(criterion(3, "scheduled sampling at eps 0 is minimized by the factorization", 30.0, [] {
    Outcome o;
    const DiscreteJoint p{{0.4, 0.1}, {0.1, 0.4}};
    const DiscreteJoint fact = factorized(p);
    // Independent check that the factorization is uniform.
    for (double v : fact.cells()) o.require(std::abs(v - 0.25) < 1e-15, "factorized P not uniform");
    const ObjectiveKind kind = objective::SS{SSWeight{0.0}};
    OptConfig cfg;
    cfg.restarts = 5;
    const DiscreteJoint q_opt = as_joint(minimize_discrete(kind, p, cfg), 2);
    const DiscreteJoint q_brute = as_joint(brute_force_minimize(kind, p, 200), 2);
    o.require(total_variation(q_opt, fact) < 1e-2, "optimizer minimizer TV " + std::to_string(total_variation(q_opt, fact)));
    o.require(total_variation(q_brute, fact) < 1e-2, "brute-force minimizer TV " + std::to_string(total_variation(q_brute, fact)));

    const SSWeight zero{0.0};
    const double at_p = d_ss(p, p, zero).value();
    const double at_fact = d_ss(p, fact, zero).value();
    o.require(at_p - at_fact > 0.1, "margin " + std::to_string(at_p - at_fact));
    // Hand evaluation: 0.5 kl([.5,.5],[.8,.2]) + 0.5 kl([.5,.5],[.2,.8]) = 0.5 ln 1.5625.
    o.require(std::abs(at_p - oracle::kDaltSelf) < 1e-12, "d_ss(P, P, 0) off the hand value");
    o.require(std::abs(at_p - oracle::d_alternative(table_of(p), table_of(p))) < 1e-12, "d_ss(P, P, 0) off the oracle");
    o.require(std::abs(at_fact - oracle::d_alternative(table_of(p), table_of(fact))) < 1e-12,
              "d_ss(P, fact, 0) off the oracle");
    return o;
  }));

  tally(criterion(4, "tabular scheduled-sampling training collapses at eps 0, recovers P at eps 1", 60.0, [] {
    Outcome o;
    const DiscreteJoint p{{0.4, 0.1}, {0.1, 0.4}};
    SSTrainConfig cfg;
    cfg.sequences = 100000;
    cfg.seed = RngSeed{4};
    const auto collapsed = ss_train(p, SSSchedule(schedule::Constant{0.0}), cfg);
    const DiscreteDist half{0.5, 0.5};
    for (std::size_t z = 0; z < 2; ++z) {
      const std::vector<std::size_t> prefix{z};
      const auto row = collapsed.model.row(prefix);
      const double tv = total_variation(row, half.probs());
      o.require(tv < 0.05, "eps 0: conditional on " + std::to_string(z) + " at TV " + std::to_string(tv));
    }
    const auto teacher = ss_train(p, SSSchedule(schedule::Constant{1.0}), cfg);
    const double tv = total_variation(teacher.model.joint(), p);
    o.require(tv < 0.05, "eps 1: joint at TV " + std::to_string(tv));
    return o;
  }));

  tally(criterion(5, "weak symmetry of JS_pi", 1.0, [] {
    Outcome o;
    Rng rng(RngSeed{5});
    for (int t = 0; t < 100; ++t) {
      const std::size_t k = 2 + static_cast<std::size_t>(t % 7);
      const DiscreteDist p = random_dist(k, 1.0, rng);
      const DiscreteDist q = random_dist(k, 1.0, rng);
      for (int i = 1; i <= 19; ++i) {
        const double pi = 0.05 * i;
        const double a = js_pi(p, q, MixtureWeight{pi}).value();
        const double b = js_pi(q, p, MixtureWeight{1.0 - pi}).value();
        o.require(std::abs(a - b) < 1e-12, "asymmetry " + std::to_string(std::abs(a - b)) + " at pi " + std::to_string(pi));
        o.require(std::abs(a - oracle::js_pi({p.probs().begin(), p.probs().end()}, {q.probs().begin(), q.probs().end()}, pi)) < 1e-12,
                  "js_pi disagrees with the direct sum");
      }
    }
    return o;
  }));

  tally(criterion(6, "KL limits of JS_pi / pi in both directions", 5.0, [] {
    Outcome o;
    Rng rng(RngSeed{6});
    for (int t = 0; t < 20; ++t) {
      const std::size_t k = 2 + static_cast<std::size_t>(t % 3);
      const DiscreteDist p = random_dist(k, 1.0, rng);
      const DiscreteDist q = random_dist(k, 1.0, rng);
      const std::vector<double> pv(p.probs().begin(), p.probs().end());
      const std::vector<double> qv(q.probs().begin(), q.probs().end());
      o.require(strictly_positive(pv) && strictly_positive(qv), "fixture not strictly positive");
      const double kl_pq = oracle::kl(pv, qv);
      const double kl_qp = oracle::kl(qv, pv);
      double prev = 0.0;
      double prev_m = 0.0;
      for (int e = 1; e <= 4; ++e) {
        const double pi = std::pow(10.0, -e);
        const double err = std::abs(kl_limit_ratio(p, q, pi) - kl_pq);
        const double err_m = std::abs(kl_limit_ratio_mirrored(p, q, pi) - kl_qp);
        if (e > 1) {
          const std::string at = " (fixture " + std::to_string(t) + ", k " + std::to_string(e) + ")";
          o.require(err < prev, "error not decreasing" + at);
          o.require(err / prev >= 0.05 && err / prev <= 0.2, "ratio " + std::to_string(err / prev) + at);
          o.require(err_m < prev_m, "mirrored error not decreasing" + at);
          o.require(err_m / prev_m >= 0.05 && err_m / prev_m <= 0.2, "mirrored ratio " + std::to_string(err_m / prev_m) + at);
        }
        prev = err;
        prev_m = err_m;
      }
    }
    return o;
  }));

  tally(criterion(7, "isotropic fits move from moment matching to mode seeking (256^2 quadrature)", 300.0, [] {
    Outcome o;
    const Gaussian2D p({0.0, 0.0}, Sym2::rotated(4.0, 1.0, std::numbers::pi / 6.0));
    // Closed-form endpoints: arithmetic and harmonic means of the eigenvalues.
    const double arithmetic = 0.5 * (4.0 + 1.0);
    const double harmonic = 2.0 / (1.0 / 4.0 + 1.0 / 1.0);
    o.require(std::abs(ml_isotropic_closed_form(p).variance() - arithmetic) < 1e-12, "ML closed form");
    o.require(std::abs(exclusive_isotropic_closed_form(p).variance() - harmonic) < 1e-12, "exclusive closed form");
    const GridSpec spec = default_grid_for(p, 256);
    const std::vector<double> pis{0.01, 0.1, 0.5, 0.99};
    std::vector<double> s2;
    for (double pi : pis) s2.push_back(fit_isotropic(p, MixtureWeight{pi}, spec).variance());
    o.require(std::abs(s2[0] / arithmetic - 1.0) < 0.05, "sigma^2(0.01) = " + std::to_string(s2[0]));
    o.require(std::abs(s2[3] / harmonic - 1.0) < 0.05, "sigma^2(0.99) = " + std::to_string(s2[3]));
    o.require(s2[2] < s2[0] && s2[2] > s2[3], "sigma^2(0.5) not between the endpoints");
    o.require(s2[1] > s2[2] && s2[2] > s2[3], "ordering sigma^2(0.1) > sigma^2(0.5) > sigma^2(0.99) fails");
    return o;
  }));

  tally(criterion(8, "adversarial estimator identity and sample estimator", 60.0, [] {
    Outcome o;
    Rng rng(RngSeed{8});
    for (std::size_t k = 2; k <= 16; ++k) {
      const DiscreteDist p = random_dist(k, 1.0, rng);
      const DiscreteDist q = random_dist(k, 1.0, rng);
      for (int i = 1; i <= 19; ++i) {
        const MixtureWeight w{0.05 * i};
        const double v = discriminator_value(p, q, w, optimal_discriminator(p, q, w)) + binary_entropy(w);
        o.require(std::abs(v - js_pi(p, q, w).value()) < 1e-12, "identity off at K " + std::to_string(k));
      }
    }
    const std::size_t n = 100000;
    for (std::size_t k : {4u, 16u}) {
      const DiscreteDist p = random_dist(k, 1.0, rng);
      const DiscreteDist q = random_dist(k, 1.0, rng);
      std::vector<std::size_t> sp(n);
      std::vector<std::size_t> sq(n);
      for (auto& s : sp) s = sample(p, rng);
      for (auto& s : sq) s = sample(q, rng);
      for (double pi : {0.1, 0.5, 0.9}) {
        const MixtureWeight w{pi};
        const double est = estimate_js_pi(sp, sq, k, w).value();
        const double exact = js_pi(p, q, w).value();
        o.require(std::abs(est - exact) < 0.01,
                  "estimate " + std::to_string(est) + " vs " + std::to_string(exact) + " at K " + std::to_string(k));
      }
    }
    return o;
  }));

  tally(criterion(9, "analytic simplex gradients match central differences", 5.0, [] {
    Outcome o;
    Rng rng(RngSeed{9});
    for (int t = 0; t < 50; ++t) {
      const std::size_t k = 2 + static_cast<std::size_t>(t % 3);
      const DiscreteJoint p = random_joint(k, 2.0, rng);
      std::vector<double> logits(k * k);
      for (double& l : logits) l = rng.normal();
      const double eps = rng.uniform();
      for (const ObjectiveKind& kind : {ObjectiveKind{objective::ML{}}, ObjectiveKind{objective::SS{SSWeight{eps}}}}) {
        const auto f = [&](std::span<const double> th) {
          return evaluate(kind, p, DiscreteJoint(k, softmax(th))).value();
        };
        const auto analytic = discrete_logit_gradient(kind, p, logits);
        const auto numeric = finite_difference_gradient(f, logits, 1e-5);
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
          diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
          scale += numeric[i] * numeric[i];
        }
        const double rel = std::sqrt(diff) / std::sqrt(scale);
        o.require(rel < 1e-6, "relative error " + std::to_string(rel) + " at point " + std::to_string(t));
      }
    }
    return o;
  }));

  tally(criterion(10, "reruns with the same config and seed are byte-identical", 0.0, [] {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / ("divlab_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::vector<std::vector<std::pair<std::string, std::string>>> runs{
        {{"experiment", "divergence"}, {"p", "0.1 0.2 0.3 0.4"}, {"q", "0.25 0.25 0.25 0.25"}},
        {{"experiment", "ss-inconsistency"}},
        {{"experiment", "ss-train"}},
        {{"experiment", "figure1"}},
        {{"experiment", "adversarial"}},
        {{"experiment", "adversarial"}, {"adv.family", "discrete"}},
        {{"experiment", "js-limits"}},
    };
    for (std::size_t r = 0; r < runs.size(); ++r) {
      std::string first_hash;
      for (const char* workers : {"1", "2"}) {
        cli::ConfigBuilder b(runs[r][0].second);
        for (const auto& [k, v] : runs[r]) b.set(k, v);
        b.set("seed", "10");
        b.set("workers", workers);
        const cli::ExperimentConfig cfg = b.build();
        cli::write_bundle(cli::run_experiment(cfg), root / std::to_string(r) / workers);
      }
      const fs::path a = root / std::to_string(r) / "1";
      const fs::path c = root / std::to_string(r) / "2";
      std::size_t files = 0;
      for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        o.require(fs::exists(c / rel) && slurp(entry.path()) == slurp(c / rel),
                  runs[r][0].second + ": " + rel.string() + " differs");
        ++files;
      }
      std::size_t files_c = 0;
      for (const auto& entry : fs::recursive_directory_iterator(c)) files_c += entry.is_regular_file() ? 1 : 0;
      o.require(files == files_c && files > 2, runs[r][0].second + ": file sets differ");
    }
    fs::remove_all(root);
    return o;
  }));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
