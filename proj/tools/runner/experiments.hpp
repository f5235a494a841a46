#pragma once

// One runner per CLI subcommand. Each turns an ExperimentConfig into a
// ReportBundle; nothing here touches the filesystem.
//
// Sweeps fan out one cell per task across cfg.workers threads. Every cell
// derives its randomness from the config seed alone and writes into its own
// slot, and tables are assembled afterwards in sweep order, so the worker
// count never changes a byte of output.

#include <exception>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "divlab/divlab.hpp"
#include "runner/config.hpp"
#include "runner/plots.hpp"
#include "runner/report.hpp"

namespace divlab::cli {

/// Runs f(0..n-1) on up to `workers` threads and returns results in index
/// order. If any cell throws, the lowest-index exception is rethrown.
template <class F>
auto fan_out(std::size_t n, std::size_t workers, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const auto work = [&](std::size_t first, std::size_t step) {
    for (std::size_t i = first; i < n; i += step) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::future<void>> tasks;
  for (std::size_t t = 1; t < threads; ++t) tasks.push_back(std::async(std::launch::async, work, t, threads));
  work(0, threads);
  for (auto& t : tasks) t.get();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace detail {

inline ReportBundle start_bundle(const ExperimentConfig& cfg) {
  ReportBundle b;
  b.experiment = cfg.experiment;
  b.seed = cfg.seed;
  b.config_text = serialize(cfg);
  return b;
}

inline std::vector<double> flatten(const Table& t) {
  std::vector<double> out;
  for (const auto& r : t) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline DiscreteDist as_dist(const Table& t) { return DiscreteDist(flatten(t)); }

inline DiscreteJoint as_joint(const Table& t, const char* name) {
  if (t.size() < 2 || t.size() != t.front().size()) {
    throw ConfigError(fmt::format("{} must be a K x K joint table with K >= 2", name));
  }
  return DiscreteJoint(t.size(), flatten(t));
}

inline void require_same_shape(const Table& p, const Table& q) {
  if (p.size() != q.size() || p.front().size() != q.front().size()) {
    throw AlphabetMismatch(fmt::format("p is {}x{} but q is {}x{}", p.size(), p.front().size(), q.size(),
                                       q.front().size()));
  }
}

/// File-name-safe label for a probability-like number.
inline std::string label(double v) { return num(v); }

}  // namespace detail

inline ReportBundle run_divergence(const ExperimentConfig& cfg) {
  if (cfg.p.empty() || cfg.q.empty()) throw ConfigError("divergence needs both p and q");
  detail::require_same_shape(cfg.p, cfg.q);
  const DiscreteDist p = detail::as_dist(cfg.p);
  const DiscreteDist q = detail::as_dist(cfg.q);
  ReportBundle b = detail::start_bundle(cfg);

  CsvTable summary{"summary", {"quantity", "value"}, {}};
  summary.add({"entropy_p", num(entropy(p))});
  summary.add({"entropy_q", num(entropy(q))});
  summary.add({"cross_entropy_pq", num(cross_entropy(p, q))});
  summary.add({"cross_entropy_qp", num(cross_entropy(q, p))});
  summary.add({"kl_pq", num(kl(p, q))});
  summary.add({"kl_qp", num(kl(q, p))});
  summary.add({"jsd", num(jsd(p, q))});
  b.tables.push_back(std::move(summary));

  struct Cell {
    double pq, qp, mirrored;
  };
  const auto cells = fan_out(cfg.pis.size(), cfg.workers, [&](std::size_t i) {
    const MixtureWeight w{cfg.pis[i]};
    return Cell{js_pi(p, q, w).value(), js_pi(q, p, w).value(), js_pi(q, p, w.mirrored()).value()};
  });
  CsvTable js{"js_pi", {"pi", "js_pi_pq", "js_pi_qp", "js_pi_qp_mirrored", "scaled_pq"}, {}};
  Series s_pq{"JS_pi(P,Q)", {}, {}};
  Series s_qp{"JS_pi(Q,P)", {}, {}};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double pi = cfg.pis[i];
    js.add({num(pi), num(cells[i].pq), num(cells[i].qp), num(cells[i].mirrored), num(cells[i].pq / (pi * (1.0 - pi)))});
    s_pq.xs.push_back(pi);
    s_pq.ys.push_back(cells[i].pq);
    s_qp.xs.push_back(pi);
    s_qp.ys.push_back(cells[i].qp);
  }
  b.tables.push_back(std::move(js));
  b.figures.push_back({"js_pi", "svg", line_plot("Generalized JS divergence", "pi", "nats", {s_pq, s_qp})});
  return b;
}

inline ReportBundle run_ss_inconsistency(const ExperimentConfig& cfg) {
  const DiscreteJoint p = detail::as_joint(cfg.p, "p");
  const std::size_t k = p.alphabet_size();
  ScanConfig scan;
  scan.opt = cfg.opt;
  scan.opt.seed = RngSeed{cfg.seed};
  scan.brute_divisions = cfg.brute_divisions;
  auto rows = fan_out(cfg.epsilons.size(), cfg.workers,
                      [&](std::size_t i) { return scan_epsilon(p, cfg.epsilons[i], scan); });
  const InconsistencyReport report = assemble_report(p, std::move(rows));
  ReportBundle b = detail::start_bundle(cfg);

  CsvTable t{"scan",
             {"epsilon", "objective", "converged", "tv_to_p", "tv_to_factorized", "closer_to"},
             {}};
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t c = 0; c < k; ++c) t.columns.push_back(fmt::format("q_{}_{}", a, c));
  }
  for (const char* col : {"brute_objective", "brute_tv_to_p", "brute_tv_to_factorized"}) t.columns.push_back(col);
  Series tv_p{"TV(Q*, P)", {}, {}};
  Series tv_f{"TV(Q*, factorized P)", {}, {}};
  for (const auto& r : report.rows) {
    std::vector<std::string> row{num(r.epsilon), num(r.objective), r.converged ? "true" : "false", num(r.tv_to_p),
                                 num(r.tv_to_factorized), r.tv_to_factorized < r.tv_to_p ? "factorized" : "p"};
    for (double v : r.minimizer.cells()) row.push_back(num(v));
    if (r.has_brute_force) {
      row.push_back(num(r.brute_objective));
      row.push_back(num(r.brute_tv_to_p));
      row.push_back(num(r.brute_tv_to_factorized));
    } else {
      row.insert(row.end(), 3, "na");
    }
    t.add(std::move(row));
    tv_p.xs.push_back(r.epsilon);
    tv_p.ys.push_back(r.tv_to_p);
    tv_f.xs.push_back(r.epsilon);
    tv_f.ys.push_back(r.tv_to_factorized);
  }
  b.tables.push_back(std::move(t));

  CsvTable ref{"reference", {"x1", "x2", "p", "factorized_p"}, {}};
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t c = 0; c < k; ++c) {
      ref.add({std::to_string(a), std::to_string(c), num(p.at(a, c)), num(report.factorized_p.at(a, c))});
    }
  }
  b.tables.push_back(std::move(ref));

  const SSWeight zero{0.0};
  CsvTable summary{"summary", {"quantity", "value"}, {}};
  summary.add({"tv_to_p_monotone", report.tv_to_p_monotone ? "true" : "false"});
  summary.add({"d_ss0_at_p", num(d_ss(p, p, zero))});
  summary.add({"d_ss0_at_factorized", num(d_ss(p, report.factorized_p, zero))});
  summary.add({"mutual_information", num(kl(p, report.factorized_p))});
  b.tables.push_back(std::move(summary));

  b.figures.push_back({"tv_vs_epsilon", "svg",
                       line_plot("Scheduled sampling minimizer vs epsilon", "epsilon", "total variation", {tv_p, tv_f})});
  return b;
}

inline ReportBundle run_ss_training(const ExperimentConfig& cfg) {
  const DiscreteJoint p = detail::as_joint(cfg.p, "p");
  const std::size_t k = p.alphabet_size();
  const TabularAutoregressive truth = TabularAutoregressive::from_joint(p);

  struct Run {
    std::string label;
    SSSchedule schedule;
  };
  std::vector<Run> plan;
  if (cfg.schedule.kind == "constant") {
    for (double e : cfg.epsilons) plan.push_back({"eps_" + detail::label(e), cfg.schedule.build(e)});
  } else {
    plan.push_back({cfg.schedule.kind, cfg.schedule.build(1.0)});
  }

  const auto results = fan_out(plan.size(), cfg.workers, [&](std::size_t i) {
    SSTrainConfig tc = cfg.ss;
    tc.seed = split(RngSeed{cfg.seed}, i);
    return ss_train(truth, plan[i].schedule, tc);
  });

  ReportBundle b = detail::start_bundle(cfg);
  CsvTable final_table{"final", {"run", "seed", "tv_to_p", "tv_to_factorized"}, {}};
  for (std::size_t x = 0; x < k; ++x) final_table.columns.push_back(fmt::format("q1_{}", x));
  for (std::size_t z = 0; z < k; ++z) {
    for (std::size_t x = 0; x < k; ++x) final_table.columns.push_back(fmt::format("q2_given_{}_{}", z, x));
  }
  std::vector<Series> curves;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& res = results[i];
    const RngSeed seed = split(RngSeed{cfg.seed}, i);
    CsvTable trace{"trace_" + plan[i].label,
                   {"step", "epsilon", "heldout_log_likelihood", "tv_to_p", "tv_to_factorized"},
                   {}};
    Series curve{plan[i].label, {}, {}};
    for (const auto& c : res.trace.checkpoints) {
      trace.add({std::to_string(c.step), num(c.epsilon), num(c.heldout_log_likelihood), num(c.tv_to_p),
                 num(c.tv_to_factorized)});
      curve.xs.push_back(static_cast<double>(c.step));
      curve.ys.push_back(c.tv_to_p);
    }
    const auto& last = res.trace.checkpoints.back();
    std::vector<std::string> row{plan[i].label, std::to_string(seed.value), num(last.tv_to_p),
                                 num(last.tv_to_factorized)};
    const std::vector<std::size_t> empty;
    for (double v : res.model.row(empty)) row.push_back(num(v));
    for (std::size_t z = 0; z < k; ++z) {
      const std::vector<std::size_t> prefix{z};
      for (double v : res.model.row(prefix)) row.push_back(num(v));
    }
    final_table.add(std::move(row));
    b.runs.push_back({plan[i].label, seed.value, trace.file()});
    b.tables.push_back(std::move(trace));
    curves.push_back(std::move(curve));
  }
  b.tables.insert(b.tables.begin(), std::move(final_table));
  b.figures.push_back({"tv_to_p", "svg", line_plot("Tabular training", "sequences", "TV(Q, P)", curves)});
  return b;
}

inline ReportBundle run_figure1(const ExperimentConfig& cfg) {
  const Gaussian2D p = cfg.gaussian.build();
  const GridSpec spec = default_grid_for(p, cfg.grid_resolution);
  const auto fits = fan_out(cfg.pis.size(), cfg.workers, [&](std::size_t i) {
    return fit_isotropic_detailed(p, MixtureWeight{cfg.pis[i]}, spec, cfg.opt);
  });
  const double ml = ml_isotropic_closed_form(p).variance();
  const double excl = exclusive_isotropic_closed_form(p).variance();
  const GridDensity p_grid = grid_from_density([&](const Vec2& x) { return p.density(x); }, spec);

  ReportBundle b = detail::start_bundle(cfg);
  CsvTable t{"fits",
             {"pi", "mean_x", "mean_y", "sigma2", "js_pi", "converged", "iterations", "sigma2_ml_closed_form",
              "sigma2_exclusive_closed_form"},
             {}};
  Series fitted{"fitted sigma^2", {}, {}};
  Series upper{"arithmetic mean", {}, {}};
  Series lower{"harmonic mean", {}, {}};
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    const double pi = cfg.pis[i];
    t.add({num(pi), num(f.q.mean()[0]), num(f.q.mean()[1]), num(f.q.variance()), num(f.divergence),
           f.opt.converged ? "true" : "false", std::to_string(f.opt.iterations), num(ml), num(excl)});
    fitted.xs.push_back(pi);
    fitted.ys.push_back(f.q.variance());
    upper.xs.push_back(pi);
    upper.ys.push_back(ml);
    lower.xs.push_back(pi);
    lower.ys.push_back(excl);
    b.figures.push_back({"panel_pi_" + detail::label(pi), "svg",
                         fit_panel(p_grid, p, f.q, fmt::format("pi = {}, sigma^2 = {:.4f}", num(pi), f.q.variance()))});
  }
  b.tables.push_back(std::move(t));
  b.figures.push_back({"p_density", "pgm", heatmap_pgm(p_grid)});
  b.figures.push_back({"sigma2_vs_pi", "svg", line_plot("Isotropic fit variance", "pi", "sigma^2", {fitted, upper, lower})});
  return b;
}

inline ReportBundle run_adversarial(const ExperimentConfig& cfg) {
  const bool discrete = cfg.adv.family == "discrete";
  std::optional<DiscreteDist> p_discrete;
  if (discrete) {
    if (cfg.p.empty()) throw ConfigError("adversarial discrete family needs p");
    p_discrete = detail::as_dist(cfg.p);
  }
  const Gaussian2D p_gauss = cfg.gaussian.build();

  struct Outcome {
    std::vector<AdvRound> trace;
    std::vector<double> generator;  // probabilities, or (mean_x, mean_y, sigma2)
  };
  const auto outcomes = fan_out(cfg.pis.size(), cfg.workers, [&](std::size_t i) {
    const AdvConfig ac = cfg.adv.build(MixtureWeight{cfg.pis[i]}, split(RngSeed{cfg.seed}, i));
    if (discrete) {
      auto r = train_generalized_adversarial(*p_discrete, ac);
      const auto probs = r.generator.probs();
      return Outcome{std::move(r.trace), std::vector<double>(probs.begin(), probs.end())};
    }
    auto r = train_generalized_adversarial(p_gauss, ac);
    return Outcome{std::move(r.trace), {r.generator.mean()[0], r.generator.mean()[1], r.generator.variance()}};
  });

  ReportBundle b = detail::start_bundle(cfg);
  CsvTable summary{"summary", {"pi", "seed", "estimate", "exact", "generator_stat"}, {}};
  if (discrete) {
    for (std::size_t x = 0; x < p_discrete->size(); ++x) summary.columns.push_back(fmt::format("q_{}", x));
  } else {
    for (const char* c : {"mean_x", "mean_y", "sigma2"}) summary.columns.push_back(c);
  }
  std::vector<Series> curves;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double pi = cfg.pis[i];
    const RngSeed seed = split(RngSeed{cfg.seed}, i);
    const auto& o = outcomes[i];
    CsvTable trace{"trace_pi_" + detail::label(pi), {"round", "estimate", "exact", "generator_stat"}, {}};
    Series curve{"pi = " + num(pi), {}, {}};
    for (const auto& r : o.trace) {
      trace.add({std::to_string(r.round), num(r.estimate), num(r.exact), num(r.generator_stat)});
      curve.xs.push_back(static_cast<double>(r.round));
      curve.ys.push_back(r.generator_stat);
    }
    std::vector<std::string> row{num(pi), std::to_string(seed.value), num(o.trace.back().estimate),
                                 num(o.trace.back().exact), num(o.trace.back().generator_stat)};
    for (double v : o.generator) row.push_back(num(v));
    summary.add(std::move(row));
    b.runs.push_back({"pi_" + detail::label(pi), seed.value, trace.file()});
    b.tables.push_back(std::move(trace));
    curves.push_back(std::move(curve));
  }
  b.tables.insert(b.tables.begin(), std::move(summary));
  b.figures.push_back({"generator", "svg",
                       line_plot("Adversarial training", "round", discrete ? "TV(Q, P)" : "sigma^2", curves)});
  return b;
}

inline ReportBundle run_js_limits(const ExperimentConfig& cfg) {
  if (cfg.p.empty() != cfg.q.empty()) throw ConfigError("js-limits needs both p and q, or neither");
  std::optional<DiscreteDist> p;
  std::optional<DiscreteDist> q;
  if (cfg.p.empty()) {
    Rng rng(split(RngSeed{cfg.seed}, 0));
    p = random_dist(cfg.js_alphabet, 1.0, rng);
    q = random_dist(cfg.js_alphabet, 1.0, rng);
  } else {
    detail::require_same_shape(cfg.p, cfg.q);
    p = detail::as_dist(cfg.p);
    q = detail::as_dist(cfg.q);
  }
  const double kl_pq = kl(*p, *q).value();
  const double kl_qp = kl(*q, *p).value();

  ReportBundle b = detail::start_bundle(cfg);
  CsvTable fixture{"fixture", {"symbol", "p", "q"}, {}};
  for (std::size_t x = 0; x < p->size(); ++x) fixture.add({std::to_string(x), num((*p)[x]), num((*q)[x])});

  CsvTable t{"limits",
             {"k", "pi", "ratio", "kl_pq", "error", "error_ratio", "mirrored_ratio", "kl_qp", "mirrored_error",
              "mirrored_error_ratio"},
             {}};
  Series err{"toward KL(P||Q)", {}, {}};
  Series merr{"toward KL(Q||P)", {}, {}};
  double prev = 0.0;
  double prev_m = 0.0;
  for (std::size_t k = 1; k <= cfg.js_max_power; ++k) {
    const double pi = std::pow(10.0, -static_cast<double>(k));
    const double ratio = kl_limit_ratio(*p, *q, pi);
    const double mratio = kl_limit_ratio_mirrored(*p, *q, pi);
    const double e = std::abs(ratio - kl_pq);
    const double me = std::abs(mratio - kl_qp);
    t.add({std::to_string(k), num(pi), num(ratio), num(kl_pq), num(e), k == 1 ? "na" : num(e / prev), num(mratio),
           num(kl_qp), num(me), k == 1 ? "na" : num(me / prev_m)});
    err.xs.push_back(pi);
    err.ys.push_back(std::log10(e));
    merr.xs.push_back(pi);
    merr.ys.push_back(std::log10(me));
    prev = e;
    prev_m = me;
  }
  b.tables.push_back(std::move(t));
  b.tables.push_back(std::move(fixture));
  b.figures.push_back({"limit_errors", "svg", line_plot("KL limits of JS_pi", "pi", "log10 error", {err, merr}, true)});
  return b;
}

inline ReportBundle run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "divergence") return run_divergence(cfg);
  if (cfg.experiment == "ss-inconsistency") return run_ss_inconsistency(cfg);
  if (cfg.experiment == "ss-train") return run_ss_training(cfg);
  if (cfg.experiment == "figure1") return run_figure1(cfg);
  if (cfg.experiment == "adversarial") return run_adversarial(cfg);
  if (cfg.experiment == "js-limits") return run_js_limits(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace divlab::cli
