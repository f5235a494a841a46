#pragma once

// Empirical scheduled sampling on tabular autoregressive models.
//
// For each training sequence and each position n:
//   1. add -ln Q_n(real x_n | current prefix) to the loss;
//   2. flip a coin with success probability eps; on success the real x_n
//      joins the prefix, otherwise a symbol drawn from Q_n(. | prefix) does.
// Every visited row then takes one exponentiated-gradient step on its
// log-loss, which is plain gradient descent on the row logits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "divlab/autoregressive.hpp"
#include "divlab/dist.hpp"
#include "divlab/errors.hpp"
#include "divlab/objectives.hpp"
#include "divlab/optimize.hpp"
#include "divlab/rng.hpp"

namespace divlab {

namespace schedule {
struct Constant {
  double epsilon = 1.0;
};
/// eps goes linearly from `start` to `end` over `steps` sequences, then stays at `end`.
struct LinearAnneal {
  double start = 1.0;
  double end = 0.0;
  std::size_t steps = 1;
};
/// eps(t) = k / (k + exp(k t / steps)) with k = rate.
struct InverseSigmoidAnneal {
  double rate = 5.0;
  std::size_t steps = 1;
};
}  // namespace schedule

class SSSchedule {
 public:
  using Kind = std::variant<schedule::Constant, schedule::LinearAnneal, schedule::InverseSigmoidAnneal>;

  SSSchedule(Kind kind) : kind_(kind) {  // NOLINT(google-explicit-constructor)
    std::visit(
        [](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, schedule::Constant>) {
            SSWeight{k.epsilon};
          } else if constexpr (std::is_same_v<K, schedule::LinearAnneal>) {
            SSWeight{k.start};
            SSWeight{k.end};
            if (k.steps < 1) throw InvalidArgument("LinearAnneal: steps must be at least 1");
          } else {
            if (!(k.rate >= 1.0)) throw InvalidArgument("InverseSigmoidAnneal: rate must be at least 1");
            if (k.steps < 1) throw InvalidArgument("InverseSigmoidAnneal: steps must be at least 1");
          }
        },
        kind_);
  }

  double epsilon_at(std::size_t step) const {
    return std::visit(
        [step](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, schedule::Constant>) {
            return k.epsilon;
          } else if constexpr (std::is_same_v<K, schedule::LinearAnneal>) {
            const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(k.steps));
            return k.start + (k.end - k.start) * frac;
          } else {
            const double t = static_cast<double>(step) / static_cast<double>(k.steps);
            return k.rate / (k.rate + std::exp(k.rate * t));
          }
        },
        kind_);
  }

  const Kind& kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class Replacement { Sampled, Argmax };

struct StepOutcome {
  TabularAutoregressive model;
  /// Sum over positions of -ln Q_n(real x_n | prefix) under the pre-step model.
  double loss = 0.0;
};

namespace detail {

inline std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

/// p_i <- p_i exp(eta (1[i = y] - p_i)), renormalized.
inline void exponentiated_gradient_step(std::span<double> row, std::size_t target, double eta) {
  const std::vector<double> old(row.begin(), row.end());
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double indicator = i == target ? 1.0 : 0.0;
    row[i] = old[i] * std::exp(eta * (indicator - old[i]));
    total += row[i];
  }
  for (double& v : row) v /= total;
}

enum class PrefixPolicy { Teacher, Scheduled };

/// One in-place training step; returns the loss. `rng` is only touched for
/// the scheduled policy: one coin per non-final position, plus one
/// categorical draw per sampled replacement.
inline double apply_step(TabularAutoregressive& model, std::span<const std::size_t> seq, PrefixPolicy policy,
                         double eps, double eta, Replacement replacement, Rng* rng) {
  const std::size_t n_len = model.length();
  if (seq.size() != n_len) throw InvalidArgument("training sequence length differs from model length");
  for (std::size_t s : seq) {
    if (s >= model.alphabet_size()) throw InvalidArgument("training symbol out of range");
  }
  std::vector<std::size_t> prefix;
  prefix.reserve(n_len);
  std::vector<std::size_t> rows(n_len);
  double loss = 0.0;
  for (std::size_t n = 0; n < n_len; ++n) {
    rows[n] = model.row_index(prefix);
    const auto row = model.row_at(rows[n]);
    loss -= std::log(row[seq[n]]);
    if (n + 1 == n_len) break;
    bool keep = true;
    if (policy == PrefixPolicy::Scheduled) keep = rng->bernoulli(eps);
    if (keep) {
      prefix.push_back(seq[n]);
    } else if (replacement == Replacement::Argmax) {
      prefix.push_back(argmax_lowest(row));
    } else {
      prefix.push_back(rng->categorical(row));
    }
  }
  // Rows along one pass are distinct (prefixes of different lengths), so
  // updating after the forward pass equals a gradient step at the old model.
  for (std::size_t n = 0; n < n_len; ++n) {
    exponentiated_gradient_step(model.mutable_row_at(rows[n]), seq[n], eta);
  }
  return loss;
}

}  // namespace detail

/// Teacher-forced (maximum-likelihood) step. Uses no randomness.
inline StepOutcome ml_train_step(const TabularAutoregressive& model, std::span<const std::size_t> seq,
                                 double step_size) {
  StepOutcome out{model, 0.0};
  out.loss = detail::apply_step(out.model, seq, detail::PrefixPolicy::Teacher, 1.0, step_size,
                                Replacement::Sampled, nullptr);
  return out;
}

/// Scheduled-sampling step with sampled replacements.
inline StepOutcome ss_train_step(const TabularAutoregressive& model, std::span<const std::size_t> seq, SSWeight e,
                                 double step_size, Rng& rng) {
  StepOutcome out{model, 0.0};
  out.loss = detail::apply_step(out.model, seq, detail::PrefixPolicy::Scheduled, e.value(), step_size,
                                Replacement::Sampled, &rng);
  return out;
}

/// Scheduled-sampling step whose replacement symbol is the mode of the
/// predictive row (ties to the lowest index). `rng` drives the keep/replace
/// coin only.
inline StepOutcome argmax_variant_step(const TabularAutoregressive& model, std::span<const std::size_t> seq,
                                       SSWeight e, double step_size, Rng& rng) {
  StepOutcome out{model, 0.0};
  out.loss = detail::apply_step(out.model, seq, detail::PrefixPolicy::Scheduled, e.value(), step_size,
                                Replacement::Argmax, &rng);
  return out;
}

/// Ancestral sample of one full sequence.
inline std::vector<std::size_t> sample_sequence(const TabularAutoregressive& model, Rng& rng) {
  std::vector<std::size_t> seq;
  seq.reserve(model.length());
  for (std::size_t n = 0; n < model.length(); ++n) seq.push_back(rng.categorical(model.row(seq)));
  return seq;
}

struct Checkpoint {
  std::size_t step = 0;
  double epsilon = 1.0;
  /// Mean log-likelihood of the held-out sequences, nats per symbol.
  double heldout_log_likelihood = 0.0;
  double tv_to_p = 0.0;
  double tv_to_factorized = 0.0;
};

struct TrainingTrace {
  std::vector<Checkpoint> checkpoints;
};

struct SSTrainConfig {
  std::size_t sequences = 100000;
  double step_size = 0.001;
  /// Evenly spaced checkpoints after step 0; the last one is at `sequences`.
  std::size_t checkpoints = 10;
  std::size_t heldout = 2000;
  Replacement replacement = Replacement::Sampled;
  RngSeed seed{0};

  void validate() const {
    if (sequences < 1) throw InvalidArgument("SSTrainConfig: sequences must be at least 1");
    if (!(step_size > 0.0)) throw InvalidArgument("SSTrainConfig: step size must be positive");
    if (checkpoints < 1) throw InvalidArgument("SSTrainConfig: checkpoints must be at least 1");
  }
};

struct SSTrainResult {
  TabularAutoregressive model;
  TrainingTrace trace;
};

/// Trains a uniform-initialized model of the truth's shape on a stream of
/// sequences drawn from `truth`. Streams: split(seed, 0) draws training
/// data, split(seed, 1) drives coins and replacements, split(seed, 2) draws
/// the held-out set.
inline SSTrainResult ss_train(const TabularAutoregressive& truth, const SSSchedule& sched, const SSTrainConfig& cfg) {
  cfg.validate();
  Rng data_rng(split(cfg.seed, 0));
  Rng step_rng(split(cfg.seed, 1));
  Rng heldout_rng(split(cfg.seed, 2));

  std::vector<std::vector<std::size_t>> heldout;
  heldout.reserve(cfg.heldout);
  for (std::size_t i = 0; i < cfg.heldout; ++i) heldout.push_back(sample_sequence(truth, heldout_rng));

  const std::vector<double> truth_paths = truth.path_probabilities();
  const std::vector<double> truth_factorized = factorized_paths(truth_paths, truth.length(), truth.alphabet_size());

  TabularAutoregressive model(truth.length(), truth.alphabet_size());
  TrainingTrace trace;
  const auto record = [&](std::size_t step) {
    Checkpoint c;
    c.step = step;
    c.epsilon = sched.epsilon_at(step == 0 ? 0 : step - 1);
    double ll = 0.0;
    for (const auto& s : heldout) ll += std::log(model.sequence_probability(s));
    c.heldout_log_likelihood =
        heldout.empty() ? 0.0 : ll / static_cast<double>(heldout.size() * truth.length());
    const std::vector<double> paths = model.path_probabilities();
    c.tv_to_p = total_variation(paths, truth_paths);
    c.tv_to_factorized = total_variation(paths, truth_factorized);
    trace.checkpoints.push_back(c);
  };

  record(0);
  std::size_t next_mark = 1;
  for (std::size_t t = 0; t < cfg.sequences; ++t) {
    const std::vector<std::size_t> seq = sample_sequence(truth, data_rng);
    detail::apply_step(model, seq, detail::PrefixPolicy::Scheduled, sched.epsilon_at(t), cfg.step_size,
                       cfg.replacement, &step_rng);
    const std::size_t done = t + 1;
    if (done * cfg.checkpoints >= next_mark * cfg.sequences) {
      record(done);
      while (next_mark * cfg.sequences <= done * cfg.checkpoints) ++next_mark;
    }
  }
  return SSTrainResult{std::move(model), std::move(trace)};
}

inline SSTrainResult ss_train(const DiscreteJoint& p, const SSSchedule& sched, const SSTrainConfig& cfg) {
  return ss_train(TabularAutoregressive::from_joint(p), sched, cfg);
}

/// Teacher-forced training on the same stream layout as ss_train. Draws no
/// coins, so split(seed, 1) is never consumed.
inline TabularAutoregressive ml_train(const TabularAutoregressive& truth, std::size_t sequences, double step_size,
                                      RngSeed seed) {
  Rng data_rng(split(seed, 0));
  TabularAutoregressive model(truth.length(), truth.alphabet_size());
  for (std::size_t t = 0; t < sequences; ++t) {
    const std::vector<std::size_t> seq = sample_sequence(truth, data_rng);
    detail::apply_step(model, seq, detail::PrefixPolicy::Teacher, 1.0, step_size, Replacement::Sampled, nullptr);
  }
  return model;
}

struct ScanConfig {
  OptConfig opt = [] {
    OptConfig c;
    c.restarts = 5;
    return c;
  }();
  /// Simplex-grid divisions for the brute-force cross-check; 0 disables it.
  /// Only applied for K = 2.
  std::size_t brute_divisions = 200;
};

struct ScanRow {
  double epsilon = 0.0;
  DiscreteJoint minimizer = DiscreteJoint::uniform(2);
  Nats objective;
  double tv_to_p = 0.0;
  double tv_to_factorized = 0.0;
  bool converged = false;
  bool has_brute_force = false;
  DiscreteJoint brute_minimizer = DiscreteJoint::uniform(2);
  Nats brute_objective;
  double brute_tv_to_p = 0.0;
  double brute_tv_to_factorized = 0.0;
};

struct InconsistencyReport {
  DiscreteJoint p;
  DiscreteJoint factorized_p;
  std::vector<ScanRow> rows;
  /// Whether TV(Q*, P) is nonincreasing in eps. Reported, never enforced.
  bool tv_to_p_monotone = true;
};

/// One row of the scan: the D_SS minimizer at a single eps.
inline ScanRow scan_epsilon(const DiscreteJoint& p, double epsilon, const ScanConfig& cfg) {
  const SSWeight e{epsilon};
  const DiscreteJoint fact = factorized(p);
  const ObjectiveKind kind = objective::SS{e};
  ScanRow row;
  row.epsilon = epsilon;
  const OptResult opt = minimize_discrete(kind, p, cfg.opt);
  row.minimizer = as_joint(opt, p.alphabet_size());
  row.objective = opt.objective_value;
  row.converged = opt.converged;
  row.tv_to_p = total_variation(row.minimizer, p);
  row.tv_to_factorized = total_variation(row.minimizer, fact);
  if (cfg.brute_divisions > 0 && p.alphabet_size() == 2) {
    const OptResult brute = brute_force_minimize(kind, p, cfg.brute_divisions);
    row.has_brute_force = true;
    row.brute_minimizer = as_joint(brute, p.alphabet_size());
    row.brute_objective = brute.objective_value;
    row.brute_tv_to_p = total_variation(row.brute_minimizer, p);
    row.brute_tv_to_factorized = total_variation(row.brute_minimizer, fact);
  }
  return row;
}

inline InconsistencyReport assemble_report(const DiscreteJoint& p, std::vector<ScanRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const ScanRow& a, const ScanRow& b) { return a.epsilon < b.epsilon; });
  InconsistencyReport report{p, factorized(p), std::move(rows), true};
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].tv_to_p > report.rows[i - 1].tv_to_p + 1e-6) report.tv_to_p_monotone = false;
  }
  return report;
}

inline InconsistencyReport inconsistency_scan(const DiscreteJoint& p, std::vector<double> epsilons,
                                              const ScanConfig& cfg) {
  std::sort(epsilons.begin(), epsilons.end());
  std::vector<ScanRow> rows;
  rows.reserve(epsilons.size());
  for (double eps : epsilons) rows.push_back(scan_epsilon(p, eps, cfg));
  return assemble_report(p, std::move(rows));
}

}  // namespace divlab
