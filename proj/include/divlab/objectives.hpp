#pragma once

// Closed-form training objectives for length-2 sequences (x1, x2).
//
// Maximum likelihood (teacher forcing), decomposed by the chain rule:
//   D_ML  = KL[P_x1 || Q_x1] + E_{z~P_x1} KL[P_x2|x1=z || Q_x2|x1=z]
//
// Prefix replaced by a model sample; the model never sees the real x1, so
// the target for x2 is the position marginal P_x2:
//   D_alt = KL[P_x1 || Q_x1] + E_{z~Q_x1} KL[P_x2 || Q_x2|x1=z]
//
// Scheduled sampling keeps the real prefix with probability eps:
//   D_SS  = KL[P_x1 || Q_x1] + eps (ML conditional term) + (1-eps) (alt term)
//
// and the perceptual objective KL[Q || P] = -E_Q ln P - H[Q].

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "divlab/dist.hpp"
#include "divlab/divergence.hpp"
#include "divlab/errors.hpp"
#include "divlab/nats.hpp"

namespace divlab {

/// Probability of keeping the real prefix symbol; 0 <= eps <= 1.
class SSWeight {
 public:
  explicit SSWeight(double epsilon) : eps_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw InvalidArgument("scheduled-sampling weight must lie in [0, 1], got " + std::to_string(epsilon));
    }
  }
  double value() const { return eps_; }

 private:
  double eps_;
};

namespace objective {
struct ML {};
struct Alternative {};
struct SS {
  SSWeight epsilon;
};
/// KL[Q || P], the idealized perceptual-quality objective.
struct PerceptualKL {};
/// JS_pi[P || Q] with weight pi on the data distribution P.
struct JSpi {
  MixtureWeight pi;
};
}  // namespace objective

using ObjectiveKind =
    std::variant<objective::ML, objective::Alternative, objective::SS, objective::PerceptualKL, objective::JSpi>;

inline std::string objective_name(const ObjectiveKind& kind) {
  struct Namer {
    std::string operator()(const objective::ML&) const { return "ml"; }
    std::string operator()(const objective::Alternative&) const { return "alternative"; }
    std::string operator()(const objective::SS& s) const { return "ss(" + std::to_string(s.epsilon.value()) + ")"; }
    std::string operator()(const objective::PerceptualKL&) const { return "perceptual_kl"; }
    std::string operator()(const objective::JSpi& j) const { return "js_pi(" + std::to_string(j.pi.value()) + ")"; }
  };
  return std::visit(Namer{}, kind);
}

namespace detail {

/// The three pieces every two-symbol objective is assembled from. Values are
/// raw doubles; +inf marks an absolute-continuity violation.
struct TwoSymbolTerms {
  double first = 0.0;        // KL[P_x1 || Q_x1]
  double conditional = 0.0;  // E_{z~P_x1} KL[P_x2|z || Q_x2|z]
  double replaced = 0.0;     // E_{z~Q_x1} KL[P_x2 || Q_x2|z]
};

inline std::vector<double> row_sums(const DiscreteJoint& j) {
  std::vector<double> out(j.alphabet_size(), 0.0);
  for (std::size_t z = 0; z < j.alphabet_size(); ++z) {
    for (double v : j.row(z)) out[z] += v;
  }
  return out;
}

inline TwoSymbolTerms two_symbol_terms(const DiscreteJoint& p, const DiscreteJoint& q) {
  if (p.alphabet_size() != q.alphabet_size()) {
    throw AlphabetMismatch("objective: P and Q have different alphabet sizes");
  }
  const std::size_t k = p.alphabet_size();
  const std::vector<double> p1 = row_sums(p);
  const std::vector<double> q1 = row_sums(q);
  const DiscreteDist p2 = marginal_second(p);

  TwoSymbolTerms t;
  t.first = kl_raw(p1, q1);

  std::vector<double> pc(k);
  std::vector<double> qc(k);
  for (std::size_t z = 0; z < k; ++z) {
    if (q1[z] > 0.0) {
      for (std::size_t j = 0; j < k; ++j) qc[j] = q.at(z, j) / q1[z];
    }
    if (p1[z] > 0.0) {
      if (q1[z] <= 0.0) {
        t.conditional = std::numeric_limits<double>::infinity();
      } else {
        for (std::size_t j = 0; j < k; ++j) pc[j] = p.at(z, j) / p1[z];
        t.conditional += p1[z] * kl_raw(pc, qc);
      }
    }
    if (q1[z] > 0.0) t.replaced += q1[z] * kl_raw(p2.probs(), qc);
  }
  return t;
}

inline double weighted(double weight, double term) { return weight == 0.0 ? 0.0 : weight * term; }

}  // namespace detail

/// KL[P||Q] evaluated through the chain-rule decomposition.
inline Nats d_ml(const DiscreteJoint& p, const DiscreteJoint& q) {
  const auto t = detail::two_symbol_terms(p, q);
  return Nats::from_raw(t.first + t.conditional);
}

inline Nats d_alternative(const DiscreteJoint& p, const DiscreteJoint& q) {
  const auto t = detail::two_symbol_terms(p, q);
  return Nats::from_raw(t.first + t.replaced);
}

/// Idealized scheduled-sampling objective. At eps = 1 this is bit-identical
/// to d_ml and at eps = 0 to d_alternative.
inline Nats d_ss(const DiscreteJoint& p, const DiscreteJoint& q, SSWeight e) {
  const auto t = detail::two_symbol_terms(p, q);
  const double eps = e.value();
  return Nats::from_raw(t.first + detail::weighted(eps, t.conditional) + detail::weighted(1.0 - eps, t.replaced));
}

/// KL[Q || P]; infinite when P vanishes on the support of Q.
template <ProbabilityTable T>
Nats perceptual_kl(const T& q, const T& p) {
  return kl(q, p);
}

/// -E_{x~Q} ln P(x).
template <ProbabilityTable T>
Nats perplexity_term(const T& q, const T& p) {
  return cross_entropy(q, p);
}

/// Value of `kind` at model Q for data P.
inline Nats evaluate(const ObjectiveKind& kind, const DiscreteJoint& p, const DiscreteJoint& q) {
  struct Eval {
    const DiscreteJoint& p;
    const DiscreteJoint& q;
    Nats operator()(const objective::ML&) const { return d_ml(p, q); }
    Nats operator()(const objective::Alternative&) const { return d_alternative(p, q); }
    Nats operator()(const objective::SS& s) const { return d_ss(p, q, s.epsilon); }
    Nats operator()(const objective::PerceptualKL&) const { return perceptual_kl(q, p); }
    Nats operator()(const objective::JSpi& j) const { return js_pi(p, q, j.pi); }
  };
  return std::visit(Eval{p, q}, kind);
}

/// Gradient of `kind` with respect to the K*K joint cells of Q, treating the
/// cells as free positive coordinates (marginals are row sums). Q must be
/// strictly positive. Constant offsets are irrelevant after the softmax
/// chain rule.
inline std::vector<double> cell_gradient(const ObjectiveKind& kind, const DiscreteJoint& p, const DiscreteJoint& q) {
  if (p.alphabet_size() != q.alphabet_size()) throw AlphabetMismatch("cell_gradient: alphabet sizes differ");
  const std::size_t k = p.alphabet_size();
  std::vector<double> g(k * k, 0.0);

  struct Grad {
    const DiscreteJoint& p;
    const DiscreteJoint& q;
    std::vector<double>& g;
    std::size_t k;

    // d/dq_zj of  KL1 + a * (ML conditional) + b * (replaced term).
    void two_symbol(double a, double b) const {
      const std::vector<double> p1 = detail::row_sums(p);
      const std::vector<double> q1 = detail::row_sums(q);
      const DiscreteDist p2 = marginal_second(p);
      std::vector<double> qc(k);
      for (std::size_t z = 0; z < k; ++z) {
        for (std::size_t j = 0; j < k; ++j) qc[j] = q.at(z, j) / q1[z];
        const double kl_row = b != 0.0 ? detail::kl_raw(p2.probs(), qc) : 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          double v = -p1[z] / q1[z];
          if (a != 0.0) v += a * (-p.at(z, j) / q.at(z, j) + p1[z] / q1[z]);
          if (b != 0.0) v += b * (kl_row + 1.0 - p2[j] / qc[j]);
          g[z * k + j] = v;
        }
      }
    }

    void operator()(const objective::ML&) const { two_symbol(1.0, 0.0); }
    void operator()(const objective::Alternative&) const { two_symbol(0.0, 1.0); }
    void operator()(const objective::SS& s) const { two_symbol(s.epsilon.value(), 1.0 - s.epsilon.value()); }
    void operator()(const objective::PerceptualKL&) const {
      for (std::size_t c = 0; c < k * k; ++c) {
        if (p.cells()[c] <= 0.0) throw NonFiniteObjective("perceptual_kl gradient: P has a zero cell");
        g[c] = std::log(q.cells()[c] / p.cells()[c]) + 1.0;
      }
    }
    void operator()(const objective::JSpi& j) const {
      const double pi = j.pi.value();
      for (std::size_t c = 0; c < k * k; ++c) {
        const double m = pi * p.cells()[c] + (1.0 - pi) * q.cells()[c];
        g[c] = (1.0 - pi) * std::log(q.cells()[c] / m);
      }
    }
  };
  std::visit(Grad{p, q, g, k}, kind);
  return g;
}

}  // namespace divlab
