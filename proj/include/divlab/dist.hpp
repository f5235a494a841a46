#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "divlab/errors.hpp"
#include "divlab/rng.hpp"

namespace divlab {

/// Normalization tolerance for exact discrete identities.
inline constexpr double kProbTolerance = 1e-12;

namespace detail {

inline void validate_masses(std::span<const double> probs, const char* what) {
  if (probs.empty()) throw InvalidDistribution(std::string(what) + ": empty probability table");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      throw InvalidDistribution(std::string(what) + ": entry " + std::to_string(i) +
                                " is negative or not finite");
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kProbTolerance) {
    throw InvalidDistribution(std::string(what) + ": total mass " + std::to_string(total) +
                              " differs from 1");
  }
}

}  // namespace detail

/// Probability mass over the dense alphabet {0, ..., K-1}.
class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<double> probs) : probs_(std::move(probs)) {
    detail::validate_masses(probs_, "DiscreteDist");
  }
  DiscreteDist(std::initializer_list<double> probs) : DiscreteDist(std::vector<double>(probs)) {}

  static DiscreteDist uniform(std::size_t k) {
    if (k == 0) throw InvalidArgument("alphabet size must be positive");
    return DiscreteDist(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  /// Rescales nonnegative weights to unit mass.
  static DiscreteDist normalized(std::vector<double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw InvalidDistribution("DiscreteDist: weights have no mass");
    for (double& w : weights) w /= total;
    return DiscreteDist(std::move(weights));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  friend bool operator==(const DiscreteDist&, const DiscreteDist&) = default;

 private:
  std::vector<double> probs_;
};

/// Joint mass over pairs (x1, x2) on a K x K table, row index = x1.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t k, std::vector<double> table) : k_(k), table_(std::move(table)) {
    if (k_ == 0 || table_.size() != k_ * k_) {
      throw InvalidDistribution("DiscreteJoint: table must hold K*K entries");
    }
    detail::validate_masses(table_, "DiscreteJoint");
  }

  DiscreteJoint(std::initializer_list<std::initializer_list<double>> rows)
      : DiscreteJoint(rows.size(), flatten(rows)) {}

  static DiscreteJoint uniform(std::size_t k) {
    if (k == 0) throw InvalidArgument("alphabet size must be positive");
    return DiscreteJoint(k, std::vector<double>(k * k, 1.0 / static_cast<double>(k * k)));
  }

  static DiscreteJoint normalized(std::size_t k, std::vector<double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw InvalidDistribution("DiscreteJoint: weights have no mass");
    for (double& w : weights) w /= total;
    return DiscreteJoint(k, std::move(weights));
  }

  std::size_t alphabet_size() const { return k_; }
  double at(std::size_t x1, std::size_t x2) const { return table_[x1 * k_ + x2]; }
  std::span<const double> row(std::size_t x1) const {
    return std::span<const double>(table_).subspan(x1 * k_, k_);
  }
  /// Row-major view over all K*K cells.
  std::span<const double> cells() const { return table_; }

  friend bool operator==(const DiscreteJoint&, const DiscreteJoint&) = default;

 private:
  static std::vector<double> flatten(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw InvalidDistribution("DiscreteJoint: table must be square");
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }

  std::size_t k_;
  std::vector<double> table_;
};

inline DiscreteDist marginal_first(const DiscreteJoint& joint) {
  const std::size_t k = joint.alphabet_size();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (double v : joint.row(i)) out[i] += v;
  }
  return DiscreteDist(std::move(out));
}

inline DiscreteDist marginal_second(const DiscreteJoint& joint) {
  const std::size_t k = joint.alphabet_size();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[j] += joint.at(i, j);
  }
  return DiscreteDist(std::move(out));
}

/// Distribution of x2 given x1 = z. Throws ZeroMarginal when z has no mass.
inline DiscreteDist conditional_second(const DiscreteJoint& joint, std::size_t z) {
  if (z >= joint.alphabet_size()) throw InvalidArgument("conditioning symbol out of range");
  const auto row = joint.row(z);
  const double mass = std::accumulate(row.begin(), row.end(), 0.0);
  if (mass <= 0.0) {
    throw ZeroMarginal("first-symbol marginal is zero at z = " + std::to_string(z));
  }
  std::vector<double> out(row.begin(), row.end());
  for (double& v : out) v /= mass;
  return DiscreteDist(std::move(out));
}

inline DiscreteJoint factorized(const DiscreteDist& first, const DiscreteDist& second) {
  if (first.size() != second.size()) {
    throw AlphabetMismatch("factorized: marginals have different alphabet sizes");
  }
  const std::size_t k = first.size();
  std::vector<double> table(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) table[i * k + j] = first[i] * second[j];
  }
  return DiscreteJoint(k, std::move(table));
}

/// Product of the two position marginals of `joint`.
inline DiscreteJoint factorized(const DiscreteJoint& joint) {
  return factorized(marginal_first(joint), marginal_second(joint));
}

inline std::size_t sample(const DiscreteDist& dist, Rng& rng) { return rng.categorical(dist.probs()); }

/// Half the L1 distance between two tables of equal length.
inline double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw AlphabetMismatch("total_variation: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

inline double total_variation(const DiscreteJoint& a, const DiscreteJoint& b) {
  return total_variation(a.cells(), b.cells());
}

inline double total_variation(const DiscreteDist& a, const DiscreteDist& b) {
  return total_variation(a.probs(), b.probs());
}

/// Normalized independent Gamma(concentration) draws over `cells` entries,
/// i.e. a symmetric Dirichlet sample. Entries are strictly positive.
inline std::vector<double> random_simplex(std::size_t cells, double concentration, Rng& rng) {
  if (cells == 0) throw InvalidArgument("random_simplex: no cells");
  if (!(concentration > 0.0)) throw InvalidArgument("concentration must be positive");
  std::vector<double> w(cells);
  double total = 0.0;
  for (double& v : w) {
    v = std::max(rng.gamma(concentration), 1e-300);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

inline DiscreteJoint random_joint(std::size_t k, double concentration, Rng& rng) {
  if (k < 2) throw InvalidArgument("random_joint: alphabet size must be at least 2");
  return DiscreteJoint(k, random_simplex(k * k, concentration, rng));
}

inline DiscreteDist random_dist(std::size_t k, double concentration, Rng& rng) {
  if (k < 2) throw InvalidArgument("random_dist: alphabet size must be at least 2");
  return DiscreteDist(random_simplex(k, concentration, rng));
}

}  // namespace divlab
