#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "divlab/dist.hpp"
#include "divlab/errors.hpp"

namespace divlab {

/// Largest number of full-length paths the model is willing to enumerate.
inline constexpr std::size_t kMaxEnumeratedPaths = 4096;

/// Autoregressive model over sequences of fixed length N on alphabet K, with
/// one explicit conditional row per prefix:
///
///   Q(x_1..x_N) = prod_n Q_n(x_n | x_1..x_{n-1})
///
/// Prefixes are literal symbol tuples. Rows are stored level by level; the
/// prefix (s_1, ..., s_l) lives at offset(l) + base-K code of the tuple.
class TabularAutoregressive {
 public:
  /// Every row uniform.
  TabularAutoregressive(std::size_t length, std::size_t alphabet_size)
      : length_(length), k_(alphabet_size) {
    if (length_ == 0) throw InvalidArgument("sequence length must be positive");
    if (k_ < 2) throw InvalidArgument("alphabet size must be at least 2");
    std::size_t paths = 1;
    for (std::size_t n = 0; n < length_; ++n) {
      offsets_.push_back(rows_);
      rows_ += paths;
      paths *= k_;
      if (paths > kMaxEnumeratedPaths) throw InvalidArgument("model too large to tabulate");
    }
    probs_.assign(rows_ * k_, 1.0 / static_cast<double>(k_));
  }

  /// Length-2 model reproducing `joint` exactly. Rows for impossible first
  /// symbols are left uniform.
  static TabularAutoregressive from_joint(const DiscreteJoint& joint) {
    TabularAutoregressive model(2, joint.alphabet_size());
    const DiscreteDist first = marginal_first(joint);
    model.set_row(std::vector<std::size_t>{}, first.probs());
    for (std::size_t z = 0; z < joint.alphabet_size(); ++z) {
      if (first[z] > 0.0) {
        const std::size_t prefix[] = {z};
        model.set_row(prefix, conditional_second(joint, z).probs());
      }
    }
    return model;
  }

  std::size_t length() const { return length_; }
  std::size_t alphabet_size() const { return k_; }
  std::size_t row_count() const { return rows_; }

  std::size_t row_index(std::span<const std::size_t> prefix) const {
    if (prefix.size() >= length_) throw InvalidArgument("prefix must be shorter than the sequence");
    std::size_t code = 0;
    for (std::size_t s : prefix) {
      if (s >= k_) throw InvalidArgument("prefix symbol out of range");
      code = code * k_ + s;
    }
    return offsets_[prefix.size()] + code;
  }

  std::span<const double> row(std::span<const std::size_t> prefix) const {
    return row_at(row_index(prefix));
  }
  std::span<const double> row_at(std::size_t index) const {
    return std::span<const double>(probs_).subspan(index * k_, k_);
  }
  std::span<double> mutable_row_at(std::size_t index) {
    return std::span<double>(probs_).subspan(index * k_, k_);
  }

  DiscreteDist conditional(std::span<const std::size_t> prefix) const {
    const auto r = row(prefix);
    return DiscreteDist(std::vector<double>(r.begin(), r.end()));
  }

  void set_row(std::span<const std::size_t> prefix, std::span<const double> probs) {
    if (probs.size() != k_) throw AlphabetMismatch("row length differs from alphabet size");
    detail::validate_masses(probs, "TabularAutoregressive row");
    auto dst = mutable_row_at(row_index(prefix));
    std::copy(probs.begin(), probs.end(), dst.begin());
  }

  /// Probability of one full-length sequence.
  double sequence_probability(std::span<const std::size_t> seq) const {
    if (seq.size() != length_) throw InvalidArgument("sequence length differs from model length");
    double p = 1.0;
    for (std::size_t n = 0; n < length_; ++n) {
      p *= row(seq.first(n))[seq[n]];
    }
    return p;
  }

  /// Mass of every length-N path, indexed by the base-K code of the path.
  std::vector<double> path_probabilities() const {
    std::size_t paths = 1;
    for (std::size_t n = 0; n < length_; ++n) paths *= k_;
    if (paths > kMaxEnumeratedPaths) throw InvalidArgument("too many paths to enumerate");
    // Level-by-level expansion: mass of every prefix of length n.
    std::vector<double> level{1.0};
    for (std::size_t n = 0; n < length_; ++n) {
      std::vector<double> next(level.size() * k_);
      for (std::size_t code = 0; code < level.size(); ++code) {
        const auto r = row_at(offsets_[n] + code);
        for (std::size_t s = 0; s < k_; ++s) next[code * k_ + s] = level[code] * r[s];
      }
      level = std::move(next);
    }
    return level;
  }

  /// Implied joint of a length-2 model.
  DiscreteJoint joint() const {
    if (length_ != 2) throw InvalidArgument("joint() requires a length-2 model");
    return DiscreteJoint::normalized(k_, path_probabilities());
  }

  friend bool operator==(const TabularAutoregressive&, const TabularAutoregressive&) = default;

 private:
  std::size_t length_;
  std::size_t k_;
  std::size_t rows_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> probs_;
};

/// Per-position marginals of a path table over K^N sequences.
inline std::vector<std::vector<double>> position_marginals(std::span<const double> paths,
                                                           std::size_t length, std::size_t k) {
  std::vector<std::vector<double>> out(length, std::vector<double>(k, 0.0));
  for (std::size_t code = 0; code < paths.size(); ++code) {
    std::size_t rest = code;
    for (std::size_t n = length; n-- > 0;) {
      out[n][rest % k] += paths[code];
      rest /= k;
    }
  }
  return out;
}

/// Product of position marginals, the "positional counter" distribution.
inline std::vector<double> factorized_paths(std::span<const double> paths, std::size_t length,
                                            std::size_t k) {
  const auto marg = position_marginals(paths, length, k);
  std::vector<double> out(paths.size(), 1.0);
  for (std::size_t code = 0; code < paths.size(); ++code) {
    std::size_t rest = code;
    for (std::size_t n = length; n-- > 0;) {
      out[code] *= marg[n][rest % k];
      rest /= k;
    }
  }
  return out;
}

}  // namespace divlab
