#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <ostream>
#include <string>

#include "divlab/errors.hpp"

namespace divlab {

/// Round-off allowance below zero before a divergence is treated as a bug.
inline constexpr double kNegativeClamp = 1e-12;

/// A divergence or entropy value in nats, possibly infinite.
///
/// Infinite is a legitimate outcome (absolute continuity fails), not an
/// error. Finite values are never negative: anything in (-1e-12, 0) is
/// clamped to zero and anything further below raises NumericFault.
class Nats {
 public:
  constexpr Nats() = default;

  static Nats infinite() {
    Nats n;
    n.value_ = std::numeric_limits<double>::infinity();
    return n;
  }

  static Nats from_raw(double v) {
    if (std::isnan(v)) throw NumericFault("divergence evaluated to NaN");
    if (v == std::numeric_limits<double>::infinity()) return infinite();
    if (v < 0.0) {
      if (v > -kNegativeClamp) return Nats{};
      throw NumericFault("divergence below zero beyond round-off: " + std::to_string(v));
    }
    Nats n;
    n.value_ = v;
    return n;
  }

  bool is_infinite() const { return std::isinf(value_); }
  bool is_finite() const { return !is_infinite(); }

  /// +inf when infinite.
  double value() const { return value_; }

  friend Nats operator+(Nats a, Nats b) { return from_raw(a.value_ + b.value_); }

  friend auto operator<=>(const Nats& a, const Nats& b) { return a.value_ <=> b.value_; }
  friend bool operator==(const Nats& a, const Nats& b) { return a.value_ == b.value_; }

  friend std::ostream& operator<<(std::ostream& os, const Nats& n) {
    if (n.is_infinite()) return os << "inf";
    return os << n.value_;
  }

 private:
  double value_ = 0.0;
};

/// Mixture weight on P in the generalized Jensen-Shannon divergence; 0 < pi < 1.
class MixtureWeight {
 public:
  explicit MixtureWeight(double pi) : pi_(pi) {
    if (!(pi > 0.0 && pi < 1.0)) {
      throw InvalidArgument("mixture weight must lie in the open interval (0, 1), got " +
                            std::to_string(pi));
    }
  }

  double value() const { return pi_; }
  double complement() const { return 1.0 - pi_; }
  MixtureWeight mirrored() const { return MixtureWeight{1.0 - pi_}; }

 private:
  double pi_;
};

}  // namespace divlab
