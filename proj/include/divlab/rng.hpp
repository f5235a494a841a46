#pragma once

// Reproducible random streams.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard <random> distributions are implementation-defined,
// so every variate below is derived from raw engine words by a fixed
// algorithm:
//
//   uniform()      (word >> 11) * 2^-53, in [0, 1)
//   normal()       Marsaglia polar method on 2*uniform()-1 pairs
//   gamma(a)       Marsaglia-Tsang squeeze; a < 1 via gamma(a+1) * U^(1/a)
//   categorical()  inverse CDF by linear scan; falls back to the last
//                  positive cell when round-off leaves u above the total
//
// Child streams come from split(seed, index) = splitmix64(seed + (index+1) *
// 0x9E3779B97F4A7C15), so sweeps and restarts get independent, stable seeds.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace divlab {

struct RngSeed {
  std::uint64_t value = 0;

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derive the seed of child stream `index` from a base seed.
inline RngSeed split(RngSeed base, std::uint64_t index) {
  return RngSeed{splitmix64(base.value + (index + 1) * 0x9E3779B97F4A7C15ULL)};
}

class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      double u = uniform();
      while (u == 0.0) u = uniform();
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Index drawn with probability proportional to `weights` (assumed to sum to ~1).
  std::size_t categorical(std::span<const double> weights) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      acc += weights[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace divlab
