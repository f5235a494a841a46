#pragma once

#include <stdexcept>
#include <string>

namespace divlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constructor or operation received an argument outside its domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Probability table violates nonnegativity or normalization.
class InvalidDistribution : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Conditioning on a prefix that has zero marginal mass.
class ZeroMarginal : public Error {
 public:
  using Error::Error;
};

/// Two operands live on different alphabets or shapes.
class AlphabetMismatch : public Error {
 public:
  using Error::Error;
};

/// Grid bounds miss the support of the density being sampled.
class DegenerateGrid : public Error {
 public:
  using Error::Error;
};

/// Two grid densities do not share bounds and resolution.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A divergence came out negative beyond round-off.
class NumericFault : public Error {
 public:
  using Error::Error;
};

/// An objective evaluated to a non-finite value where a finite one is required.
class NonFiniteObjective : public NumericFault {
 public:
  using NumericFault::NumericFault;
};

/// Exhaustive search would visit too many grid points.
class GridTooLarge : public Error {
 public:
  using Error::Error;
};

class EmptySamples : public Error {
 public:
  using Error::Error;
};

/// Adversarial training produced non-finite generator parameters.
class DivergedTraining : public NumericFault {
 public:
  using NumericFault::NumericFault;
};

}  // namespace divlab
