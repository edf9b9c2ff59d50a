#pragma once

#include <stdexcept>
#include <string>

namespace noisereg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Path generation failed (e.g. a covariance factorisation broke down).
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A modelling hypothesis (Hurst range, integrability) does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Too much occupation mass fell outside a spatial grid.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Not enough scales, windows or samples for a statistical estimate.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A grid is too coarse to resolve a kernel.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// More than the tolerated fraction of ensemble members blew up.
class BlowupError : public Error {
 public:
  using Error::Error;
};

}  // namespace noisereg
