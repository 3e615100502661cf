#pragma once

#include <stdexcept>
#include <string>

namespace ufl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidBoundsError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

class EmptyPosteriorError : public Error {
 public:
  using Error::Error;
};

/// A density, gradient or utility evaluated to NaN/inf where the math says it cannot.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Raised when too many post-warmup NUTS transitions diverge.
class SamplerHealthError : public Error {
 public:
  using Error::Error;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

/// The GP kernel matrix could not be factorized even with the largest jitter.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ufl
