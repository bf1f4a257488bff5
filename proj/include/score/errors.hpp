#pragma once

#include <stdexcept>
#include <string>

namespace score {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument (dimension mismatch, invalid range, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Level-set projection failed (vanishing gradient or iteration cap hit).
class ProjectionError : public Error {
 public:
  using Error::Error;
};

/// Ray search escaped to infinity: the level set is not compact.
class NonCompactError : public Error {
 public:
  using Error::Error;
};

/// Dataset carries no usable variation (e.g. all block maxima identical).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Fitted tail shape is non-negative: no finite endpoint exists.
class HeavyTailError : public Error {
 public:
  using Error::Error;
};

/// Bootstrap produced no usable resamples.
class BootstrapError : public Error {
 public:
  using Error::Error;
};

/// No level passed the linearization probe near the origin.
class SeedError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File read/write failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace score
