#pragma once

#include <stdexcept>
#include <string>

namespace energy_matching {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, malformed config files, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Point or batch dimensions that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An API used outside its contract (wrong coupling kind, foreign tape, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, divergence, failed convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or has the wrong format.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace energy_matching
