#pragma once

#include <stdexcept>
#include <string>

namespace llmcb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions, out-of-range hyperparameters, malformed config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset or cache content that fails validation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The normalization root for the log-barrier update could not be found.
class SolverError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A generator backend failed after exhausting its retries.
class GeneratorError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace llmcb
