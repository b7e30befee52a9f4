#pragma once

#include <stdexcept>
#include <string>

namespace fedngm {

/// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, schema violations and bad input files (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that does not conform to a FeatureSchema.
class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Federation protocol failures, including privacy-gate denials (exit code 3).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses or gradients, singular matrices (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedngm
