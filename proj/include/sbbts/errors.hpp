#pragma once

#include <stdexcept>
#include <string>

namespace sbbts {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed, too short, or degenerate.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Training or estimation produced a non-finite or degenerate quantity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow the expected schema or version.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbbts
