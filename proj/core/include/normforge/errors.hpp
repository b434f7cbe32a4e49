#pragma once

#include <stdexcept>
#include <string>

namespace normforge {

/// Base class for all normforge errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Operation is undefined at this input (e.g. an LMO at zero).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during an iterative computation.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_ = -1;
};

/// Input exceeds the scale the verification oracle supports.
class OracleScopeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace normforge
