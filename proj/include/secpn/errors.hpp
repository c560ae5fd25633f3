#pragma once

#include <stdexcept>
#include <string>

namespace secpn {

// Base for all library errors. The subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Bad user input: malformed config, invalid order, missing files.
class InvalidInput : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

// A modelling hypothesis does not hold (drift terms, non-positive attenuation).
class ModelAssumptionViolation : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Singular systems, failed factorizations, non-convergence.
class NumericalFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace secpn
