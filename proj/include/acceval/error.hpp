#pragma once

#include <stdexcept>

namespace acceval {

/// Malformed, inconsistent or insufficient input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regression design matrix without full column rank.
class SingularFit : public DataError {
 public:
  using DataError::DataError;
};

/// Artifacts produced for one closed-loop model used with another.
class FingerprintMismatch : public DataError {
 public:
  using DataError::DataError;
};

/// No admissible input sequence reaches the event within the horizon.
class UnreachableEvent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace acceval
