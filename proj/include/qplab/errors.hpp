#pragma once

#include <stdexcept>
#include <string>

namespace qplab {

/// Bad inputs: malformed model files, broken invariants, precondition violations.
/// The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure: singular factorization, contour too close to a zero,
/// fit with too little data. The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Refused inversion near the spectrum; carries the measured distance when known.
struct NearSingularError : NumericalError {
  explicit NearSingularError(const std::string& what, double dist = -1.0)
      : NumericalError(what), spectrum_distance(dist) {}
  double spectrum_distance;
};

struct InsufficientDataError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace qplab
