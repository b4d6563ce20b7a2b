#pragma once

#include <cstdint>
#include <string>

namespace qplab {

/// x mod 1 mapped into [0, 1).
double frac_unit(double x);

/// frac(k * omega) in [0, 1), computed from the exact binary expansion of the
/// double omega, so no precision is lost for |k| up to ~1e9 (a plain k*omega
/// product loses the fractional part entirely near k ~ 1e8).
double frac_of_multiple(std::int64_t k, double omega);

/// frac(x + n*omega) in [0, 1). Drift-free orbit phases for |n| up to ~1e9.
double torus_phase(double x, std::int64_t n, double omega);

/// Distance from t to the nearest integer, in [0, 1/2].
double dist_to_integer(double t);

/// A fraction in [0,1) held as 192 fixed-point bits, parsed from a decimal
/// digit string. Used when a frequency is supplied with more precision than a
/// double carries; frac_of_multiple stays exact for k up to ~1e9 against the
/// full digit string rather than its double rounding.
class DecimalFraction {
 public:
  DecimalFraction() = default;

  /// Accepts "0.6180339887...", ".618...", or bare fraction digits "618033...".
  /// Throws ValidationError on anything else. Digits beyond 57 are ignored.
  static DecimalFraction parse(const std::string& text);

  double value() const;
  double frac_of_multiple(std::int64_t k) const;
  bool empty() const { return limbs_[0] == 0 && limbs_[1] == 0 && limbs_[2] == 0; }

 private:
  // little-endian limbs of f * 2^192
  std::uint64_t limbs_[3] = {0, 0, 0};
};

}  // namespace qplab
