#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qplab::dioph {

struct ContinuedFraction {
  std::vector<std::int64_t> partial_quotients;
  std::vector<std::pair<std::int64_t, std::int64_t>> convergents;  // (p, q)
  bool near_rational = false;  // expansion stopped on a remainder < 1e-14
};

/// Gauss-map expansion of omega in (0,1) with the standard convergent
/// recurrence. Depth is capped at 40, the double-precision reliability limit.
ContinuedFraction continued_fraction(double omega, int depth);

/// Distance to the nearest integer, in [0, 1/2].
double torus_norm(double t);

/// ||k omega|| without precision loss for |k| up to ~1e9: exact reduction of
/// the double omega, or of the decimal digit string when one is supplied
/// (used for k > 1e4, where the double's own rounding starts to matter).
double torus_norm_of_multiple(std::int64_t k, double omega, const std::string& omega_digits = {});

/// min over 1 <= k <= K of k^exponent * ||k omega||; exponent 2 is the
/// Diophantine-condition normalization, other exponents are for exploration.
double dc_margin(double omega, std::int64_t K, double exponent = 2.0,
                 const std::string& omega_digits = {});

/// Rejection-samples omegas with dc_margin >= t (deterministic under seed).
/// Throws when the acceptance rate drops below 1% after 1e5 draws.
std::vector<double> sample_dc_frequencies(double t, int count, std::int64_t K,
                                          std::uint64_t seed);

struct FrequencyProfile {
  double omega = 0.0;
  std::string omega_digits;
  std::vector<std::int64_t> partial_quotients;
  std::vector<std::pair<std::int64_t, std::int64_t>> convergents;
  std::vector<std::pair<std::int64_t, double>> dc_margin_table;  // (K, margin)
  bool near_rational = false;

  std::string to_json() const;
};

FrequencyProfile frequency_profile(double omega, int depth, const std::vector<std::int64_t>& Ks,
                                   const std::string& omega_digits = {});

}  // namespace qplab::dioph
