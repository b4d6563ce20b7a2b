#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qplab/operator.hpp"

namespace qplab::analysis {

struct QuadratureSpec {
  enum class Method { midpoint_grid, monte_carlo };
  Method method = Method::midpoint_grid;
  int nodes = 4096;
  double clip = 1e-8;      // integrand floor log(clip) near singular phases
  std::uint64_t seed = 0;  // monte carlo draws

  void validate() const;
};

/// A real zero of v(x) - E on the torus with its multiplicity.
struct TorusRoot {
  double x = 0.0;
  int multiplicity = 1;
};

/// All real solutions of v(x) = E in [0,1), multiplicities from the first
/// nonvanishing derivative. Sign-change bisection for odd orders, critical
/// point inspection for tangencies.
std::vector<TorusRoot> potential_level_roots(const PotentialSpec& v, double E, int grid = 4096);

/// Integral of log|v(x) - E| over the torus. The log singularities are
/// removed exactly by subtracting multiples of log|2 sin(pi (x - x*))| (whose
/// torus integral vanishes), leaving an analytic integrand for the midpoint
/// rule. A constant potential equal to E yields -inf.
double torus_log_integral(const PotentialSpec& v, double E, const QuadratureSpec& quad = {},
                          double* error_estimate = nullptr);

/// Integral of log(|v(x) - E| + eps); continuous integrand, no special handling.
double regularized_log_integral(const PotentialSpec& v, double E, double eps,
                                const QuadratureSpec& quad = {});

/// Lebesgue measure of {x : |v(x) - E| < eps} by bracketing the boundary
/// roots of v - E -+ eps and classifying the arcs between them.
double lojasiewicz_measure(const PotentialSpec& v, double E, double eps, int grid = 4096);

/// Slope of log measure against log eps. Needs >= 4 eps values spanning two
/// decades; eps values with zero measure are dropped, < 3 survivors is an error.
double lojasiewicz_exponent_fit(const PotentialSpec& v, double E,
                                const std::vector<double>& eps_list, int grid = 4096);

/// (1/M) sum_{j=0}^{M-1} u(x + j omega), drift-free phases, compensated sum.
double birkhoff_sum(const std::function<double(double)>& u, double x, double omega,
                    std::int64_t count);

/// |sum_{j=1}^{N} u(x + j omega) - N \int u|.
double denjoy_koksma_deviation(const std::function<double(double)>& u, double x, double omega,
                               std::int64_t count, const QuadratureSpec& quad = {});

struct ExponentFit {
  double exponent = 0.0;
  std::vector<std::pair<double, double>> table;  // (N, deviation)
};

/// Deviation growth exponent over a geometric range of orbit lengths.
ExponentFit denjoy_koksma_exponent(const std::function<double(double)>& u, double x, double omega,
                                   std::int64_t n_lo, std::int64_t n_hi, int points = 12,
                                   const QuadratureSpec& quad = {});

/// Zeros of v(z) - E inside the periodic strip |Im z| < rho, counted with
/// multiplicity by the argument principle on the strip boundary (the vertical
/// rectangle edges cancel by periodicity). If a zero sits within 1e-8 of the
/// contour the height is nudged up by 1e-6 before integrating.
int strip_zero_count(const PotentialSpec& v, double E, double rho);

struct StripSearchResult {
  double E = 0.0;
  double xi = 0.0;
  double y0 = 0.0;           // best height in (xi/2, xi)
  double attained_min = 0.0; // min over j, x-grid and both half-strips at y0
  int zero_count_sigma = 0;
  double empirical_c = 0.0;  // attained_min / xi^Sigma
};

/// Scans (8 Sigma + 4) * 3 heights inside (xi/2, xi) and a >= 4096 x-grid for
/// the height maximizing min_j min_x |v_j(x +- i y) - E|.
std::vector<StripSearchResult> sorets_spencer_search(const BlockPotential& bp, double rho,
                                                     double xi, const std::vector<double>& E_grid,
                                                     int x_grid = 4096);

/// Harmonic measure of the interval (a, b) on the real line seen from z in the
/// upper half-plane: (1/pi) arg((z-b)/(z-a)). Accepts a = -inf or b = +inf.
double harmonic_measure_interval(std::complex<double> z, double a, double b);

enum class StripPart { bottom, top };

/// Harmonic measure of the bottom/top boundary of {0 < Im z < rho/2}:
/// 1 - Im z/(rho/2) and Im z/(rho/2).
double harmonic_measure_strip(std::complex<double> z, StripPart part, double rho);

struct MeanLogDet {
  double estimate = 0.0;       // (1/N) \int log|det H_N(x,E)| dx
  double potential_sum = 0.0;  // sum_j \int log|v_j - E|
  double signed_margin = 0.0;  // estimate - potential_sum
  double lower_margin = 0.0;   // |signed_margin|
  double upper_bound = 0.0;    // Hadamard bound l log(max_j sup|v_j-E| + eps S)
  double upper_margin = 0.0;   // upper_bound - estimate
  double clipped_fraction = 0.0;
  bool unreliable = false;     // more than 1% of the nodes hit the clip floor
  std::string to_json() const;
};

/// Torus average of (1/N) log|det H_N(x, E)| with per-node clipping at
/// log(clip) for near-singular phases.
MeanLogDet mean_log_det(const OperatorModel& model, double E, std::int64_t n_sites,
                        const QuadratureSpec& quad = {});

struct SubharmonicBound {
  double sup_u = 0.0;      // max of u_N over the real-axis grid
  double l2_norm = 0.0;    // (\int |u_N|^2)^{1/2}
  double c_star = 0.0;     // sup_u + l2_norm, the constant the LDT rate runs on
};

/// Diagnostic for u_N(x) = (1/N) log|det H_N(x,E)|: the bound constant is
/// measured, never assumed.
SubharmonicBound subharmonic_bound_diagnostic(const OperatorModel& model, double E,
                                              std::int64_t n_sites,
                                              const QuadratureSpec& quad = {});

}  // namespace qplab::analysis
