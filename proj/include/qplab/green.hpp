#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qplab/operator.hpp"

namespace qplab::green {

/// Decay criterion ||G_(n,n')|| <= exp(-(|n-n'| - margin_fraction*|N|) * (rho - rate_slack)).
struct GoodnessParams {
  double margin_fraction = 0.01;
  double rate_slack = 0.0;  // effective stand-in for the eps^delta loss
  double rho = 1.0;

  void validate() const;
  double log_threshold(std::int64_t block_distance, std::int64_t interval_length) const {
    return -(static_cast<double>(block_distance) - margin_fraction * interval_length) *
           (rho - rate_slack);
  }
};

struct GreenReport {
  LatticeInterval interval;
  int block_size = 1;
  double x = 0.0;
  double E = 0.0;
  Eigen::MatrixXd block_norms;      // |N| x |N| operator norms of the l x l blocks
  Eigen::MatrixXcd blocks;          // the full inverse, retained
  double residual = 0.0;            // ||(H-E)G - I||_max
  double dist_to_spectrum = 0.0;
  bool good = false;
  std::pair<int, int> worst_pair{0, 0};
  double worst_margin = 0.0;        // max over pairs of log||G|| - log threshold
  double fitted_decay_rate = std::numeric_limits<double>::quiet_NaN();

  std::int64_t sites() const { return interval.length(); }
  /// JSON document: metadata header plus the block norms as a flat row-major array.
  std::string to_json() const;
};

struct ClassifyResult {
  bool good = false;
  double worst_margin = 0.0;
  std::pair<int, int> worst_pair{0, 0};
};

/// All blocks of (H_N(x) - E)^{-1} via LU solves with refinement.
/// Refuses inversion when dist(E, spec) < 1e-9 ||H||; the caller is expected
/// to sample energies away from exact eigenvalues.
GreenReport green_function(const OperatorModel& model, const LatticeInterval& interval, double x,
                           double E, double assemble_tol = 1e-12);

/// Batch over (x, E) tasks; evaluates on `threads` workers, results assembled
/// in input order. Near-singular entries come back empty with ok = false.
struct BatchEntry {
  GreenReport report;
  bool ok = false;
  std::string error;
};
std::vector<BatchEntry> green_function_batch(const OperatorModel& model,
                                             const LatticeInterval& interval,
                                             const std::vector<std::pair<double, double>>& tasks,
                                             int threads = 1, double assemble_tol = 1e-12);

ClassifyResult classify_good(const GreenReport& report, const GoodnessParams& params);

/// Classify and store the verdict on the report.
void apply_goodness(GreenReport& report, const GoodnessParams& params);

/// Least-squares decay rate of -log||G_(n,n')|| against |n-n'| over pairs with
/// |n-n'| > |N|/10, skipping block norms below 1e-280. Needs |N| >= 10 and at
/// least 5 usable pairs.
double decay_rate_fit(const GreenReport& report);

/// Compares inverse entries against the adjugate route
/// (-1)^{a+a'} minor(a',a) / det, both in log form; returns the max relative
/// discrepancy over the sampled index pairs.
double cramer_check_matrix(const Eigen::MatrixXcd& matrix,
                           const std::vector<std::pair<int, int>>& pairs);
double cramer_check(const OperatorModel& model, const LatticeInterval& interval, double x,
                    double E, const std::vector<std::pair<int, int>>& pairs);

struct PavingVerdict {
  bool coverage_ok = false;          // hypothesis (i)
  bool all_subintervals_good = false;  // hypothesis (ii)
  std::vector<std::int64_t> bad_subinterval_starts;
  bool hypotheses_hold = false;
  bool conclusion_good = false;      // big-interval Green classified against the criterion
  bool conclusive = false;           // hypotheses held, so the conclusion was testable
  double big_worst_margin = 0.0;
};

/// Builds length-M subintervals stepping by floor(M/4), checks that every site
/// has its M/4-neighborhood (within N) inside one subinterval, classifies each
/// subinterval Green and the big one, and reports whether the implication
/// hypotheses => conclusion was confirmed.
PavingVerdict paving_verify(const OperatorModel& model, double x, double E,
                            const LatticeInterval& big, std::int64_t small_length,
                            const GoodnessParams& params);

}  // namespace qplab::green
