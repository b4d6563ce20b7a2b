#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qplab/analysis.hpp"
#include "qplab/green.hpp"
#include "qplab/model_io.hpp"
#include "qplab/operator.hpp"

namespace qplab::lab {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Persisted experiment output. Everything except `created` is a pure
/// function of (config, seed); rerunning reproduces the scalars bit-exactly.
struct RunRecord {
  std::string task;
  std::string config_hash;
  std::string created;  // wall clock, excluded from hashing and comparisons
  std::map<std::string, double> inputs;
  std::map<std::string, double> scalars;
  std::map<std::string, Table> tables;

  std::string to_json() const;
  static RunRecord from_json(const std::string& text);
};

std::uint64_t stable_hash64(const std::string& text);            // FNV-1a
std::uint64_t derive_seed(std::uint64_t global, std::uint64_t index);  // splitmix64

// ---------------------------------------------------------------------------
// large deviation bad sets

struct LdtResult {
  std::vector<std::pair<int, double>> measures;  // (M, empirical Leb of the bad set)
  double potential_sum = 0.0;
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();  // a in e^{-c M^a}
  double decay_scale = std::numeric_limits<double>::quiet_NaN();     // c
  double clipped_fraction = 0.0;
  bool unreliable = false;  // more than 5% near-singular phase evaluations
};

/// Empirical measure of the set of phases whose length-M Birkhoff average of
/// (1/N) log|det H_N(.)| falls below the potential-side sum minus `margin`.
/// One orbit of u_N values per sample feeds every M in the list.
LdtResult ldt_bad_set(const OperatorModel& model, double E, std::int64_t n_sites,
                      const std::vector<int>& m_list, double margin, int samples,
                      std::uint64_t seed, double clip = 1e-8);

// ---------------------------------------------------------------------------
// good-phase scans

struct GoodPhaseScan {
  std::int64_t bad_count = 0;
  std::vector<std::int64_t> bad_positions;
  std::int64_t longest_bad_run = 0;
  std::vector<std::int64_t> skipped_positions;  // near-singular energies
};

/// horizon < 0 picks the default N^2; horizons above 1e6 are rejected.
GoodPhaseScan good_phase_scan(const OperatorModel& model, double E, std::int64_t n_sites,
                              double x, std::int64_t horizon,
                              const green::GoodnessParams& goodness);

// ---------------------------------------------------------------------------
// localization

struct EigenstateRow {
  double energy = 0.0;
  std::int64_t center = 0;      // site of max block norm
  double decay_rate = 0.0;      // slope of -log||psi_n|| vs |n - center|
  double participation = 0.0;   // (sum ||psi_n||^2)^2 / sum ||psi_n||^4
  bool capped = false;          // mass on <= 3 sites; rate reported as the cap
};

struct FitWindow {
  std::int64_t min_site_dist = 1;
  double norm_floor = 1e-13;
  double rate_cap = 50.0;
};

struct LocalizationResult {
  std::vector<EigenstateRow> rows;        // eigenvalue-ascending
  std::size_t mid_lo = 0, mid_hi = 0;     // central 80% index range [lo, hi)
  double rate_threshold = 0.0;            // rho / 3
  double mid_fraction_rate_ok = 0.0;      // fraction of mid rows with rate >= threshold
};

/// Decay fit + participation ratio of one site-norm profile; energy left 0.
EigenstateRow analyze_site_profile(const Eigen::VectorXd& site_norms, std::int64_t first_site,
                                   const FitWindow& window = {});

/// Eigensolve of H over [-N1, N1] plus a per-eigenvector decay fit and
/// participation ratio.
LocalizationResult localization_experiment(const OperatorModel& model, double x, std::int64_t n1,
                                           const FitWindow& window = {});

// ---------------------------------------------------------------------------
// extended-state identity

struct IdentityCheck {
  double max_block_residual = 0.0;
  double truncation_bound = 0.0;  // explicit bound from the dropped hopping tail
  double dist_to_spectrum = 0.0;
  bool skipped = false;  // E within 1e-9 of spec(H_N)
};

/// Feeds an eigenpair (E, psi) of H_L through psi|_N = -G_N * (boundary
/// coupling) and reports the worst per-site block residual.
IdentityCheck extended_state_identity_check(const OperatorModel& model,
                                            const LatticeInterval& inner,
                                            const LatticeInterval& outer, double x, double E,
                                            const Eigen::VectorXcd& psi, double tol);

// ---------------------------------------------------------------------------
// eigenvalue distances

struct EigDistRow {
  std::int64_t n = 0;
  std::int64_t n1 = 0;
  double energy = 0.0;
  double distance = 0.0;
};

/// Mid-spectrum eigenvalues of a large volume stand in for generalized
/// eigenvalues; for each N the distance to spec(H_[-N1,N1]) is recorded with
/// N1 = rule_multiplier * N.
std::vector<EigDistRow> eigenvalue_distance_experiment(const OperatorModel& model, double x,
                                                       const std::vector<std::int64_t>& n_list,
                                                       std::int64_t rule_multiplier = 4,
                                                       int proxy_count = 5);

// ---------------------------------------------------------------------------
// minor bounds

struct MinorBoundResult {
  double worst_margin = -std::numeric_limits<double>::infinity();
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();
  double potential_sum = 0.0;
  int singular_count = 0;
  Table rows;  // x, alpha, alpha', block distance, log|mu|, margin
};

/// Samples (x, alpha, alpha'), computes log|minor| and its margin against
/// N (potential_sum + l*slack) - (rho - slack) |n(a) - n(a')|.
MinorBoundResult minor_bound_diagnostic(const OperatorModel& model, double E,
                                        std::int64_t n_sites, int x_samples, int pair_samples,
                                        double slack, std::uint64_t seed);

// ---------------------------------------------------------------------------
// sweeps

struct SweepConfig {
  std::string task;  // lyap | ldt | green | localize
  std::string output_dir = "runs";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string model_file;  // empty: built-in reference model

  // grid dimensions; empty list = single default entry from the model/config
  std::vector<double> epsilons;
  std::vector<double> energies;
  std::vector<std::int64_t> sizes;
  std::vector<double> omegas;
  bool energies_given = false, epsilons_given = false, sizes_given = false, omegas_given = false;

  double x = 0.34;
  double ldt_margin = 0.05;
  std::vector<int> ldt_m_list = {10, 20, 40, 80};
  int ldt_samples = 2000;
  double dc_t = 0.0;  // when > 0, enforces the M >= max(10, t^-2) sample floor
  std::int64_t localize_n1 = 150;
  green::GoodnessParams goodness;
  analysis::QuadratureSpec quad;

  static SweepConfig from_ini(const std::vector<IniSection>& sections);
  static SweepConfig from_file(const std::string& path);

  /// Canonical text form fed to the config hash; excludes output paths.
  std::string canonical() const;
};

struct SweepOutcome {
  std::vector<RunRecord> records;  // input order; failed points carry scalars["failed"]=1
  std::vector<std::string> failures;
  std::string summary_csv;
  int computed = 0;
  int resumed = 0;
};

/// Cartesian product of the grid dimensions, one RunRecord per point, worker
/// pool of config.threads, per-point seeds derived from (seed, index).
/// Completed points (matching hash on disk) are skipped on rerun.
SweepOutcome sweep(const SweepConfig& config);

// ---------------------------------------------------------------------------
// plot output

void write_xy(const std::string& path, const std::vector<std::pair<double, double>>& points,
              const std::string& header);

/// Minimal SVG polyline plot (optionally log10 on y) for decay curves and
/// measure-vs-M plots.
void write_svg_curve(const std::string& path,
                     const std::vector<std::pair<double, double>>& points,
                     const std::string& title, bool log_y = false);

}  // namespace qplab::lab
