// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code; runtimes are measured
// where the criterion caps them.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qplab/analysis.hpp"
#include "qplab/denselin.hpp"
#include "qplab/diophantine.hpp"
#include "qplab/errors.hpp"
#include "qplab/green.hpp"
#include "qplab/lab.hpp"
#include "qplab/operator.hpp"
#include "qplab/torus.hpp"

using namespace qplab;

namespace {

constexpr double kReferencePhase = 0.34;
int failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string name)
      : number_(number), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& detail) {
    if (!ok) {
      ok_ = false;
      if (!detail.empty()) details_.push_back(detail);
    }
  }

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void finish(const std::string& summary = "") {
    std::printf("[%s] criterion %2d: %-34s (%6.2f s)%s%s\n", ok_ ? "PASS" : "FAIL", number_,
                name_.c_str(), seconds(), summary.empty() ? "" : "  ", summary.c_str());
    for (const auto& d : details_) std::printf("       - %s\n", d.c_str());
    if (!ok_) ++failures;
  }

  void fail_exception(const std::exception& ex) {
    ok_ = false;
    details_.push_back(std::string("exception: ") + ex.what());
    finish();
  }

 private:
  int number_;
  std::string name_;
  bool ok_ = true;
  std::vector<std::string> details_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// --------------------------------------------------------------------------

void criterion_1_uncoupled_exactness() {
  Criterion crit(1, "uncoupled exactness at N=200");
  try {
    const auto model = reference_model(0.0);
    const LatticeInterval interval{1, 200};
    const int l = model.block_size();

    const auto eig = denselin::eigensolve_hermitian(
        assemble_dirichlet(model, interval, kReferencePhase, 0.0));
    std::vector<double> expected;
    for (std::int64_t n = 1; n <= 200; ++n) {
      const double phase = torus_phase(kReferencePhase, n, model.omega);
      for (int r = 0; r < l; ++r) {
        expected.push_back(
            eval_potential(model.potential.components[r], Complex(phase, 0.0)).real());
      }
    }
    std::sort(expected.begin(), expected.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      worst = std::max(worst, std::abs(eig.eigenvalues(static_cast<Eigen::Index>(i)) -
                                       expected[i]));
    }
    crit.check(worst <= 1e-12, fmt("eigenvalue mismatch %.3g > 1e-12", worst));

    const auto report = green::green_function(model, interval, kReferencePhase, 5.0);
    double off = 0.0;
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 200; ++j) {
        if (i != j) off = std::max(off, report.block_norms(i, j));
      }
    }
    crit.check(off == 0.0, fmt("off-diagonal Green block norm %.3g != 0", off));

    analysis::QuadratureSpec quad;
    quad.nodes = 128;  // the uncoupled integrand is analytic; midpoint is exact here
    const auto mld = analysis::mean_log_det(model, 5.0, 200, quad);
    crit.check(std::abs(mld.signed_margin) <= 2e-3,
               fmt("mean_log_det margin %.3g > 2e-3", std::abs(mld.signed_margin)));

    crit.check(crit.seconds() < 5.0, fmt("runtime %.2f s >= 5 s", crit.seconds()));
    crit.finish(fmt("worst eig err %.2g, margin %.2g", worst, std::abs(mld.signed_margin)));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_2_resolvent_residuals() {
  Criterion crit(2, "resolvent residuals at N=100");
  try {
    const auto model = reference_model(1e-3);
    const LatticeInterval interval{1, 100};
    std::mt19937_64 rng(202608);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst_residual = 0.0;
    int done = 0;
    while (done < 100) {
      const double x = unif(rng);
      const auto h0 = assemble_dirichlet(model, interval, x, 0.0);
      const auto eig = denselin::eigensolve_hermitian(h0);
      double energy = 0.0;
      if (done % 2 == 0) {
        // uniform over the padded spectral hull
        const double lo = eig.eigenvalues.minCoeff() - 1.0;
        const double hi = eig.eigenvalues.maxCoeff() + 1.0;
        do {
          energy = lo + (hi - lo) * unif(rng);
        } while (denselin::spectrum_distance(energy, eig.eigenvalues) < 1e-6);
      } else {
        // pinned just off an eigenvalue, down to the 1e-6 floor
        const auto idx = static_cast<Eigen::Index>(unif(rng) * eig.eigenvalues.size());
        const double offset = std::pow(10.0, -6.0 + 3.0 * unif(rng));
        energy = eig.eigenvalues(std::min(idx, eig.eigenvalues.size() - 1)) +
                 (unif(rng) < 0.5 ? -offset : offset);
        if (denselin::spectrum_distance(energy, eig.eigenvalues) < 1e-6) continue;
      }
      const auto report = green::green_function(model, interval, x, energy);
      worst_residual = std::max(worst_residual, report.residual);
      ++done;
    }
    crit.check(worst_residual <= 1e-8, fmt("worst residual %.3g > 1e-8", worst_residual));
    crit.check(crit.seconds() < 60.0, fmt("runtime %.2f s >= 60 s", crit.seconds()));
    crit.finish(fmt("worst residual %.2g over 100 draws", worst_residual));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_3_cramer_consistency() {
  Criterion crit(3, "Cramer/minor consistency at 20x20");
  try {
    const auto model = reference_model(1e-3);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> pick(0, 19);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 50; ++i) pairs.emplace_back(pick(rng), pick(rng));

    // operator instance: |N| = 10, l = 2 gives the 20x20 matrix
    const double disc_model =
        green::cramer_check(model, {1, 10}, unif(rng), 4.0 + unif(rng), pairs);
    crit.check(disc_model <= 1e-6, fmt("model-instance discrepancy %.3g > 1e-6", disc_model));

    double worst_random = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const auto a = oracles::random_hermitian(20, rng);
      worst_random = std::max(worst_random, green::cramer_check_matrix(a, pairs));
    }
    crit.check(worst_random <= 1e-6, fmt("random-matrix discrepancy %.3g > 1e-6", worst_random));
    crit.finish(fmt("discrepancies %.2g (model), %.2g (random)", disc_model, worst_random));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_4_harmonic_measure() {
  Criterion crit(4, "harmonic measure closed forms");
  try {
    const Complex i(0.0, 1.0);
    const double half = analysis::harmonic_measure_interval(i, -1.0, 1.0);
    const double quarter = analysis::harmonic_measure_interval(i, 0.0, 1.0);
    crit.check(std::abs(half - 0.5) <= 1e-12, fmt("mu(i,(-1,1)) err %.3g", std::abs(half - 0.5)));
    crit.check(std::abs(quarter - 0.25) <= 1e-12,
               fmt("mu(i,(0,1)) err %.3g", std::abs(quarter - 0.25)));

    const double rho = 1.0;
    const double y1 = 0.5 * rho;
    double worst = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const Complex z(0.05 * k, y1 * k / 21.0);
      const Complex w = std::exp(2.0 * std::numbers::pi / rho * z);
      const double direct = analysis::harmonic_measure_strip(z, analysis::StripPart::bottom, rho);
      const double composed = analysis::harmonic_measure_interval(
          w, 0.0, std::numeric_limits<double>::infinity());
      worst = std::max(worst, std::abs(direct - composed));
    }
    crit.check(worst <= 1e-10, fmt("strip vs conformal worst %.3g > 1e-10", worst));
    crit.finish(fmt("conformal agreement %.2g over 20 points", worst));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_5_torus_log_integral() {
  Criterion crit(5, "torus log integrals vs Jensen");
  try {
    PotentialSpec v;
    v.coeffs[1] = Complex(1.0, 0.0);
    v.coeffs[-1] = Complex(1.0, 0.0);
    v.strip_width = 1.0;
    // Jensen oracle: the root of z^2 - 5z + 1 outside the unit circle
    const double oracle5 = std::log(0.5 * (5.0 + std::sqrt(21.0)));
    const double at5 = analysis::torus_log_integral(v, 5.0);
    crit.check(std::abs(at5 - oracle5) <= 1e-6, fmt("E=5 err %.3g > 1e-6", std::abs(at5 - oracle5)));
    const double at0 = analysis::torus_log_integral(v, 0.0);
    crit.check(std::abs(at0) <= 1e-4, fmt("E=0 err %.3g > 1e-4", std::abs(at0)));
    crit.finish(fmt("E=5 err %.2g, E=0 err %.2g", std::abs(at5 - oracle5), std::abs(at0)));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_6_lojasiewicz() {
  Criterion crit(6, "Lojasiewicz measures and exponents");
  try {
    PotentialSpec v;
    v.coeffs[1] = Complex(1.0, 0.0);
    v.coeffs[-1] = Complex(1.0, 0.0);
    v.strip_width = 1.0;
    for (double eps : {0.01, 0.1}) {
      const double expected = 2.0 / std::numbers::pi * std::asin(0.5 * eps);
      const double got = analysis::lojasiewicz_measure(v, 0.0, eps);
      crit.check(std::abs(got - expected) <= 0.02 * expected,
                 fmt("measure at eps=%.2g off by %.3g relative", eps,
                     std::abs(got - expected) / expected));
    }
    const std::vector<double> eps_list{1e-3, 3.16e-3, 1e-2, 3.16e-2, 1e-1};
    const double sigma_simple = analysis::lojasiewicz_exponent_fit(v, 0.0, eps_list);
    const double sigma_tangent = analysis::lojasiewicz_exponent_fit(v, 2.0, eps_list);
    crit.check(std::abs(sigma_simple - 1.0) <= 0.1,
               fmt("sigma0 at E=0 is %.4f, want 1.0 +- 0.1", sigma_simple));
    crit.check(std::abs(sigma_tangent - 0.5) <= 0.1,
               fmt("sigma0 at E=2 is %.4f, want 0.5 +- 0.1", sigma_tangent));
    crit.finish(fmt("sigma0: %.3f (E=0), %.3f (E=2)", sigma_simple, sigma_tangent));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_7_denjoy_koksma() {
  Criterion crit(7, "Denjoy-Koksma growth exponent");
  try {
    const double omega = reference_model(0.0).omega;
    const auto cosine = [](double x) { return std::cos(2.0 * std::numbers::pi * x); };
    const auto fit = analysis::denjoy_koksma_exponent(cosine, kReferencePhase, omega, 100, 100000, 13);
    crit.check(fit.exponent <= 0.6, fmt("fitted exponent %.4f > 0.6", fit.exponent));
    crit.check(crit.seconds() < 30.0, fmt("runtime %.2f s >= 30 s", crit.seconds()));
    crit.finish(fmt("fitted exponent %.4f", fit.exponent));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_8_diophantine() {
  Criterion crit(8, "golden-mean Diophantine margins");
  try {
    const double golden = reference_model(0.0).omega;
    const double margin = dioph::dc_margin(golden, 1000000);
    // brute-force oracle in long double
    long double oracle = 1.0L;
    const auto w = static_cast<long double>(golden);
    for (std::int64_t k = 1; k <= 1000000; ++k) {
      long double f = std::fmod(k * w, 1.0L);
      if (f > 0.5L) f = 1.0L - f;
      const long double value = static_cast<long double>(k) * k * f;
      if (value < oracle) oracle = value;
    }
    crit.check(std::abs(margin - static_cast<double>(oracle)) <= 1e-9,
               fmt("margin %.9f disagrees with the brute-force oracle %.9f", margin,
                   static_cast<double>(oracle)));
    crit.check(std::abs(margin - 0.381966) <= 1e-6,
               fmt("margin %.9f, want 0.381966 +- 1e-6", margin));

    const auto cf = dioph::continued_fraction(golden, 30);
    bool all_ones = cf.partial_quotients.size() == 30;
    for (auto a : cf.partial_quotients) all_ones = all_ones && a == 1;
    crit.check(all_ones, "continued fraction of the golden mean is not all ones to depth 30");
    crit.finish(fmt("margin %.9f", margin));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_9_green_decay() {
  Criterion crit(9, "Green decay rates at N=100");
  try {
    const auto model = reference_model(1e-3);
    const LatticeInterval interval{1, 100};
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int ok = 0, done = 0, skipped = 0;
    while (done < 50) {
      const double x = unif(rng);
      const auto eig = denselin::eigensolve_hermitian(
          assemble_dirichlet(model, interval, x, 0.0));
      double energy;
      do {
        energy = -4.0 + 8.0 * unif(rng);
      } while (denselin::spectrum_distance(energy, eig.eigenvalues) < 0.05);
      try {
        const auto report = green::green_function(model, interval, x, energy);
        const double rate = green::decay_rate_fit(report);
        if (rate >= 0.8 * model.hopping.decay_rate) ++ok;
        ++done;
      } catch (const NumericalError&) {
        ++skipped;  // insufficient usable pairs: energy far outside, G underflows
        if (skipped > 50) throw;
      }
    }
    const double fraction = static_cast<double>(ok) / done;
    crit.check(fraction >= 0.9, fmt("only %.0f%% of samples reach 0.8 rho", 100.0 * fraction));
    crit.check(crit.seconds() < 600.0, fmt("runtime %.2f s >= 600 s", crit.seconds()));
    crit.finish(fmt("%.0f%% of 50 samples at rate >= 0.8 rho", 100.0 * fraction));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_10_ldt_trend() {
  Criterion crit(10, "large-deviation measures vs M");
  try {
    const auto model = reference_model(1e-3);
    const auto r = lab::ldt_bad_set(model, 0.5, 60, {10, 20, 40, 80}, 0.05, 2000, 20260810);
    bool decreasing = true;
    for (std::size_t i = 1; i < r.measures.size(); ++i) {
      if (!(r.measures[i].second < r.measures[i - 1].second)) decreasing = false;
    }
    crit.check(decreasing, "measures are not strictly decreasing in M");
    crit.check(r.measures.back().second < 0.05,
               fmt("measure at M=80 is %.4f, want < 0.05", r.measures.back().second));
    crit.check(r.decay_exponent > 0.0, fmt("fitted exponent %.4f <= 0", r.decay_exponent));
    crit.check(!r.unreliable, "more than 5% of evaluations were clipped");
    crit.finish(fmt("measures %.3f -> %.3f, a_fit %.3f", r.measures.front().second,
                    r.measures.back().second, r.decay_exponent));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_11_localization() {
  Criterion crit(11, "localization at N1=150");
  try {
    const auto model = reference_model(1e-2);
    const auto r = lab::localization_experiment(model, kReferencePhase, 150);
    std::size_t ok = 0, total = 0;
    for (std::size_t i = r.mid_lo; i < r.mid_hi; ++i) {
      ++total;
      if (r.rows[i].decay_rate >= r.rate_threshold && r.rows[i].participation <= 20.0) ++ok;
    }
    const double fraction = static_cast<double>(ok) / total;
    crit.check(fraction >= 0.95,
               fmt("only %.1f%% of mid-spectrum states localize", 100.0 * fraction));
    crit.check(crit.seconds() < 300.0, fmt("runtime %.2f s >= 300 s", crit.seconds()));
    crit.finish(fmt("%.1f%% of %g mid-spectrum states", 100.0 * fraction,
                    static_cast<double>(total)));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_12_mean_log_det_bounds() {
  Criterion crit(12, "mean log-det margins vs coupling");
  try {
    analysis::QuadratureSpec quad;
    quad.nodes = 256;
    std::vector<double> margins;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      const auto r = analysis::mean_log_det(reference_model(eps), 5.0, 40, quad);
      margins.push_back(r.lower_margin);
      crit.check(r.signed_margin > -1e-9,
                 fmt("signed margin %.3g at eps=%.0e is negative", r.signed_margin, eps));
      crit.check(r.upper_margin >= 0.0,
                 fmt("upper bound violated by %.3g at eps=%.0e", -r.upper_margin, eps));
      crit.check(!r.unreliable, "clipped fraction above 1%");
    }
    crit.check(margins[0] > margins[1] && margins[1] > margins[2],
               "margins are not monotone decreasing in eps");
    crit.check(margins[2] <= 1e-4, fmt("margin at eps=1e-4 is %.3g, not near zero", margins[2]));
    crit.finish(fmt("margins %.2g > %.2g > %.2g", margins[0], margins[1], margins[2]));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_13_minor_bound() {
  Criterion crit(13, "minor upper bound at N=30");
  try {
    const auto model = reference_model(1e-3);
    const auto r = lab::minor_bound_diagnostic(model, 5.0, 30, 25, 500, 0.1, 13);
    crit.check(r.worst_margin <= 0.0, fmt("worst margin %.4g > 0", r.worst_margin));
    crit.check(r.fitted_rate >= model.hopping.decay_rate - 0.2,
               fmt("fitted minor rate %.4f < rho - 0.2", r.fitted_rate));
    crit.check(r.rows.rows.size() == 500, "expected 500 sampled minors");
    crit.finish(fmt("worst margin %.3g, fitted rate %.3f", r.worst_margin, r.fitted_rate));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_14_paving() {
  Criterion crit(14, "paving at N=200, M=40");
  try {
    const auto model = reference_model(1e-3);
    green::GoodnessParams params{0.01, 0.1, model.hopping.decay_rate};
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    std::uniform_real_distribution<double> energy(3.8, 5.5);
    int conclusive = 0, confirmed = 0, draws = 0;
    while (conclusive < 20 && draws < 60) {
      ++draws;
      const auto verdict =
          green::paving_verify(model, phase(rng), energy(rng), {1, 200}, 40, params);
      if (!verdict.conclusive) continue;
      ++conclusive;
      if (verdict.conclusion_good) ++confirmed;
    }
    crit.check(conclusive == 20, fmt("only %g instances had both hypotheses hold",
                                     static_cast<double>(conclusive)));
    crit.check(confirmed == conclusive,
               fmt("conclusion failed on %g instances", static_cast<double>(conclusive - confirmed)));
    crit.finish(fmt("%g/%g confirmed", static_cast<double>(confirmed),
                    static_cast<double>(conclusive)));
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

void criterion_15_determinism() {
  Criterion crit(15, "sweep determinism");
  try {
    namespace fs = std::filesystem;
    for (const std::string task : {"lyap", "ldt"}) {
      lab::SweepConfig config;
      config.task = task;
      config.seed = 77;
      config.threads = 2;
      config.epsilons = {1e-2, 1e-3};
      config.epsilons_given = true;
      config.energies = {5.0, 0.5};
      config.energies_given = true;
      config.sizes = {10};
      config.sizes_given = true;
      config.quad.method = analysis::QuadratureSpec::Method::monte_carlo;
      config.quad.nodes = 200;
      config.ldt_samples = 60;
      config.ldt_m_list = {4, 8};

      config.output_dir = "acceptance_sweep_a";
      fs::remove_all(config.output_dir);
      const auto first = lab::sweep(config);
      config.output_dir = "acceptance_sweep_b";
      fs::remove_all(config.output_dir);
      const auto second = lab::sweep(config);

      bool identical = first.records.size() == second.records.size();
      for (std::size_t i = 0; identical && i < first.records.size(); ++i) {
        identical = first.records[i].scalars == second.records[i].scalars &&
                    first.records[i].config_hash == second.records[i].config_hash;
      }
      crit.check(identical, "rerun of task '" + task + "' changed some scalar bit pattern");
      crit.check(first.failures.empty() && second.failures.empty(),
                 "sweep reported point failures");
      fs::remove_all("acceptance_sweep_a");
      fs::remove_all("acceptance_sweep_b");
    }
    crit.finish("lyap + ldt sweeps reproduce bit-exactly");
  } catch (const std::exception& ex) {
    crit.fail_exception(ex);
  }
}

}  // namespace

int main() {
  std::printf("reference model: l=2, v1=2cos(2 pi x), v2=2cos(2 pi x)+cos(4 pi x), rho=1, "
              "W_k=e^{-k}B, omega=golden, x=%.2f\n", kReferencePhase);
  criterion_1_uncoupled_exactness();
  criterion_2_resolvent_residuals();
  criterion_3_cramer_consistency();
  criterion_4_harmonic_measure();
  criterion_5_torus_log_integral();
  criterion_6_lojasiewicz();
  criterion_7_denjoy_koksma();
  criterion_8_diophantine();
  criterion_9_green_decay();
  criterion_10_ldt_trend();
  criterion_11_localization();
  criterion_12_mean_log_det_bounds();
  criterion_13_minor_bound();
  criterion_14_paving();
  criterion_15_determinism();
  if (failures == 0) {
    std::printf("all 15 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", failures);
  return 1;
}
