#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qplab/denselin.hpp"
#include "qplab/errors.hpp"
#include "qplab/green.hpp"
#include "qplab/operator.hpp"
#include "qplab/torus.hpp"

using namespace qplab;
using green::GoodnessParams;
using green::GreenReport;

namespace {

GreenReport synthetic_report(std::int64_t sites, const std::function<double(std::int64_t)>& decay) {
  GreenReport report;
  report.interval = {1, sites};
  report.block_size = 1;
  report.block_norms.resize(sites, sites);
  for (std::int64_t i = 0; i < sites; ++i) {
    for (std::int64_t j = 0; j < sites; ++j) {
      report.block_norms(i, j) = decay(std::llabs(i - j));
    }
  }
  return report;
}

}  // namespace

TEST_CASE("green_function at zero coupling is exactly diagonal") {
  const auto m = reference_model(0.0);
  const double x = 0.34, E = 5.0;
  const auto report = green::green_function(m, {1, 12}, x, E);
  const int l = m.block_size();
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      if (i == j) continue;
      CHECK(report.block_norms(i, j) == 0.0);
    }
  }
  for (int i = 0; i < 12; ++i) {
    const double phase = torus_phase(x, i + 1, m.omega);
    for (int r = 0; r < l; ++r) {
      const double diag =
          eval_potential(m.potential.components[r], Complex(phase, 0.0)).real() - E;
      CHECK(std::abs(report.blocks(i * l + r, i * l + r) - Complex(1.0 / diag, 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("single-site Green is the scalar reciprocal") {
  const auto m = reference_model(0.0);
  const double x = 0.2, E = 4.0;
  const auto report = green::green_function(m, {1, 1}, x, E);
  const double v0 =
      eval_potential(m.potential.components[0], Complex(torus_phase(x, 1, m.omega), 0.0)).real();
  CHECK(std::abs(report.blocks(0, 0) - Complex(1.0 / (v0 - E), 0.0)) < 1e-14);
}

TEST_CASE("green_function matches the spectral inverse") {
  const auto m = reference_model(5e-3, 40);
  const LatticeInterval interval{1, 8};
  const double x = 0.41, E = 4.2;
  const auto report = green::green_function(m, interval, x, E);
  const auto h = assemble_dirichlet(m, interval, x, E);
  const auto eig = denselin::eigensolve_hermitian(h);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    expected += eig.eigenvectors.col(i) * eig.eigenvectors.col(i).adjoint() / eig.eigenvalues(i);
  }
  CHECK((report.blocks - expected).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(report.residual <= 1e-8);
}

TEST_CASE("near-singular energies are refused with the distance attached") {
  const auto m = reference_model(0.0);
  const double x = 0.34;
  const double E =
      eval_potential(m.potential.components[0], Complex(torus_phase(x, 3, m.omega), 0.0)).real();
  try {
    green::green_function(m, {1, 10}, x, E + 1e-13);
    FAIL("expected refusal");
  } catch (const NearSingularError& ex) {
    CHECK(ex.spectrum_distance >= 0.0);
    CHECK(ex.spectrum_distance < 1e-9);
  }
}

TEST_CASE("goodness thresholds follow the plug-in formula") {
  GoodnessParams params{0.01, 0.1, 1.0};
  // |N| = 100, |n-n'| = 10: threshold e^{-(10-1)*0.9}
  CHECK(params.log_threshold(10, 100) == doctest::Approx(-8.1));
  auto report = synthetic_report(100, [](std::int64_t d) { return std::exp(-1.0 * d); });
  // e^{-d} <= e^{-(d-1)*0.9} for all d <= 99: good
  CHECK(green::classify_good(report, params).good);

  // near-diagonal pairs always pass: bounded blocks under a threshold >= 1
  auto bounded = synthetic_report(100, [](std::int64_t d) { return d == 0 ? 1.0 : 1e-300; });
  CHECK(green::classify_good(bounded, params).good);

  // a single violating pair flips the verdict and is reported
  auto bad = synthetic_report(100, [](std::int64_t d) { return std::exp(-1.0 * d); });
  bad.block_norms(0, 50) = 1.0;
  const auto verdict = green::classify_good(bad, params);
  CHECK_FALSE(verdict.good);
  CHECK(verdict.worst_pair.first == 0);
  CHECK(verdict.worst_pair.second == 50);
  CHECK(verdict.worst_margin == doctest::Approx((50.0 - 1.0) * 0.9));
}

TEST_CASE("goodness parameter validation") {
  CHECK_THROWS_AS(green::classify_good(synthetic_report(10, [](std::int64_t) { return 0.0; }),
                                       GoodnessParams{0.01, 1.0, 1.0}),
                  ValidationError);
  CHECK_THROWS_AS(green::classify_good(synthetic_report(10, [](std::int64_t) { return 0.0; }),
                                       GoodnessParams{0.0, 0.1, 1.0}),
                  ValidationError);
}

TEST_CASE("decay_rate_fit on synthetic exponentials") {
  const auto e_report = synthetic_report(60, [](std::int64_t d) { return std::exp(-1.0 * d); });
  CHECK(green::decay_rate_fit(e_report) == doctest::Approx(1.0).epsilon(1e-9));
  const auto two_report = synthetic_report(60, [](std::int64_t d) { return std::pow(2.0, -static_cast<double>(d)); });
  CHECK(green::decay_rate_fit(two_report) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  // everything below the usable floor: insufficient data
  auto floor_report = synthetic_report(60, [](std::int64_t d) { return d > 6 ? 0.0 : 1.0; });
  CHECK_THROWS_AS(green::decay_rate_fit(floor_report), InsufficientDataError);
  CHECK_THROWS_AS(green::decay_rate_fit(synthetic_report(8, [](std::int64_t) { return 1.0; })),
                  ValidationError);
}

TEST_CASE("full-pipeline decay rate lands near rho when nothing is truncated") {
  const auto m = reference_model(1e-3, 250);
  const LatticeInterval interval{1, 100};
  const double x = 0.34;
  // pick E in the widest spectral gap inside [-2, 2]
  const auto eig = denselin::eigensolve_hermitian(assemble_dirichlet(m, interval, x, 0.0));
  double best_e = 0.0, best_gap = 0.0;
  for (Eigen::Index i = 0; i + 1 < eig.eigenvalues.size(); ++i) {
    const double lo = eig.eigenvalues(i), hi = eig.eigenvalues(i + 1);
    if (lo < -2.0 || hi > 2.0) continue;
    if (hi - lo > best_gap) {
      best_gap = hi - lo;
      best_e = 0.5 * (lo + hi);
    }
  }
  REQUIRE(best_gap > 1e-3);
  // assemble tolerance far below the smallest stored block: no cut inside the volume
  const auto report = green::green_function(m, interval, x, best_e, 1e-250);
  const double rate = green::decay_rate_fit(report);
  CHECK(rate >= 0.8);
  CHECK(rate <= 1.1);
}

TEST_CASE("cramer check on closed-form cases") {
  CHECK(green::cramer_check_matrix(Eigen::MatrixXcd::Identity(3, 3), {{0, 0}, {1, 1}}) <= 1e-15);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 3.0;
  // inverse(0,0) = 1/2 equals minor(0,0)/det = 3/6
  CHECK(green::cramer_check_matrix(d, {{0, 0}, {1, 1}}) <= 1e-15);
}

TEST_CASE("cramer check on random Hermitian matrices") {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> pick(0, 19);
  const auto a = oracles::random_hermitian(20, rng) +
                 Complex(0.0, 0.0) * Eigen::MatrixXcd::Identity(20, 20);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 50; ++i) pairs.emplace_back(pick(rng), pick(rng));
  CHECK(green::cramer_check_matrix(a, pairs) <= 1e-6);
}

TEST_CASE("scalar-entry goodness follows the block form up to a C(l) factor") {
  // block criterion passed => every scalar entry obeys the same threshold with
  // C = l, since |G_(a,a')| <= ||G block|| <= sqrt(l) ||G block||
  const auto m = reference_model(1e-3, 120);
  const LatticeInterval interval{1, 40};
  const double x = 0.34, E = 4.6;
  const auto report = green::green_function(m, interval, x, E);
  GoodnessParams params{0.01, 0.1, 1.0};
  REQUIRE(green::classify_good(report, params).good);
  const int l = m.block_size();
  const double c_l = l;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 40; ++j) {
      const double threshold = c_l * std::exp(params.log_threshold(std::abs(i - j), 40));
      for (int r = 0; r < l; ++r) {
        for (int rr = 0; rr < l; ++rr) {
          CHECK(std::abs(report.blocks(i * l + r, j * l + rr)) <= threshold);
        }
      }
    }
  }
}

TEST_CASE("covariance of block norms under translation") {
  const auto m = reference_model(2e-3, 60);
  const LatticeInterval interval{1, 20};
  const double x = 0.27, E = 4.3;
  for (std::int64_t j : {1LL, 5LL, -7LL}) {
    const auto lhs = green::green_function(m, interval, torus_phase(x, j, m.omega), E);
    const auto rhs = green::green_function(m, interval.shifted(j), x, E);
    CHECK((lhs.block_norms - rhs.block_norms).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("Hermitian symmetry of block norms at real energy") {
  const auto m = reference_model(5e-3, 60);
  const auto report = green::green_function(m, {1, 24}, 0.34, 4.1);
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < i; ++j) {
      CHECK(std::abs(report.block_norms(i, j) - report.block_norms(j, i)) <= 1e-10);
    }
  }
}

TEST_CASE("first-order smallness of off-diagonal blocks as eps -> 0") {
  // E at distance d >= 1 from every diagonal value; the one-hop term dominates
  const double E = 5.0;
  for (double eps : {1e-4, 1e-5}) {
    const auto m = reference_model(eps, 60);
    const auto report = green::green_function(m, {1, 16}, 0.34, E);
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 16; ++i) {
      for (int r = 0; r < 2; ++r) {
        const double v = eval_potential(m.potential.components[r],
                                        Complex(torus_phase(0.34, i + 1, m.omega), 0.0))
                             .real();
        d = std::min(d, std::abs(v - E));
      }
    }
    REQUIRE(d >= 1.0);
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        if (i == j) continue;
        const double bound = 2.0 * eps * std::exp(-1.0 * std::abs(i - j)) / (d * d);
        CHECK(report.block_norms(i, j) <= bound);
      }
    }
  }
}

TEST_CASE("paving coverage arithmetic on [1,100] with M=20") {
  const auto m = reference_model(0.0);
  GoodnessParams params{0.01, 0.1, 1.0};
  const auto verdict = green::paving_verify(m, 0.34, 5.0, {1, 100}, 20, params);
  CHECK(verdict.coverage_ok);
  CHECK(verdict.all_subintervals_good);
  CHECK(verdict.hypotheses_hold);
  CHECK(verdict.conclusion_good);
  CHECK(verdict.conclusive);
}

TEST_CASE("paving at small coupling outside the spectrum") {
  const auto m = reference_model(1e-3, 120);
  GoodnessParams params{0.01, 0.1, 1.0};
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  std::uniform_real_distribution<double> energy(4.0, 5.5);
  int confirmed = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto verdict =
        green::paving_verify(m, phase(rng), energy(rng), {1, 100}, 24, params);
    if (verdict.conclusive) {
      CHECK(verdict.conclusion_good);
      ++confirmed;
    }
  }
  CHECK(confirmed == 5);
}

TEST_CASE("paving rejects oversized subintervals") {
  const auto m = reference_model(0.0);
  GoodnessParams params{0.01, 0.1, 1.0};
  CHECK_THROWS_AS(green::paving_verify(m, 0.3, 5.0, {1, 40}, 20, params), ValidationError);
}

TEST_CASE("batch evaluation is input-ordered regardless of threads") {
  const auto m = reference_model(1e-3, 60);
  const double near_eigenvalue =
      denselin::eigensolve_hermitian(assemble_dirichlet(m, {1, 10}, 0.3, 0.0)).eigenvalues(5);
  std::vector<std::pair<double, double>> tasks = {
      {0.11, 4.2}, {0.3, near_eigenvalue + 1e-13}, {0.57, 4.9}, {0.91, 3.9}};
  const auto serial = green::green_function_batch(m, {1, 10}, tasks, 1);
  const auto parallel = green::green_function_batch(m, {1, 10}, tasks, 4);
  REQUIRE(serial.size() == 4);
  CHECK_FALSE(serial[1].ok);  // the pinned near-eigenvalue task is refused
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(serial[i].ok == parallel[i].ok);
    if (serial[i].ok) {
      CHECK((serial[i].report.block_norms - parallel[i].report.block_norms)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("report serializes to JSON with flat block norms") {
  const auto m = reference_model(0.0);
  auto report = green::green_function(m, {1, 4}, 0.34, 5.0);
  green::apply_goodness(report, GoodnessParams{0.01, 0.1, 1.0});
  const auto text = report.to_json();
  CHECK(text.find("\"schema\": \"qplab.green/1\"") != std::string::npos);
  CHECK(text.find("block_norms") != std::string::npos);
  CHECK(text.find("worst_pair") != std::string::npos);
}
