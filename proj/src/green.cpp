#include "qplab/green.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qplab/denselin.hpp"
#include "qplab/errors.hpp"

namespace qplab::green {

void GoodnessParams::validate() const {
  if (!(margin_fraction > 0.0 && margin_fraction < 1.0)) {
    throw ValidationError("goodness margin_fraction must lie in (0,1)");
  }
  if (rate_slack < 0.0) throw ValidationError("goodness rate_slack must be >= 0");
  if (!(rho - rate_slack > 0.0)) {
    throw ValidationError("goodness needs rho - rate_slack > 0");
  }
}

std::string GreenReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "qplab.green/1";
  j["interval"] = {interval.a, interval.b};
  j["block_size"] = block_size;
  j["x"] = x;
  j["E"] = E;
  j["residual"] = residual;
  j["dist_to_spectrum"] = dist_to_spectrum;
  j["good"] = good;
  j["worst_pair"] = {worst_pair.first, worst_pair.second};
  j["worst_margin"] = worst_margin;
  if (std::isfinite(fitted_decay_rate)) j["fitted_decay_rate"] = fitted_decay_rate;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(block_norms.size()));
  for (Eigen::Index r = 0; r < block_norms.rows(); ++r) {
    for (Eigen::Index c = 0; c < block_norms.cols(); ++c) flat.push_back(block_norms(r, c));
  }
  j["block_norms"] = flat;
  return j.dump(2);
}

GreenReport green_function(const OperatorModel& model, const LatticeInterval& interval, double x,
                           double E, double assemble_tol) {
  const int l = model.block_size();
  const auto n_sites = static_cast<int>(interval.length());
  const Eigen::MatrixXcd h = assemble_dirichlet(model, interval, x, E, assemble_tol);

  // H already carries -E; dist(E, spec(H_N)) = |closest eigenvalue of h to 0|
  const auto eig = denselin::eigensolve_hermitian(h);
  const double dist = denselin::spectrum_distance(0.0, eig.eigenvalues);
  const double h_norm = eig.eigenvalues.cwiseAbs().maxCoeff();
  if (dist < 1e-9 * std::max(1.0, h_norm)) {
    std::ostringstream os;
    os << "refusing inversion at dist(E, spec) = " << dist;
    throw NearSingularError(os.str(), dist);
  }

  GreenReport report;
  report.interval = interval;
  report.block_size = l;
  report.x = x;
  report.E = E;
  report.dist_to_spectrum = dist;
  report.blocks = denselin::refined_inverse(h);
  report.residual = (h * report.blocks - Eigen::MatrixXcd::Identity(h.rows(), h.cols()))
                        .cwiseAbs()
                        .maxCoeff();
  if (report.residual > 1e-8) {
    std::ostringstream os;
    os << "resolvent residual " << report.residual << " above 1e-8 at dist " << dist;
    throw NearSingularError(os.str(), dist);
  }

  report.block_norms.resize(n_sites, n_sites);
  for (int i = 0; i < n_sites; ++i) {
    for (int j = 0; j < n_sites; ++j) {
      report.block_norms(i, j) = report.blocks.block(i * l, j * l, l, l).operatorNorm();
    }
  }
  return report;
}

std::vector<BatchEntry> green_function_batch(const OperatorModel& model,
                                             const LatticeInterval& interval,
                                             const std::vector<std::pair<double, double>>& tasks,
                                             int threads, double assemble_tol) {
  std::vector<BatchEntry> out(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        out[i].report = green_function(model, interval, tasks[i].first, tasks[i].second,
                                       assemble_tol);
        out[i].ok = true;
      } catch (const std::exception& ex) {
        out[i].error = ex.what();
      }
    }
  };
  const int n = std::max(1, threads);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

ClassifyResult classify_good(const GreenReport& report, const GoodnessParams& params) {
  params.validate();
  ClassifyResult out;
  out.good = true;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  const std::int64_t len = report.interval.length();
  for (Eigen::Index i = 0; i < report.block_norms.rows(); ++i) {
    for (Eigen::Index j = 0; j < report.block_norms.cols(); ++j) {
      const double log_threshold = params.log_threshold(std::llabs(i - j), len);
      const double norm = report.block_norms(i, j);
      const double log_norm = norm > 0.0 ? std::log(norm) : -std::numeric_limits<double>::infinity();
      const double margin = log_norm - log_threshold;
      if (margin > out.worst_margin) {
        out.worst_margin = margin;
        out.worst_pair = {static_cast<int>(i), static_cast<int>(j)};
      }
      if (margin > 0.0) out.good = false;
    }
  }
  return out;
}

void apply_goodness(GreenReport& report, const GoodnessParams& params) {
  const ClassifyResult r = classify_good(report, params);
  report.good = r.good;
  report.worst_margin = r.worst_margin;
  report.worst_pair = r.worst_pair;
}

double decay_rate_fit(const GreenReport& report) {
  const std::int64_t len = report.interval.length();
  if (len < 10) throw ValidationError("decay_rate_fit needs an interval of length >= 10");
  const double min_dist = static_cast<double>(len) / 10.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::int64_t count = 0;
  for (Eigen::Index i = 0; i < report.block_norms.rows(); ++i) {
    for (Eigen::Index j = 0; j < report.block_norms.cols(); ++j) {
      const auto d = static_cast<double>(std::llabs(i - j));
      if (d <= min_dist) continue;
      const double norm = report.block_norms(i, j);
      if (!(norm > 1e-280)) continue;
      const double y = -std::log(norm);
      sx += d;
      sy += y;
      sxx += d * d;
      sxy += d * y;
      ++count;
    }
  }
  if (count < 5) {
    throw InsufficientDataError("decay_rate_fit: fewer than 5 usable block pairs");
  }
  const double n = static_cast<double>(count);
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) throw InsufficientDataError("decay_rate_fit: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

double cramer_check_matrix(const Eigen::MatrixXcd& matrix,
                           const std::vector<std::pair<int, int>>& pairs) {
  const Eigen::MatrixXcd inv = denselin::refined_inverse(matrix);
  const denselin::LogDetResult det = denselin::log_abs_det(matrix);
  if (det.singular) throw NearSingularError("cramer_check on a singular matrix");
  double worst = 0.0;
  for (const auto& [a, ap] : pairs) {
    const denselin::LogDetResult mu = denselin::minor_logdet(matrix, ap, a);
    const double sign = ((a + ap) % 2 == 0) ? 1.0 : -1.0;
    Complex adjugate_entry;
    if (mu.singular) {
      adjugate_entry = Complex(0.0, 0.0);
    } else {
      adjugate_entry = sign * mu.phase * std::exp(mu.log_abs - det.log_abs) / det.phase;
    }
    const Complex direct = inv(a, ap);
    const double scale = std::max({std::abs(direct), std::abs(adjugate_entry), 1e-30});
    worst = std::max(worst, std::abs(direct - adjugate_entry) / scale);
  }
  return worst;
}

double cramer_check(const OperatorModel& model, const LatticeInterval& interval, double x,
                    double E, const std::vector<std::pair<int, int>>& pairs) {
  return cramer_check_matrix(assemble_dirichlet(model, interval, x, E), pairs);
}

PavingVerdict paving_verify(const OperatorModel& model, double x, double E,
                            const LatticeInterval& big, std::int64_t small_length,
                            const GoodnessParams& params) {
  params.validate();
  if (small_length > big.length() / 4) {
    throw ValidationError("paving needs M <= |N|/4");
  }
  const std::int64_t step = std::max<std::int64_t>(1, small_length / 4);
  const std::int64_t quarter = small_length / 4;

  std::vector<LatticeInterval> subs;
  for (std::int64_t a = big.a; a + small_length - 1 <= big.b; a += step) {
    subs.push_back({a, a + small_length - 1});
  }
  if (!subs.empty() && subs.back().b != big.b) {
    subs.push_back({big.b - small_length + 1, big.b});
  }

  PavingVerdict verdict;
  // hypothesis (i): each site's M/4-neighborhood, clipped to N, sits inside one subinterval
  verdict.coverage_ok = true;
  for (std::int64_t k = big.a; k <= big.b; ++k) {
    const std::int64_t lo = std::max(big.a, k - quarter);
    const std::int64_t hi = std::min(big.b, k + quarter);
    bool covered = false;
    for (const auto& sub : subs) {
      if (sub.a <= lo && hi <= sub.b) {
        covered = true;
        break;
      }
    }
    if (!covered) {
      verdict.coverage_ok = false;
      break;
    }
  }

  // hypothesis (ii): each subinterval Green is good
  verdict.all_subintervals_good = true;
  for (const auto& sub : subs) {
    bool good = false;
    try {
      const GreenReport sub_report = green_function(model, sub, x, E);
      good = classify_good(sub_report, params).good;
    } catch (const NearSingularError&) {
      good = false;
    }
    if (!good) {
      verdict.all_subintervals_good = false;
      verdict.bad_subinterval_starts.push_back(sub.a);
    }
  }

  verdict.hypotheses_hold = verdict.coverage_ok && verdict.all_subintervals_good;
  verdict.conclusive = verdict.hypotheses_hold;

  const GreenReport big_report = green_function(model, big, x, E);
  const ClassifyResult big_class = classify_good(big_report, params);
  verdict.conclusion_good = big_class.good;
  verdict.big_worst_margin = big_class.worst_margin;
  return verdict;
}

}  // namespace qplab::green
