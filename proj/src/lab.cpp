#include "qplab/lab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qplab/denselin.hpp"
#include "qplab/errors.hpp"
#include "qplab/torus.hpp"

namespace qplab::lab {

namespace {

struct LinearFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
};

LinearFit least_squares(const std::vector<std::pair<double, double>>& pts) {
  LinearFit fit;
  fit.points = static_cast<int>(pts.size());
  if (pts.size() < 2) return fit;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string RunRecord::to_json() const {
  nlohmann::json j;
  j["schema"] = "qplab.run/1";
  j["task"] = task;
  j["config_hash"] = config_hash;
  j["created"] = created;
  j["inputs"] = inputs;
  j["scalars"] = scalars;
  nlohmann::json tabs = nlohmann::json::object();
  for (const auto& [name, table] : tables) {
    tabs[name] = {{"columns", table.columns}, {"rows", table.rows}};
  }
  j["tables"] = tabs;
  return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunRecord rec;
  rec.task = j.value("task", "");
  rec.config_hash = j.value("config_hash", "");
  rec.created = j.value("created", "");
  if (j.contains("inputs")) rec.inputs = j["inputs"].get<std::map<std::string, double>>();
  if (j.contains("scalars")) rec.scalars = j["scalars"].get<std::map<std::string, double>>();
  if (j.contains("tables")) {
    for (const auto& [name, tj] : j["tables"].items()) {
      Table t;
      t.columns = tj["columns"].get<std::vector<std::string>>();
      t.rows = tj["rows"].get<std::vector<std::vector<double>>>();
      rec.tables[name] = std::move(t);
    }
  }
  return rec;
}

std::uint64_t stable_hash64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t global, std::uint64_t index) {
  std::uint64_t z = global + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

LdtResult ldt_bad_set(const OperatorModel& model, double E, std::int64_t n_sites,
                      const std::vector<int>& m_list, double margin, int samples,
                      std::uint64_t seed, double clip) {
  if (n_sites < 4) throw ValidationError("ldt_bad_set needs N >= 4");
  if (m_list.empty()) throw ValidationError("ldt_bad_set needs a nonempty M list");
  if (samples < 1) throw ValidationError("ldt_bad_set needs samples >= 1");
  std::vector<int> ms = m_list;
  std::sort(ms.begin(), ms.end());
  if (ms.front() < 1) throw ValidationError("ldt_bad_set needs M >= 1");

  LdtResult out;
  for (const auto& v : model.potential.components) {
    out.potential_sum += analysis::torus_log_integral(v, E);
  }
  const double threshold = out.potential_sum - margin;
  const double floor_log = std::log(clip);
  const LatticeInterval interval{1, n_sites};
  const int max_m = ms.back();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int64_t> bad_counts(ms.size(), 0);
  std::int64_t clipped = 0;

  for (int s = 0; s < samples; ++s) {
    const double x = unif(rng);
    double sum = 0.0, comp = 0.0;
    std::size_t mi = 0;
    for (int j = 0; j < max_m && mi < ms.size(); ++j) {
      const double phase = torus_phase(x, j, model.omega);
      const auto det = denselin::log_abs_det(assemble_dirichlet(model, interval, phase, E));
      double u = det.singular ? -std::numeric_limits<double>::infinity()
                              : det.log_abs / static_cast<double>(n_sites);
      if (!(u > floor_log)) {
        u = floor_log;
        ++clipped;
      }
      const double y = u - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
      while (mi < ms.size() && j + 1 == ms[mi]) {
        if (sum / ms[mi] <= threshold) ++bad_counts[mi];
        ++mi;
      }
    }
  }

  std::vector<std::pair<double, double>> fit_pts;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const double p = static_cast<double>(bad_counts[i]) / samples;
    out.measures.emplace_back(ms[i], p);
    if (p > 0.0 && p < 1.0) {
      fit_pts.emplace_back(std::log(static_cast<double>(ms[i])), std::log(-std::log(p)));
    }
  }
  const LinearFit fit = least_squares(fit_pts);
  if (fit.points >= 2) {
    out.decay_exponent = fit.slope;
    out.decay_scale = std::exp(fit.intercept);
  }
  const auto total = static_cast<std::int64_t>(samples) * max_m;
  out.clipped_fraction = total > 0 ? static_cast<double>(clipped) / total : 0.0;
  out.unreliable = out.clipped_fraction > 0.05;
  return out;
}

// ---------------------------------------------------------------------------

GoodPhaseScan good_phase_scan(const OperatorModel& model, double E, std::int64_t n_sites,
                              double x, std::int64_t horizon,
                              const green::GoodnessParams& goodness) {
  if (horizon < 0) horizon = n_sites * n_sites;
  if (horizon < 1) throw ValidationError("good_phase_scan needs horizon >= 1");
  if (horizon > 1'000'000) throw ValidationError("good_phase_scan horizon is capped at 1e6");
  GoodPhaseScan out;
  const LatticeInterval interval{1, n_sites};
  std::int64_t run = 0;
  std::int64_t prev_bad = -2;
  for (std::int64_t n = 0; n < horizon; ++n) {
    const double phase = torus_phase(x, n, model.omega);
    bool bad = false;
    try {
      const auto report = green::green_function(model, interval, phase, E);
      bad = !green::classify_good(report, goodness).good;
    } catch (const NearSingularError&) {
      out.skipped_positions.push_back(n);
      run = 0;
      prev_bad = -2;
      continue;
    }
    if (bad) {
      out.bad_positions.push_back(n);
      run = (n == prev_bad + 1) ? run + 1 : 1;
      prev_bad = n;
      out.longest_bad_run = std::max(out.longest_bad_run, run);
    }
  }
  out.bad_count = static_cast<std::int64_t>(out.bad_positions.size());
  return out;
}

// ---------------------------------------------------------------------------

EigenstateRow analyze_site_profile(const Eigen::VectorXd& site_norms, std::int64_t first_site,
                                   const FitWindow& window) {
  EigenstateRow row;
  Eigen::Index center_idx = 0;
  site_norms.maxCoeff(&center_idx);
  row.center = first_site + center_idx;

  const double s2 = site_norms.squaredNorm();
  const double s4 = site_norms.array().pow(4).sum();
  row.participation = s2 * s2 / std::max(s4, 1e-300);

  std::vector<std::pair<double, double>> pts;
  std::int64_t mass_sites = 0;
  for (Eigen::Index i = 0; i < site_norms.size(); ++i) {
    const double s = site_norms(i);
    if (s > window.norm_floor) ++mass_sites;
    const std::int64_t d = std::llabs(i - center_idx);
    if (d >= window.min_site_dist && s > window.norm_floor) {
      pts.emplace_back(static_cast<double>(d), -std::log(s));
    }
  }
  if (mass_sites <= 3 || pts.size() < 5) {
    row.capped = true;
    row.decay_rate = window.rate_cap;
  } else {
    row.decay_rate = least_squares(pts).slope;
  }
  return row;
}

LocalizationResult localization_experiment(const OperatorModel& model, double x, std::int64_t n1,
                                           const FitWindow& window) {
  const int l = model.block_size();
  const std::int64_t sites = 2 * n1 + 1;
  if (sites * l > 3000) {
    throw ValidationError("localization_experiment: (2 N1 + 1) l must stay <= 3000");
  }
  const LatticeInterval interval{-n1, n1};
  const auto eig =
      denselin::eigensolve_hermitian(assemble_dirichlet(model, interval, x, 0.0));

  LocalizationResult out;
  out.rate_threshold = model.hopping.decay_rate / 3.0;
  const auto m = static_cast<std::size_t>(eig.eigenvalues.size());
  out.rows.reserve(m);

  for (std::size_t col = 0; col < m; ++col) {
    Eigen::VectorXd site_norms(sites);
    for (std::int64_t i = 0; i < sites; ++i) {
      site_norms(i) =
          eig.eigenvectors.col(static_cast<Eigen::Index>(col)).segment(i * l, l).norm();
    }
    EigenstateRow row = analyze_site_profile(site_norms, interval.a, window);
    row.energy = eig.eigenvalues(static_cast<Eigen::Index>(col));
    out.rows.push_back(row);
  }

  out.mid_lo = m / 10;
  out.mid_hi = m - m / 10;
  std::size_t ok = 0;
  for (std::size_t i = out.mid_lo; i < out.mid_hi; ++i) {
    if (out.rows[i].decay_rate >= out.rate_threshold) ++ok;
  }
  out.mid_fraction_rate_ok =
      out.mid_hi > out.mid_lo ? static_cast<double>(ok) / (out.mid_hi - out.mid_lo) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

IdentityCheck extended_state_identity_check(const OperatorModel& model,
                                            const LatticeInterval& inner,
                                            const LatticeInterval& outer, double x, double E,
                                            const Eigen::VectorXcd& psi, double tol) {
  const int l = model.block_size();
  const int k_eff = std::min(hopping_truncation_radius(model.hopping, tol).k_max,
                             model.hopping.max_stored_range());
  if (inner.a - outer.a < k_eff || outer.b - inner.b < k_eff) {
    throw ValidationError(
        "extended_state_identity_check: inner interval needs a margin of at least the hopping "
        "truncation radius inside the outer one");
  }
  if (psi.size() != outer.length() * l) {
    throw ValidationError("extended_state_identity_check: eigenvector length mismatch");
  }

  IdentityCheck out;
  const Eigen::MatrixXcd h_in = assemble_dirichlet(model, inner, x, E, tol);
  const auto eig = denselin::eigensolve_hermitian(h_in);
  out.dist_to_spectrum = denselin::spectrum_distance(0.0, eig.eigenvalues);
  const double h_scale = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
  if (out.dist_to_spectrum < 1e-9 * h_scale) {
    out.skipped = true;
    return out;
  }

  const auto inner_sites = static_cast<int>(inner.length());
  Eigen::VectorXcd coupling = Eigen::VectorXcd::Zero(inner_sites * l);
  for (int i = 0; i < inner_sites; ++i) {
    const std::int64_t site = inner.a + i;
    for (std::int64_t k_site = site - k_eff; k_site <= site + k_eff; ++k_site) {
      if (inner.contains(k_site) || !outer.contains(k_site)) continue;
      const auto d = static_cast<int>(site - k_site);
      const Eigen::VectorXcd psi_k =
          psi.segment((k_site - outer.a) * l, l);
      coupling.segment(i * l, l) += model.epsilon * (model.hopping.block(d, l) * psi_k);
    }
  }

  const Eigen::VectorXcd rhs = -denselin::solve(h_in, coupling);
  double worst = 0.0;
  double psi_sup = 0.0;
  for (Eigen::Index i = 0; i < psi.size() / l; ++i) {
    psi_sup = std::max(psi_sup, psi.segment(i * l, l).norm());
  }
  for (int i = 0; i < inner_sites; ++i) {
    const std::int64_t site = inner.a + i;
    const Eigen::VectorXcd lhs = psi.segment((site - outer.a) * l, l);
    worst = std::max(worst, (lhs - rhs.segment(i * l, l)).norm());
  }
  out.max_block_residual = worst;

  const double rho = model.hopping.decay_rate;
  const double tail = 2.0 * model.hopping.decay_amp * std::exp(-rho * (k_eff + 1)) /
                      (1.0 - std::exp(-rho));
  out.truncation_bound = model.epsilon * tail * psi_sup *
                         static_cast<double>(inner_sites) * l / out.dist_to_spectrum;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<EigDistRow> eigenvalue_distance_experiment(const OperatorModel& model, double x,
                                                       const std::vector<std::int64_t>& n_list,
                                                       std::int64_t rule_multiplier,
                                                       int proxy_count) {
  if (n_list.empty()) throw ValidationError("eigenvalue_distance_experiment needs sizes");
  if (proxy_count < 1) throw ValidationError("eigenvalue_distance_experiment needs proxies");
  const std::int64_t n_max = *std::max_element(n_list.begin(), n_list.end());
  const std::int64_t big = 2 * rule_multiplier * n_max;
  const int l = model.block_size();
  if ((2 * big + 1) * l > 3000) {
    throw ValidationError("eigenvalue_distance_experiment: proxy volume too large");
  }

  const auto proxy_eig = denselin::eigensolve_hermitian(
      assemble_dirichlet(model, {-big, big}, x, 0.0));
  const auto total = static_cast<std::int64_t>(proxy_eig.eigenvalues.size());
  std::vector<double> proxies;
  const std::int64_t band_lo = total / 4;
  const std::int64_t band_hi = total - total / 4;
  for (int i = 0; i < proxy_count; ++i) {
    const std::int64_t idx =
        band_lo + (band_hi - band_lo - 1) * static_cast<std::int64_t>(i) /
                      std::max(1, proxy_count - 1);
    proxies.push_back(proxy_eig.eigenvalues(idx));
  }

  std::vector<EigDistRow> rows;
  for (std::int64_t n : n_list) {
    const std::int64_t n1 = rule_multiplier * n;
    const auto eig = denselin::eigensolve_hermitian(
        assemble_dirichlet(model, {-n1, n1}, x, 0.0));
    for (double E : proxies) {
      rows.push_back({n, n1, E, denselin::spectrum_distance(E, eig.eigenvalues)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

MinorBoundResult minor_bound_diagnostic(const OperatorModel& model, double E,
                                        std::int64_t n_sites, int x_samples, int pair_samples,
                                        double slack, std::uint64_t seed) {
  const int l = model.block_size();
  if (n_sites * l > 400) throw ValidationError("minor_bound_diagnostic: N l must stay <= 400");
  if (x_samples < 1 || pair_samples < 1) {
    throw ValidationError("minor_bound_diagnostic needs positive sample counts");
  }
  if (!(slack > 0.0 && slack < model.hopping.decay_rate)) {
    throw ValidationError("minor_bound_diagnostic slack must lie in (0, rho)");
  }

  MinorBoundResult out;
  for (const auto& v : model.potential.components) {
    out.potential_sum += analysis::torus_log_integral(v, E);
  }
  const double rho = model.hopping.decay_rate;
  const double volume_term =
      static_cast<double>(n_sites) * (out.potential_sum + l * slack);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int m = static_cast<int>(n_sites) * l;
  std::uniform_int_distribution<int> pick(0, m - 1);
  const LatticeInterval interval{1, n_sites};
  const int per_x = (pair_samples + x_samples - 1) / x_samples;

  out.rows.columns = {"x", "alpha", "alpha_prime", "block_distance", "log_abs_minor", "margin"};
  std::vector<std::pair<double, double>> fit_pts;
  int drawn = 0;
  for (int xs = 0; xs < x_samples && drawn < pair_samples; ++xs) {
    const double x = unif(rng);
    const Eigen::MatrixXcd h = assemble_dirichlet(model, interval, x, E);
    for (int p = 0; p < per_x && drawn < pair_samples; ++p, ++drawn) {
      const int alpha = pick(rng);
      const int alpha_prime = pick(rng);
      const auto mu = denselin::minor_logdet(h, alpha, alpha_prime);
      const auto dist = static_cast<double>(std::abs(alpha / l - alpha_prime / l));
      const double bound_log = volume_term - (rho - slack) * dist;
      double margin;
      if (mu.singular) {
        ++out.singular_count;
        margin = -std::numeric_limits<double>::infinity();
      } else {
        margin = mu.log_abs - bound_log;
        fit_pts.emplace_back(dist, mu.log_abs);
        out.worst_margin = std::max(out.worst_margin, margin);
      }
      out.rows.rows.push_back({x, static_cast<double>(alpha), static_cast<double>(alpha_prime),
                               dist, mu.log_abs, margin});
    }
  }
  const LinearFit fit = least_squares(fit_pts);
  if (fit.points >= 5) out.fitted_rate = -fit.slope;
  return out;
}

// ---------------------------------------------------------------------------
// sweep

namespace {

struct GridPoint {
  double epsilon = 0.0;
  double omega = 0.0;
  double energy = 0.0;
  std::int64_t size = 0;
  bool epsilon_given = false, omega_given = false, energy_given = false, size_given = false;
};

std::string point_key(const GridPoint& p, std::size_t index) {
  std::ostringstream os;
  os.precision(17);
  os << "i=" << index << ";eps=" << p.epsilon << ";omega=" << p.omega << ";E=" << p.energy
     << ";N=" << p.size;
  return os.str();
}

OperatorModel resolve_base_model(const SweepConfig& config) {
  if (config.model_file.empty()) return reference_model();
  return parse_model_file(config.model_file);
}

RunRecord run_point(const SweepConfig& config, const OperatorModel& base, const GridPoint& p,
                    std::uint64_t point_seed) {
  OperatorModel model = base;
  if (p.epsilon_given) model.epsilon = p.epsilon;
  if (p.omega_given && p.omega != base.omega) {
    model.omega = p.omega;
    model.omega_digits.clear();
    model.omega_note = "sweep grid";
    model.validate();
  }

  RunRecord rec;
  rec.task = config.task;
  rec.inputs["epsilon"] = model.epsilon;
  rec.inputs["omega"] = model.omega;
  rec.inputs["E"] = p.energy;
  rec.inputs["N"] = static_cast<double>(p.size);
  rec.inputs["seed"] = static_cast<double>(point_seed);
  rec.inputs["x"] = config.x;

  green::GoodnessParams goodness = config.goodness;
  if (goodness.rho <= 0.0) goodness.rho = model.hopping.decay_rate;

  if (config.task == "lyap") {
    analysis::QuadratureSpec quad = config.quad;
    quad.seed = point_seed;
    const auto r = analysis::mean_log_det(model, p.energy, p.size, quad);
    rec.scalars["estimate"] = r.estimate;
    rec.scalars["potential_sum"] = r.potential_sum;
    rec.scalars["signed_margin"] = r.signed_margin;
    rec.scalars["lower_margin"] = r.lower_margin;
    rec.scalars["upper_bound"] = r.upper_bound;
    rec.scalars["upper_margin"] = r.upper_margin;
    rec.scalars["clipped_fraction"] = r.clipped_fraction;
    rec.scalars["unreliable"] = r.unreliable ? 1.0 : 0.0;
  } else if (config.task == "ldt") {
    const auto r = ldt_bad_set(model, p.energy, p.size, config.ldt_m_list, config.ldt_margin,
                               config.ldt_samples, point_seed, config.quad.clip);
    rec.scalars["potential_sum"] = r.potential_sum;
    // fits can be undefined (all measures 0 or 1); NaN has no place in a record
    if (std::isfinite(r.decay_exponent)) rec.scalars["decay_exponent"] = r.decay_exponent;
    if (std::isfinite(r.decay_scale)) rec.scalars["decay_scale"] = r.decay_scale;
    rec.scalars["clipped_fraction"] = r.clipped_fraction;
    rec.scalars["unreliable"] = r.unreliable ? 1.0 : 0.0;
    Table t;
    t.columns = {"M", "measure"};
    for (const auto& [m_len, p_m] : r.measures) {
      t.rows.push_back({static_cast<double>(m_len), p_m});
      std::ostringstream key;
      key << "measure_M" << m_len;
      rec.scalars[key.str()] = p_m;
    }
    rec.tables["measures"] = std::move(t);
  } else if (config.task == "green") {
    const auto report =
        green::green_function(model, {1, p.size}, config.x, p.energy);
    const auto verdict = green::classify_good(report, goodness);
    rec.scalars["residual"] = report.residual;
    rec.scalars["dist_to_spectrum"] = report.dist_to_spectrum;
    rec.scalars["good"] = verdict.good ? 1.0 : 0.0;
    rec.scalars["worst_margin"] = verdict.worst_margin;
    try {
      rec.scalars["decay_rate"] = green::decay_rate_fit(report);
    } catch (const NumericalError&) {
    } catch (const ValidationError&) {
    }
  } else if (config.task == "localize") {
    const std::int64_t n1 = p.size_given ? p.size : config.localize_n1;
    const auto r = localization_experiment(model, config.x, n1);
    rec.scalars["mid_fraction_rate_ok"] = r.mid_fraction_rate_ok;
    rec.scalars["rate_threshold"] = r.rate_threshold;
    Table t;
    t.columns = {"energy", "center", "decay_rate", "participation", "capped"};
    for (const auto& row : r.rows) {
      t.rows.push_back({row.energy, static_cast<double>(row.center), row.decay_rate,
                        row.participation, row.capped ? 1.0 : 0.0});
    }
    rec.tables["eigenstates"] = std::move(t);
  } else {
    throw ValidationError("unknown sweep task '" + config.task + "'");
  }
  return rec;
}

}  // namespace

SweepConfig SweepConfig::from_ini(const std::vector<IniSection>& sections) {
  SweepConfig config;
  for (const auto& s : sections) {
    if (s.name == "experiment") {
      config.task = s.get("task", config.task);
      config.output_dir = s.get("output", config.output_dir);
      config.seed = static_cast<std::uint64_t>(s.get_int("seed", 1));
      config.threads = static_cast<int>(s.get_int("threads", 1));
      config.x = s.get_double("x", config.x);
    } else if (s.name == "model") {
      config.model_file = s.get("file", "");
    } else if (s.name == "grid") {
      if (s.has("epsilon")) {
        config.epsilons = s.get_double_list("epsilon");
        config.epsilons_given = true;
      }
      if (s.has("E")) {
        config.energies = s.get_double_list("E");
        config.energies_given = true;
      }
      if (s.has("N")) {
        config.sizes.clear();
        for (double v : s.get_double_list("N")) {
          config.sizes.push_back(static_cast<std::int64_t>(std::llround(v)));
        }
        config.sizes_given = true;
      }
      if (s.has("omega")) {
        config.omegas = s.get_double_list("omega");
        config.omegas_given = true;
      }
    } else if (s.name == "ldt") {
      config.ldt_margin = s.get_double("margin", config.ldt_margin);
      if (s.has("M")) {
        config.ldt_m_list.clear();
        for (double v : s.get_double_list("M")) {
          config.ldt_m_list.push_back(static_cast<int>(std::llround(v)));
        }
      }
      config.ldt_samples = static_cast<int>(s.get_int("samples", config.ldt_samples));
      config.dc_t = s.get_double("t", 0.0);
    } else if (s.name == "goodness") {
      config.goodness.margin_fraction =
          s.get_double("margin_fraction", config.goodness.margin_fraction);
      config.goodness.rate_slack = s.get_double("rate_slack", config.goodness.rate_slack);
      config.goodness.rho = s.get_double("rho", 0.0);
    } else if (s.name == "quadrature") {
      const std::string method = s.get("method", "midpoint-grid");
      if (method == "monte-carlo") {
        config.quad.method = analysis::QuadratureSpec::Method::monte_carlo;
      } else if (method == "midpoint-grid") {
        config.quad.method = analysis::QuadratureSpec::Method::midpoint_grid;
      } else {
        throw ValidationError("unknown quadrature method '" + method + "'");
      }
      config.quad.nodes = static_cast<int>(s.get_int("nodes", config.quad.nodes));
      config.quad.clip = s.get_double("clip", config.quad.clip);
    } else if (s.name == "localize") {
      config.localize_n1 = s.get_int("n1", config.localize_n1);
    } else {
      throw ValidationError("unknown config section [" + s.name + "]");
    }
  }
  if (config.task.empty()) throw ValidationError("config has no [experiment] task");
  if (config.dc_t > 0.0) {
    // Birkhoff lengths below the Diophantine floor carry no large-deviation content
    const auto floor_m = static_cast<int>(
        std::max(10.0, std::ceil(1.0 / (config.dc_t * config.dc_t))));
    for (int m : config.ldt_m_list) {
      if (m < floor_m) {
        std::ostringstream os;
        os << "ldt M=" << m << " is below the floor max(10, t^-2) = " << floor_m;
        throw ValidationError(os.str());
      }
    }
  }
  return config;
}

SweepConfig SweepConfig::from_file(const std::string& path) {
  return from_ini(parse_ini_file(path));
}

std::string SweepConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "task=" << task << ";seed=" << seed << ";model=" << model_file << ";x=" << x;
  os << ";eps=";
  for (double v : epsilons) os << v << ",";
  os << ";E=";
  for (double v : energies) os << v << ",";
  os << ";N=";
  for (auto v : sizes) os << v << ",";
  os << ";omega=";
  for (double v : omegas) os << v << ",";
  os << ";ldt_margin=" << ldt_margin << ";ldt_samples=" << ldt_samples << ";ldt_t=" << dc_t
     << ";ldt_M=";
  for (int v : ldt_m_list) os << v << ",";
  os << ";good=" << goodness.margin_fraction << "," << goodness.rate_slack << ","
     << goodness.rho;
  os << ";quad=" << static_cast<int>(quad.method) << "," << quad.nodes << "," << quad.clip;
  os << ";n1=" << localize_n1;
  return os.str();
}

SweepOutcome sweep(const SweepConfig& config) {
  const OperatorModel base = resolve_base_model(config);

  auto one_or = [](bool given, std::vector<double> list, double fallback) {
    if (!given) return std::vector<double>{fallback};
    return list;
  };
  const auto eps_values = one_or(config.epsilons_given, config.epsilons, base.epsilon);
  const auto omega_values = one_or(config.omegas_given, config.omegas, base.omega);
  const auto e_values = one_or(config.energies_given, config.energies, 0.3);
  std::vector<std::int64_t> n_values = config.sizes;
  if (!config.sizes_given) n_values = {60};

  std::vector<GridPoint> points;
  for (double eps : eps_values) {
    for (double omega : omega_values) {
      for (double energy : e_values) {
        for (std::int64_t size : n_values) {
          GridPoint p;
          p.epsilon = eps;
          p.epsilon_given = config.epsilons_given;
          p.omega = omega;
          p.omega_given = config.omegas_given;
          p.energy = energy;
          p.energy_given = config.energies_given;
          p.size = size;
          p.size_given = config.sizes_given;
          points.push_back(p);
        }
      }
    }
  }
  if (static_cast<std::int64_t>(points.size()) > 100'000) {
    throw ValidationError("sweep grid exceeds 1e5 points");
  }

  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);

  SweepOutcome outcome;
  outcome.records.resize(points.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> computed{0}, resumed{0};
  std::mutex failures_mutex;
  const std::string canon = config.canonical();

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      const GridPoint& p = points[i];
      const std::uint64_t hash = stable_hash64(canon + "|" + point_key(p, i));
      char hex[24];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
      std::ostringstream name;
      name << "point_" << i << "_" << hex << ".json";
      const fs::path file = fs::path(config.output_dir) / name.str();

      if (fs::exists(file)) {
        try {
          std::ifstream in(file);
          std::stringstream buf;
          buf << in.rdbuf();
          RunRecord rec = RunRecord::from_json(buf.str());
          if (rec.scalars.count("failed") == 0) {
            outcome.records[i] = std::move(rec);
            resumed.fetch_add(1);
            continue;
          }
        } catch (const std::exception&) {
          // unreadable record: recompute below
        }
      }

      RunRecord rec;
      try {
        rec = run_point(config, base, p, derive_seed(config.seed, i));
      } catch (const std::exception& ex) {
        rec.task = config.task;
        rec.inputs["epsilon"] = p.epsilon;
        rec.inputs["omega"] = p.omega;
        rec.inputs["E"] = p.energy;
        rec.inputs["N"] = static_cast<double>(p.size);
        rec.scalars["failed"] = 1.0;
        std::lock_guard<std::mutex> lock(failures_mutex);
        std::ostringstream os;
        os << "point " << i << ": " << ex.what();
        outcome.failures.push_back(os.str());
      }
      rec.config_hash = hex;
      rec.created = now_iso8601();
      {
        std::ofstream out(file);
        out << rec.to_json() << "\n";
      }
      outcome.records[i] = std::move(rec);
      computed.fetch_add(1);
    }
  };

  const int nthreads = std::max(1, config.threads);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  outcome.computed = computed.load();
  outcome.resumed = resumed.load();

  // summary CSV in input order with the union of scalar columns
  std::vector<std::string> scalar_cols;
  for (const auto& rec : outcome.records) {
    for (const auto& [key, value] : rec.scalars) {
      if (std::find(scalar_cols.begin(), scalar_cols.end(), key) == scalar_cols.end()) {
        scalar_cols.push_back(key);
      }
    }
  }
  std::sort(scalar_cols.begin(), scalar_cols.end());
  const fs::path csv_path = fs::path(config.output_dir) / "summary.csv";
  std::ofstream csv(csv_path);
  csv << "index,epsilon,omega,E,N";
  for (const auto& c : scalar_cols) csv << "," << c;
  csv << "\n";
  char buf[64];
  for (std::size_t i = 0; i < outcome.records.size(); ++i) {
    const auto& rec = outcome.records[i];
    csv << i;
    for (const char* key : {"epsilon", "omega", "E", "N"}) {
      csv << ",";
      if (auto it = rec.inputs.find(key); it != rec.inputs.end()) {
        std::snprintf(buf, sizeof buf, "%.17g", it->second);
        csv << buf;
      }
    }
    for (const auto& c : scalar_cols) {
      csv << ",";
      if (auto it = rec.scalars.find(c); it != rec.scalars.end()) {
        std::snprintf(buf, sizeof buf, "%.17g", it->second);
        csv << buf;
      }
    }
    csv << "\n";
  }
  outcome.summary_csv = csv_path.string();
  return outcome;
}

// ---------------------------------------------------------------------------

void write_xy(const std::string& path, const std::vector<std::pair<double, double>>& points,
              const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write plot data: " + path);
  if (!header.empty()) out << "# " << header << "\n";
  char buf[80];
  for (const auto& [x, y] : points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", x, y);
    out << buf;
  }
}

void write_svg_curve(const std::string& path,
                     const std::vector<std::pair<double, double>>& points,
                     const std::string& title, bool log_y) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write svg: " + path);
  const int width = 640, height = 400, pad = 50;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [x, y] : points) {
    if (log_y && !(y > 0.0)) continue;
    pts.emplace_back(x, log_y ? std::log10(y) : y);
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << (log_y ? " (log10 y)" : "") << "</text>\n";
  if (pts.size() >= 2) {
    double x_lo = pts[0].first, x_hi = pts[0].first;
    double y_lo = pts[0].second, y_hi = pts[0].second;
    for (const auto& [x, y] : pts) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    char buf[64];
    for (const auto& [x, y] : pts) {
      const double px = pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad);
      const double py = height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
      out << buf;
    }
    out << "\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
        << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
        << height - pad << "\" stroke=\"black\"/>\n";
    char label[96];
    std::snprintf(label, sizeof label,
                  "<text x=\"%d\" y=\"%d\" font-size=\"11\">[%.4g, %.4g] x [%.4g, %.4g]</text>\n",
                  pad, height - pad + 30, x_lo, x_hi, y_lo, y_hi);
    out << label;
  }
  out << "</svg>\n";
}

}  // namespace qplab::lab
