#include "qplab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qplab/denselin.hpp"
#include "qplab/errors.hpp"
#include "qplab/torus.hpp"

namespace qplab::analysis {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double real_at(const PotentialSpec& v, double x, double E) {
  return eval_potential(v, Complex(x, 0.0)).real() - E;
}

/// d^order/dx^order of v(x) - E on the real axis (order >= 1 drops E).
double derivative_at(const PotentialSpec& v, double x, int order) {
  Complex sum{0.0, 0.0};
  for (const auto& [k, c] : v.coeffs) {
    Complex factor{1.0, 0.0};
    for (int j = 0; j < order; ++j) factor *= Complex(0.0, kTwoPi * k);
    sum += c * factor * std::exp(Complex(0.0, kTwoPi * k * x));
  }
  return sum.real();
}

double coeff_scale(const PotentialSpec& v) {
  double s = 0.0;
  for (const auto& [k, c] : v.coeffs) s += std::abs(c);
  return std::max(s, 1e-30);
}

int max_harmonic(const PotentialSpec& v) {
  int m = 0;
  for (const auto& [k, c] : v.coeffs) {
    if (std::abs(c) > 0.0) m = std::max(m, std::abs(k));
  }
  return m;
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0 || hi - lo < 1e-15) return mid;
    if ((flo < 0.0) == (fm < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

int root_multiplicity(const PotentialSpec& v, double x, double E, int start_order) {
  const double scale = coeff_scale(v);
  const int kmax = std::max(1, max_harmonic(v));
  for (int order = start_order; order <= 6; ++order) {
    double deriv_scale = scale;
    for (int j = 0; j < order; ++j) deriv_scale *= kTwoPi * kmax;
    if (std::abs(derivative_at(v, x, order)) > 1e-7 * deriv_scale) return order;
  }
  return start_order;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (nodes < 64) throw ValidationError("quadrature needs at least 64 nodes");
  if (!(clip > 0.0 && clip <= 1e-8)) throw ValidationError("quadrature clip must lie in (0, 1e-8]");
}

std::vector<TorusRoot> potential_level_roots(const PotentialSpec& v, double E, int grid) {
  std::vector<TorusRoot> roots;
  if (!v.nonconstant()) return roots;
  const double scale = coeff_scale(v) + std::abs(E);
  const auto f = [&](double x) { return real_at(v, x, E); };
  const auto fp = [&](double x) { return derivative_at(v, x, 1); };

  grid = std::max(grid, 64 * std::max(1, max_harmonic(v)));
  std::vector<double> found;
  for (int i = 0; i < grid; ++i) {
    const double x0 = static_cast<double>(i) / grid;
    const double x1 = static_cast<double>(i + 1) / grid;
    const double f0 = f(x0);
    const double f1 = f(x1);
    if (f0 == 0.0) found.push_back(x0);
    if ((f0 < 0.0) != (f1 < 0.0) && f0 != 0.0 && f1 != 0.0) {
      found.push_back(bisect_root(f, x0, x1));
    }
    // tangential zeros live at critical points
    const double g0 = fp(x0);
    const double g1 = fp(x1);
    if ((g0 < 0.0) != (g1 < 0.0)) {
      const double xc = bisect_root(fp, x0, x1);
      if (std::abs(f(xc)) < 1e-10 * scale) found.push_back(xc);
    }
  }
  std::sort(found.begin(), found.end());
  for (double x : found) {
    const double xn = frac_unit(x);
    bool dup = false;
    for (const auto& r : roots) {
      if (dist_to_integer(xn - r.x) < 1e-9) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    const bool sign_change = std::abs(f(xn)) < 1e-10 * scale && std::abs(fp(xn)) > 1e-7 * scale;
    roots.push_back({xn, sign_change ? 1 : root_multiplicity(v, xn, E, 1)});
  }
  return roots;
}

namespace {

/// log|v(x)-E| minus the singular comb sum_j m_j log|2 sin(pi (x-x_j))|;
/// analytic on the torus once the roots are exact. Near a root the two log
/// terms cancel catastrophically, so there the ratio is formed first.
double desingularized_log(const PotentialSpec& v, double E, const std::vector<TorusRoot>& roots,
                          double x) {
  const Complex val = eval_potential(v, Complex(x, 0.0)) - E;
  double nearest = 1.0;
  for (const auto& r : roots) nearest = std::min(nearest, dist_to_integer(x - r.x));
  if (!roots.empty() && nearest < 1e-3) {
    double q = std::abs(val);
    for (const auto& r : roots) {
      const double s = std::abs(2.0 * std::sin(kPi * (x - r.x)));
      for (int m = 0; m < r.multiplicity; ++m) q /= s;
    }
    return std::log(std::max(q, 1e-300));
  }
  double out = std::log(std::max(std::abs(val), 1e-300));
  for (const auto& r : roots) {
    out -= r.multiplicity * std::log(std::abs(2.0 * std::sin(kPi * (x - r.x))));
  }
  return out;
}

double midpoint_log_integral(const PotentialSpec& v, double E, const std::vector<TorusRoot>& roots,
                             int nodes) {
  double sum = 0.0, comp = 0.0;  // Kahan
  for (int i = 0; i < nodes; ++i) {
    double x = (i + 0.5) / nodes;
    const double term = desingularized_log(v, E, roots, x);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / nodes;
}

}  // namespace

double torus_log_integral(const PotentialSpec& v, double E, const QuadratureSpec& quad,
                          double* error_estimate) {
  quad.validate();
  if (!v.nonconstant()) {
    Complex c{0.0, 0.0};
    if (auto it = v.coeffs.find(0); it != v.coeffs.end()) c = it->second;
    const double gap = std::abs(c - E);
    if (gap < 1e-300) return -std::numeric_limits<double>::infinity();
    if (error_estimate) *error_estimate = 0.0;
    return std::log(gap);
  }
  const auto roots = potential_level_roots(v, E);
  if (quad.method == QuadratureSpec::Method::monte_carlo) {
    std::mt19937_64 rng(quad.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double sum = 0.0;
    for (int i = 0; i < quad.nodes; ++i) sum += desingularized_log(v, E, roots, unif(rng));
    if (error_estimate) *error_estimate = std::numeric_limits<double>::quiet_NaN();
    return sum / quad.nodes;
  }
  const double coarse = midpoint_log_integral(v, E, roots, quad.nodes);
  const double fine = midpoint_log_integral(v, E, roots, 2 * quad.nodes);
  if (error_estimate) *error_estimate = std::abs(fine - coarse);
  return fine;
}

double regularized_log_integral(const PotentialSpec& v, double E, double eps,
                                const QuadratureSpec& quad) {
  quad.validate();
  if (!(eps > 0.0)) throw ValidationError("regularized_log_integral needs eps > 0");
  double sum = 0.0;
  if (quad.method == QuadratureSpec::Method::monte_carlo) {
    std::mt19937_64 rng(quad.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < quad.nodes; ++i) {
      const double x = unif(rng);
      sum += std::log(std::abs(eval_potential(v, Complex(x, 0.0)) - E) + eps);
    }
    return sum / quad.nodes;
  }
  const int nodes = 2 * quad.nodes;  // kink at each root boundary; cheap to refine
  for (int i = 0; i < nodes; ++i) {
    const double x = (i + 0.5) / nodes;
    sum += std::log(std::abs(eval_potential(v, Complex(x, 0.0)) - E) + eps);
  }
  return sum / nodes;
}

double lojasiewicz_measure(const PotentialSpec& v, double E, double eps, int grid) {
  if (!(eps > 0.0)) throw ValidationError("lojasiewicz_measure needs eps > 0");
  if (!v.nonconstant()) {
    Complex c{0.0, 0.0};
    if (auto it = v.coeffs.find(0); it != v.coeffs.end()) c = it->second;
    return std::abs(c - E) < eps ? 1.0 : 0.0;
  }
  grid = std::max(grid, 64 * std::max(1, max_harmonic(v)));
  const auto f = [&](double x) { return real_at(v, x, E); };
  std::vector<double> cuts;
  for (int sign = -1; sign <= 1; sign += 2) {
    const auto g = [&](double x) { return f(x) + sign * eps; };
    for (int i = 0; i < grid; ++i) {
      const double x0 = static_cast<double>(i) / grid;
      const double x1 = static_cast<double>(i + 1) / grid;
      if ((g(x0) < 0.0) != (g(x1) < 0.0)) cuts.push_back(frac_unit(bisect_root(g, x0, x1)));
    }
  }
  if (cuts.empty()) {
    return std::abs(f(0.42)) < eps ? 1.0 : 0.0;  // sublevel set is all or nothing
  }
  std::sort(cuts.begin(), cuts.end());
  double measure = 0.0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = (i + 1 < cuts.size()) ? cuts[i + 1] : cuts[0] + 1.0;
    const double mid = frac_unit(0.5 * (lo + hi));
    if (std::abs(f(mid)) < eps) measure += hi - lo;
  }
  return measure;
}

double lojasiewicz_exponent_fit(const PotentialSpec& v, double E,
                                const std::vector<double>& eps_list, int grid) {
  if (eps_list.size() < 4) {
    throw ValidationError("lojasiewicz_exponent_fit needs at least 4 eps values");
  }
  const auto [lo, hi] = std::minmax_element(eps_list.begin(), eps_list.end());
  if (*hi / *lo < 100.0 * (1.0 - 1e-9)) {
    throw ValidationError("lojasiewicz_exponent_fit needs eps spanning >= 2 decades");
  }
  std::vector<std::pair<double, double>> pts;
  for (double eps : eps_list) {
    const double m = lojasiewicz_measure(v, E, eps, grid);
    if (m > 0.0) pts.emplace_back(std::log(eps), std::log(m));
  }
  if (pts.size() < 3) {
    throw InsufficientDataError("lojasiewicz_exponent_fit: fewer than 3 nonzero measures");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [a, b] : pts) {
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double birkhoff_sum(const std::function<double(double)>& u, double x, double omega,
                    std::int64_t count) {
  if (count < 1) throw ValidationError("birkhoff_sum needs count >= 1");
  double sum = 0.0, comp = 0.0;
  for (std::int64_t j = 0; j < count; ++j) {
    const double term = u(torus_phase(x, j, omega));
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(count);
}

namespace {

double function_torus_mean(const std::function<double(double)>& u, const QuadratureSpec& quad) {
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < quad.nodes; ++i) {
    const double term = u((i + 0.5) / quad.nodes);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / quad.nodes;
}

}  // namespace

double denjoy_koksma_deviation(const std::function<double(double)>& u, double x, double omega,
                               std::int64_t count, const QuadratureSpec& quad) {
  quad.validate();
  const double mean = function_torus_mean(u, quad);
  double sum = 0.0, comp = 0.0;
  for (std::int64_t j = 1; j <= count; ++j) {
    const double term = u(torus_phase(x, j, omega)) - mean;
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return std::abs(sum);
}

ExponentFit denjoy_koksma_exponent(const std::function<double(double)>& u, double x, double omega,
                                   std::int64_t n_lo, std::int64_t n_hi, int points,
                                   const QuadratureSpec& quad) {
  if (n_lo < 1 || n_hi <= n_lo || points < 3) {
    throw ValidationError("denjoy_koksma_exponent needs 1 <= n_lo < n_hi and >= 3 points");
  }
  ExponentFit out;
  const double ratio = std::pow(static_cast<double>(n_hi) / n_lo, 1.0 / (points - 1));
  std::int64_t prev = 0;
  for (int i = 0; i < points; ++i) {
    auto n = static_cast<std::int64_t>(std::llround(n_lo * std::pow(ratio, i)));
    if (n <= prev) n = prev + 1;
    prev = n;
    out.table.emplace_back(static_cast<double>(n), denjoy_koksma_deviation(u, x, omega, n, quad));
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (const auto& [n, dev] : out.table) {
    if (dev < 1e-14) continue;
    const double a = std::log(n);
    const double b = std::log(dev);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    ++used;
  }
  if (used < 3) throw InsufficientDataError("denjoy_koksma_exponent: fewer than 3 usable points");
  out.exponent = (used * sxy - sx * sy) / (used * sxx - sx * sx);
  return out;
}

namespace {

Complex log_deriv_ratio(const PotentialSpec& v, double E, Complex z) {
  return eval_potential_derivative(v, z) / (eval_potential(v, z) - E);
}

Complex adaptive_simpson(const std::function<Complex(double)>& g, double a, double b, Complex fa,
                         Complex fm, Complex fb, Complex whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Complex flm = g(lm);
  const Complex frm = g(rm);
  const Complex left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Complex right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

Complex integrate_edge(const std::function<Complex(double)>& g, double tol) {
  // split [0,1] into a few panels so the adaptive pass starts from a sane mesh
  Complex total{0.0, 0.0};
  const int panels = 16;
  for (int i = 0; i < panels; ++i) {
    const double a = static_cast<double>(i) / panels;
    const double b = static_cast<double>(i + 1) / panels;
    const Complex fa = g(a);
    const Complex fb = g(b);
    const Complex fm = g(0.5 * (a + b));
    const Complex whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson(g, a, b, fa, fm, fb, whole, tol / panels, 28);
  }
  return total;
}

}  // namespace

int strip_zero_count(const PotentialSpec& v, double E, double rho) {
  if (!(rho > 0.0)) throw ValidationError("strip_zero_count needs rho > 0");
  if (!v.nonconstant()) return 0;
  double height = rho;
  for (int attempt = 0; attempt < 4; ++attempt) {
    double contour_min = std::numeric_limits<double>::infinity();
    const int grid = std::max(4096, 64 * max_harmonic(v));
    for (int i = 0; i < grid; ++i) {
      const double x = (i + 0.5) / grid;
      contour_min = std::min(contour_min, std::abs(eval_potential(v, Complex(x, height)) - E));
      contour_min = std::min(contour_min, std::abs(eval_potential(v, Complex(x, -height)) - E));
    }
    if (contour_min < 1e-8) {
      height += 1e-6;
      continue;
    }
    const auto bottom = [&](double x) { return log_deriv_ratio(v, E, Complex(x, -height)); };
    const auto top = [&](double x) { return log_deriv_ratio(v, E, Complex(x, height)); };
    const Complex contour = integrate_edge(bottom, 1e-6) - integrate_edge(top, 1e-6);
    const Complex winding = contour / Complex(0.0, kTwoPi);
    const double rounded = std::round(winding.real());
    const double residual = std::abs(winding - Complex(rounded, 0.0));
    if (residual > 0.1) {
      std::ostringstream os;
      os << "strip_zero_count: winding residual " << residual << " (contour too close to a zero)";
      throw NumericalError(os.str());
    }
    return static_cast<int>(rounded);
  }
  throw NumericalError("strip_zero_count: could not move the contour off a zero");
}

std::vector<StripSearchResult> sorets_spencer_search(const BlockPotential& bp, double rho,
                                                     double xi, const std::vector<double>& E_grid,
                                                     int x_grid) {
  if (!(xi > 0.0 && xi < rho)) throw ValidationError("sorets_spencer_search needs 0 < xi < rho");
  if (E_grid.empty()) throw ValidationError("sorets_spencer_search needs a nonempty E grid");
  x_grid = std::max(x_grid, 4096);

  int sigma = 0;
  for (const auto& v : bp.components) {
    int best = 0;
    for (double E : E_grid) best = std::max(best, strip_zero_count(v, E, rho));
    sigma += best;
  }

  const int levels = (8 * sigma + 4) * 3;
  std::vector<StripSearchResult> out;
  out.reserve(E_grid.size());
  for (double E : E_grid) {
    StripSearchResult r;
    r.E = E;
    r.xi = xi;
    r.zero_count_sigma = sigma;
    r.attained_min = -1.0;
    for (int level = 0; level < levels; ++level) {
      const double y = 0.5 * xi + (level + 0.5) * (0.5 * xi / levels);
      double level_min = std::numeric_limits<double>::infinity();
      for (const auto& v : bp.components) {
        // x nodes at i/n so coarser grids are subsets of finer ones
        for (int i = 0; i < x_grid; ++i) {
          const double x = static_cast<double>(i) / x_grid;
          level_min = std::min(level_min, std::abs(eval_potential(v, Complex(x, y)) - E));
          level_min = std::min(level_min, std::abs(eval_potential(v, Complex(x, -y)) - E));
          if (level_min < r.attained_min) break;  // this level already lost
        }
      }
      if (level_min > r.attained_min) {
        r.attained_min = level_min;
        r.y0 = y;
      }
    }
    r.empirical_c = r.attained_min / std::pow(xi, sigma);
    out.push_back(r);
  }
  return out;
}

double harmonic_measure_interval(std::complex<double> z, double a, double b) {
  if (!(z.imag() > 0.0)) throw ValidationError("harmonic measure needs Im z > 0");
  if (!(a < b)) throw ValidationError("harmonic measure needs a < b");
  const double arg_b = std::isinf(b) ? kPi : std::arg(z - Complex(b, 0.0));
  const double arg_a = std::isinf(a) ? 0.0 : std::arg(z - Complex(a, 0.0));
  return (arg_b - arg_a) / kPi;
}

double harmonic_measure_strip(std::complex<double> z, StripPart part, double rho) {
  if (!(rho > 0.0)) throw ValidationError("harmonic_measure_strip needs rho > 0");
  const double y1 = 0.5 * rho;
  if (!(z.imag() > 0.0 && z.imag() < y1)) {
    throw ValidationError("harmonic_measure_strip: point outside the open strip");
  }
  const double top = z.imag() / y1;
  return part == StripPart::top ? top : 1.0 - top;
}

std::string MeanLogDet::to_json() const {
  nlohmann::json j;
  j["schema"] = "qplab.meanlogdet/1";
  j["estimate"] = estimate;
  j["potential_sum"] = potential_sum;
  j["signed_margin"] = signed_margin;
  j["lower_margin"] = lower_margin;
  j["upper_bound"] = upper_bound;
  j["upper_margin"] = upper_margin;
  j["clipped_fraction"] = clipped_fraction;
  j["unreliable"] = unreliable;
  return j.dump(2);
}

MeanLogDet mean_log_det(const OperatorModel& model, double E, std::int64_t n_sites,
                        const QuadratureSpec& quad) {
  quad.validate();
  if (n_sites < 4) throw ValidationError("mean_log_det needs N >= 4");
  const LatticeInterval interval{1, n_sites};
  const double floor_log = std::log(quad.clip);

  std::mt19937_64 rng(quad.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double sum = 0.0;
  int clipped = 0;
  for (int i = 0; i < quad.nodes; ++i) {
    const double x =
        quad.method == QuadratureSpec::Method::monte_carlo ? unif(rng) : (i + 0.5) / quad.nodes;
    const auto det = denselin::log_abs_det(assemble_dirichlet(model, interval, x, E));
    double u = det.singular ? -std::numeric_limits<double>::infinity()
                            : det.log_abs / static_cast<double>(n_sites);
    if (!(u > floor_log)) {
      u = floor_log;
      ++clipped;
    }
    sum += u;
  }

  MeanLogDet out;
  out.estimate = sum / quad.nodes;
  for (const auto& v : model.potential.components) {
    out.potential_sum += torus_log_integral(v, E, quad);
  }
  out.signed_margin = out.estimate - out.potential_sum;
  out.lower_margin = std::abs(out.signed_margin);

  double sup = 0.0;
  const int grid = 4096;
  for (const auto& v : model.potential.components) {
    double s = 0.0;
    for (int i = 0; i < grid; ++i) {
      s = std::max(s, std::abs(eval_potential(v, Complex((i + 0.5) / grid, 0.0)) - E));
    }
    sup = std::max(sup, s);
  }
  out.upper_bound = model.block_size() *
                    std::log(sup + model.epsilon * model.hopping.total_norm() + 1e-300);
  out.upper_margin = out.upper_bound - out.estimate;
  out.clipped_fraction = static_cast<double>(clipped) / quad.nodes;
  out.unreliable = out.clipped_fraction > 0.01;
  return out;
}

SubharmonicBound subharmonic_bound_diagnostic(const OperatorModel& model, double E,
                                              std::int64_t n_sites,
                                              const QuadratureSpec& quad) {
  quad.validate();
  if (n_sites < 4) throw ValidationError("subharmonic_bound_diagnostic needs N >= 4");
  const LatticeInterval interval{1, n_sites};
  const double floor_log = std::log(quad.clip);
  SubharmonicBound out;
  out.sup_u = -std::numeric_limits<double>::infinity();
  double sq_sum = 0.0;
  for (int i = 0; i < quad.nodes; ++i) {
    const double x = (i + 0.5) / quad.nodes;
    const auto det = denselin::log_abs_det(assemble_dirichlet(model, interval, x, E));
    double u = det.singular ? floor_log : det.log_abs / static_cast<double>(n_sites);
    if (u < floor_log) u = floor_log;
    out.sup_u = std::max(out.sup_u, u);
    sq_sum += u * u;
  }
  out.l2_norm = std::sqrt(sq_sum / quad.nodes);
  out.c_star = out.sup_u + out.l2_norm;
  return out;
}

}  // namespace qplab::analysis
