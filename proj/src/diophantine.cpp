#include "qplab/diophantine.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qplab/errors.hpp"
#include "qplab/torus.hpp"

namespace qplab::dioph {

ContinuedFraction continued_fraction(double omega, int depth) {
  if (!(omega > 0.0 && omega < 1.0)) {
    throw ValidationError("continued_fraction needs omega in (0,1)");
  }
  if (depth < 1 || depth > 40) {
    throw ValidationError("continued_fraction depth must lie in [1, 40]");
  }
  ContinuedFraction out;
  std::int64_t p_prev = 1, q_prev = 0;  // p_{-1}, q_{-1}
  std::int64_t p_cur = 0, q_cur = 1;    // p_0, q_0
  double r = omega;
  for (int i = 0; i < depth; ++i) {
    if (r < 1e-14) {
      out.near_rational = true;
      break;
    }
    const double inv = 1.0 / r;
    auto a = static_cast<std::int64_t>(std::floor(inv));
    if (inv - std::floor(inv) > 1.0 - 1e-12) a += 1;  // inv is an integer up to noise
    r = inv - static_cast<double>(a);
    if (r < 0.0) r = 0.0;
    if (a > (std::numeric_limits<std::int64_t>::max() - p_prev) / std::max<std::int64_t>(p_cur, 1)) {
      out.near_rational = true;
      break;
    }
    const std::int64_t p_next = a * p_cur + p_prev;
    const std::int64_t q_next = a * q_cur + q_prev;
    out.partial_quotients.push_back(a);
    out.convergents.emplace_back(p_next, q_next);
    p_prev = p_cur;
    q_prev = q_cur;
    p_cur = p_next;
    q_cur = q_next;
    if (q_cur > 1'000'000'000'000'000LL) break;  // beyond double resolution anyway
  }
  return out;
}

double torus_norm(double t) { return dist_to_integer(t); }

double torus_norm_of_multiple(std::int64_t k, double omega, const std::string& omega_digits) {
  if (!omega_digits.empty() && std::llabs(k) > 10'000) {
    const auto frac = DecimalFraction::parse(omega_digits);
    return dist_to_integer(frac.frac_of_multiple(k));
  }
  return dist_to_integer(frac_of_multiple(k, omega));
}

double dc_margin(double omega, std::int64_t K, double exponent, const std::string& omega_digits) {
  if (K < 1) throw ValidationError("dc_margin needs K >= 1");
  double best = std::numeric_limits<double>::infinity();
  const bool use_digits = !omega_digits.empty();
  DecimalFraction frac;
  if (use_digits) frac = DecimalFraction::parse(omega_digits);
  for (std::int64_t k = 1; k <= K; ++k) {
    const double norm = (use_digits && k > 10'000)
                            ? dist_to_integer(frac.frac_of_multiple(k))
                            : dist_to_integer(frac_of_multiple(k, omega));
    best = std::min(best, std::pow(static_cast<double>(k), exponent) * norm);
    if (best == 0.0) return 0.0;
  }
  return best;
}

namespace {

/// margin >= t with an early bail-out on the first violating k.
bool passes_dc(double omega, std::int64_t K, double t) {
  for (std::int64_t k = 1; k <= K; ++k) {
    if (static_cast<double>(k) * k * dist_to_integer(frac_of_multiple(k, omega)) < t) return false;
  }
  return true;
}

}  // namespace

std::vector<double> sample_dc_frequencies(double t, int count, std::int64_t K,
                                          std::uint64_t seed) {
  if (!(t > 0.0 && t < 0.4)) {
    throw ValidationError("sample_dc_frequencies needs t in (0, 0.4); larger t rejects everything");
  }
  if (count < 1 || K < 1) throw ValidationError("sample_dc_frequencies needs count, K >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out;
  std::int64_t draws = 0;
  while (static_cast<int>(out.size()) < count) {
    ++draws;
    const double omega = unif(rng);
    if (passes_dc(omega, K, t)) out.push_back(omega);
    if (draws >= 100'000 && out.size() < static_cast<std::size_t>(draws) / 100) {
      std::ostringstream os;
      os << "sample_dc_frequencies: acceptance rate " << out.size() << "/" << draws
         << " below 1%; try a smaller t";
      throw NumericalError(os.str());
    }
  }
  return out;
}

std::string FrequencyProfile::to_json() const {
  nlohmann::json j;
  j["schema"] = "qplab.frequency/1";
  j["omega"] = omega;
  if (!omega_digits.empty()) j["omega_digits"] = omega_digits;
  j["partial_quotients"] = partial_quotients;
  auto conv = nlohmann::json::array();
  for (const auto& [p, q] : convergents) conv.push_back({p, q});
  j["convergents"] = conv;
  auto table = nlohmann::json::array();
  for (const auto& [K, margin] : dc_margin_table) table.push_back({K, margin});
  j["dc_margin_table"] = table;
  j["near_rational"] = near_rational;
  return j.dump(2);
}

FrequencyProfile frequency_profile(double omega, int depth, const std::vector<std::int64_t>& Ks,
                                   const std::string& omega_digits) {
  FrequencyProfile out;
  out.omega = omega;
  out.omega_digits = omega_digits;
  const ContinuedFraction cf = continued_fraction(omega, depth);
  out.partial_quotients = cf.partial_quotients;
  out.convergents = cf.convergents;
  out.near_rational = cf.near_rational;
  for (std::int64_t K : Ks) {
    out.dc_margin_table.emplace_back(K, dc_margin(omega, K, 2.0, omega_digits));
  }
  return out;
}

}  // namespace qplab::dioph
