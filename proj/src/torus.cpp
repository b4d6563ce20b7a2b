#include "qplab/torus.hpp"

#include <cctype>
#include <cmath>

#include "qplab/errors.hpp"

namespace qplab {

double frac_unit(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f -= 1.0;  // floor rounding at negative x very close to an integer
  if (f < 0.0) f += 1.0;
  return f;
}

namespace {

double u128_to_double(unsigned __int128 v) {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  const auto lo = static_cast<std::uint64_t>(v);
  return std::ldexp(static_cast<double>(hi), 64) + static_cast<double>(lo);
}

}  // namespace

double frac_of_multiple(std::int64_t k, double omega) {
  if (k == 0 || omega == 0.0) return 0.0;
  if (k < 0) {
    double f = frac_of_multiple(-k, omega);
    return f == 0.0 ? 0.0 : 1.0 - f;
  }
  if (omega < 0.0) {
    double f = frac_of_multiple(k, -omega);
    return f == 0.0 ? 0.0 : 1.0 - f;
  }
  int e = 0;
  const double m = std::frexp(omega, &e);  // omega = m * 2^e, m in [0.5, 1)
  // For a normal double, m * 2^53 is an exact 53-bit integer.
  const auto mant = static_cast<unsigned __int128>(std::llround(std::ldexp(m, 53)));
  const int shift = 53 - e;  // omega = mant * 2^-shift
  if (shift <= 0) return 0.0;
  if (shift >= 127) {
    // omega below ~2^-74: k*omega never wraps for |k| <= 1e9
    return frac_unit(static_cast<double>(k) * omega);
  }
  const unsigned __int128 prod = mant * static_cast<unsigned __int128>(k);
  const unsigned __int128 mask = ((static_cast<unsigned __int128>(1) << shift) - 1);
  const unsigned __int128 frac_bits = prod & mask;
  double f = std::ldexp(u128_to_double(frac_bits), -shift);
  if (f >= 1.0) f = std::nextafter(1.0, 0.0);
  return f;
}

double torus_phase(double x, std::int64_t n, double omega) {
  double f = frac_unit(x) + frac_of_multiple(n, omega);
  if (f >= 1.0) f -= 1.0;
  return f;
}

double dist_to_integer(double t) {
  const double f = frac_unit(t);
  return f <= 0.5 ? f : 1.0 - f;
}

DecimalFraction DecimalFraction::parse(const std::string& text) {
  std::size_t pos = 0;
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  std::size_t end = text.size();
  while (end > pos && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::string digits = text.substr(pos, end - pos);
  if (auto dot = digits.find('.'); dot != std::string::npos) {
    const std::string head = digits.substr(0, dot);
    if (!(head.empty() || head == "0")) {
      throw ValidationError("decimal fraction must lie in [0,1): '" + text + "'");
    }
    digits = digits.substr(dot + 1);
  }
  if (digits.empty()) throw ValidationError("empty decimal fraction: '" + text + "'");
  if (digits.size() > 57) digits.resize(57);

  DecimalFraction out;
  // Process digits from the last to the first: f := (f + d * 2^192) / 10.
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (!std::isdigit(static_cast<unsigned char>(*it))) {
      throw ValidationError("bad digit in decimal fraction: '" + text + "'");
    }
    std::uint64_t limbs4[4] = {out.limbs_[0], out.limbs_[1], out.limbs_[2],
                               static_cast<std::uint64_t>(*it - '0')};
    unsigned __int128 rem = 0;
    for (int i = 3; i >= 0; --i) {
      const unsigned __int128 cur = (rem << 64) | limbs4[i];
      limbs4[i] = static_cast<std::uint64_t>(cur / 10);
      rem = cur % 10;
    }
    out.limbs_[0] = limbs4[0];
    out.limbs_[1] = limbs4[1];
    out.limbs_[2] = limbs4[2];
  }
  return out;
}

double DecimalFraction::value() const {
  return std::ldexp(static_cast<double>(limbs_[2]), -64) +
         std::ldexp(static_cast<double>(limbs_[1]), -128) +
         std::ldexp(static_cast<double>(limbs_[0]), -192);
}

double DecimalFraction::frac_of_multiple(std::int64_t k) const {
  if (k == 0) return 0.0;
  if (k < 0) {
    double f = frac_of_multiple(-k);
    return f == 0.0 ? 0.0 : 1.0 - f;
  }
  // multiply the 192-bit fraction by k, keep the fractional 192 bits
  const auto mul = static_cast<unsigned __int128>(k);
  std::uint64_t out[3];
  unsigned __int128 carry = 0;
  for (int i = 0; i < 3; ++i) {
    const unsigned __int128 cur = mul * limbs_[i] + carry;
    out[i] = static_cast<std::uint64_t>(cur);
    carry = cur >> 64;  // bits above 2^192 are the integer part; dropped
  }
  double f = std::ldexp(static_cast<double>(out[2]), -64) +
             std::ldexp(static_cast<double>(out[1]), -128);
  if (f >= 1.0) f = std::nextafter(1.0, 0.0);
  return f;
}

}  // namespace qplab
