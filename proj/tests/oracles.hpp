// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "qplab/operator.hpp"

namespace oracles {

using Complex = std::complex<double>;

/// O(n!) cofactor-expansion determinant; keep n <= 8.
inline Complex cofactor_det(const Eigen::MatrixXcd& a) {
  const auto n = a.rows();
  if (n == 0) return {1.0, 0.0};
  if (n == 1) return a(0, 0);
  Complex det{0.0, 0.0};
  double sign = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::MatrixXcd sub(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index sc = 0;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (c == j) continue;
        sub(r - 1, sc++) = a(r, c);
      }
    }
    det += sign * a(0, j) * cofactor_det(sub);
    sign = -sign;
  }
  return det;
}

/// Jensen / Mahler-measure route for the torus log integral of a trig
/// polynomial: write v(x) - E = w^{-K} P(w) on |w| = 1 and sum log|roots|
/// outside the unit circle plus log of the leading coefficient.
inline double mahler_log_integral(const qplab::PotentialSpec& v, double E) {
  int kmax = 0;
  for (const auto& [k, c] : v.coeffs) {
    if (std::abs(c) > 0.0 && std::abs(k) > kmax) kmax = std::abs(k);
  }
  std::vector<Complex> poly(2 * kmax + 1, Complex(0.0, 0.0));
  for (const auto& [k, c] : v.coeffs) poly[k + kmax] += c;
  poly[kmax] -= E;
  while (poly.size() > 1 && std::abs(poly.back()) < 1e-300) poly.pop_back();
  const auto deg = static_cast<Eigen::Index>(poly.size()) - 1;
  if (deg == 0) return std::log(std::abs(poly[0]));

  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(deg, deg);
  for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < deg; ++i) companion(i, deg - 1) = -poly[i] / poly[deg];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion);

  double integral = std::log(std::abs(poly[deg]));
  for (Eigen::Index i = 0; i < deg; ++i) {
    const double mag = std::abs(solver.eigenvalues()(i));
    if (mag > 1.0) integral += std::log(mag);
  }
  return integral;
}

/// Straight Poisson-kernel quadrature for the harmonic measure of (a, b).
inline double poisson_measure(Complex z, double a, double b, int nodes = 400000) {
  const double x = z.real(), y = z.imag();
  double sum = 0.0;
  const double h = (b - a) / nodes;
  for (int i = 0; i < nodes; ++i) {
    const double t = a + (i + 0.5) * h;
    sum += y / ((t - x) * (t - x) + y * y);
  }
  return sum * h / std::numbers::pi;
}

/// Closed-form eigenvalues of [[a, c], [conj(c), b]].
inline std::pair<double, double> eig2x2(double a, double b, Complex c) {
  const double mean = 0.5 * (a + b);
  const double disc = std::sqrt(0.25 * (a - b) * (a - b) + std::norm(c));
  return {mean - disc, mean + disc};
}

/// Long-double direct Birkhoff average, the high-precision summation oracle.
inline double direct_birkhoff_cos(double x, double omega, std::int64_t count) {
  long double sum = 0.0L;
  const long double w = static_cast<long double>(omega);
  for (std::int64_t j = 0; j < count; ++j) {
    const long double phase = std::fmod(static_cast<long double>(x) + j * w, 1.0L);
    sum += std::cos(2.0L * std::numbers::pi_v<long double> * phase);
  }
  return static_cast<double>(sum / count);
}

inline Eigen::MatrixXcd random_complex(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
  }
  return a;
}

inline Eigen::MatrixXcd random_hermitian(int n, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_complex(n, rng);
  return 0.5 * (a + a.adjoint().eval());
}

}  // namespace oracles
