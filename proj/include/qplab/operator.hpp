#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qplab {

using Complex = std::complex<double>;

/// Trigonometric polynomial v(x) = sum_k c_k e^{2 pi i k x}, analytic on the
/// strip |Im z| <= strip_width.
struct PotentialSpec {
  std::map<int, Complex> coeffs;
  double strip_width = 1.0;

  /// Throws ValidationError unless c_{-k} = conj(c_k) (real on the real axis)
  /// and strip_width > 0.
  void validate() const;

  /// True if some k != 0 carries a nonzero coefficient. Constant potentials
  /// are allowed but flagged by OperatorModel::validate().
  bool nonconstant() const;

  double sup_abs_real_axis(int grid = 4096) const;
};

/// v(z), valid for |Im z| <= strip_width. Throws a domain error naming the
/// width outside the strip. Real x gives Im below ~1e-12.
Complex eval_potential(const PotentialSpec& spec, Complex z);

/// Analytic derivative v'(z) on the same strip.
Complex eval_potential_derivative(const PotentialSpec& spec, Complex z);

struct BlockPotential {
  std::vector<PotentialSpec> components;

  int block_size() const { return static_cast<int>(components.size()); }
  void validate() const;
};

/// Hopping blocks W_k for k >= 0 with ||W_k|| <= decay_amp * e^{-decay_rate*k};
/// W_{-k} enters assembly as the conjugate transpose of W_k, which keeps every
/// finite-volume matrix self-adjoint. W_0, when present, must be Hermitian and
/// is symmetrized exactly by validate_and_normalize().
struct HoppingKernel {
  std::map<int, Eigen::MatrixXcd> blocks;
  double decay_rate = 1.0;  // rho
  double decay_amp = 1.0;   // C0

  void validate_and_normalize(int block_size);

  /// W_k for any sign of k (adjoint for k < 0, zero matrix if not stored).
  Eigen::MatrixXcd block(int k, int block_size) const;

  int max_stored_range() const;

  /// sum_k ||W_k|| over all k in Z (stored blocks plus the adjoint side).
  double total_norm() const;
};

struct TruncationRadius {
  int k_max = 0;
  bool degenerate_tolerance = false;  // tol >= decay_amp: nothing survives
};

/// Smallest k_max with decay_amp * e^{-decay_rate * k} <= tol beyond it.
TruncationRadius hopping_truncation_radius(const HoppingKernel& kernel, double tol);

/// Full problem instance for H(x) psi_n = epsilon sum_k W_k psi_{n-k} + V(x+n omega) psi_n.
struct OperatorModel {
  double epsilon = 0.0;
  double omega = 0.0;
  std::string omega_note;    // provenance: named constant / sampled Diophantine
  std::string omega_digits;  // optional high-precision fractional digits
  BlockPotential potential;
  HoppingKernel hopping;

  int block_size() const { return potential.block_size(); }

  /// Hard violations throw ValidationError; soft ones (constant potential
  /// component) come back as warnings.
  std::vector<std::string> validate();

  OperatorModel with_epsilon(double eps) const {
    OperatorModel m = *this;
    m.epsilon = eps;
    return m;
  }
};

/// Integer interval [a, b] of lattice sites. A site n and fiber index
/// r in [0, l) map to the flat matrix index (n - a) * l + r.
struct LatticeInterval {
  std::int64_t a = 0;
  std::int64_t b = 0;

  std::int64_t length() const { return b - a + 1; }
  bool contains(std::int64_t n) const { return a <= n && n <= b; }
  LatticeInterval shifted(std::int64_t j) const { return {a + j, b + j}; }

  int flat_index(std::int64_t site, int fiber, int block_size) const {
    return static_cast<int>(site - a) * block_size + fiber;
  }
  std::int64_t site_of(int flat, int block_size) const { return a + flat / block_size; }
  int fiber_of(int flat, int block_size) const { return flat % block_size; }
};

/// Dense Hermitian matrix of H restricted to the interval, minus E.
/// Diagonal block at site n: V(x + n omega) - E I + epsilon W_0; block (n, n')
/// for n != n': epsilon W_{n-n'}, with the hopping sum truncated at
/// hopping_truncation_radius(tol).
Eigen::MatrixXcd assemble_dirichlet(const OperatorModel& model, const LatticeInterval& interval,
                                    double x, double E, double tol = 1e-12);

/// Finitely supported block sequence, site -> fiber vector.
using BlockSequence = std::map<std::int64_t, Eigen::VectorXcd>;

/// (H psi)_n with the hopping sum truncated at the tol radius. Support widens
/// by the truncation radius.
BlockSequence apply_operator(const OperatorModel& model, const BlockSequence& psi, double x,
                             double tol = 1e-12);

/// Max entrywise |H_{N+j}(x) - H_N(x + j omega)|; the covariance identity
/// makes this pure floating-point noise (contract: <= 1e-12).
double translate_check(const OperatorModel& model, const LatticeInterval& interval, double x,
                       double E, std::int64_t j, double tol = 1e-12);

/// Reference instance used across experiments and docs: l = 2,
/// v1 = 2cos(2 pi x), v2 = 2cos(2 pi x) + cos(4 pi x), rho = 1,
/// W_k = e^{-k} B with B a fixed symmetric unitary block, omega = golden mean.
OperatorModel reference_model(double epsilon = 1e-3, int stored_hopping_range = 250);

}  // namespace qplab
