#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qplab::denselin {

using Complex = std::complex<double>;

/// det in logarithmic form: det = phase * exp(log_abs). Keeping determinants
/// split this way is load-bearing: raw values overflow once the matrix side
/// passes ~300.
struct LogDetResult {
  double log_abs = 0.0;          // -inf when singular
  Complex phase{1.0, 0.0};       // unit modulus when not singular
  bool singular = false;

  Complex value() const { return singular ? Complex(0.0, 0.0) : phase * std::exp(log_abs); }
};

struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXcd eigenvectors; // orthonormal columns
};

/// Pivoted LU with per-pivot log accumulation; pivots below 1e-300 in
/// magnitude count as an exact zero chain.
LogDetResult log_abs_det(const Eigen::MatrixXcd& matrix);

/// det of the submatrix with row `row` and column `col` deleted (0-based),
/// remaining rows/columns kept in natural order. A 1x1 matrix has the empty
/// minor, det = 1.
LogDetResult minor_logdet(const Eigen::MatrixXcd& matrix, int row, int col);

/// LU solve plus one step of iterative refinement.
/// Contract: ||A x - b|| <= 1e-10 ||A|| ||x||.
Eigen::VectorXcd solve(const Eigen::MatrixXcd& matrix, const Eigen::VectorXcd& rhs);
Eigen::MatrixXcd solve(const Eigen::MatrixXcd& matrix, const Eigen::MatrixXcd& rhs);

/// Inverse via LU on all columns plus one refinement sweep.
Eigen::MatrixXcd refined_inverse(const Eigen::MatrixXcd& matrix);

/// Rejects matrices whose max asymmetry |A - A^H| exceeds 1e-12 (absolute,
/// relative to max(1, ||A||_max)); below that, works on (A + A^H)/2.
EigenDecomposition eigensolve_hermitian(const Eigen::MatrixXcd& matrix);

/// min_i |E - lambda_i|.
double spectrum_distance(double E, const Eigen::VectorXd& eigenvalues);

}  // namespace qplab::denselin
