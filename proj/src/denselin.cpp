#include "qplab/denselin.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "qplab/errors.hpp"

namespace qplab::denselin {

namespace {
constexpr double kZeroPivot = 1e-300;

LogDetResult singular_result() {
  LogDetResult out;
  out.singular = true;
  out.log_abs = -std::numeric_limits<double>::infinity();
  out.phase = Complex(0.0, 0.0);
  return out;
}

bool lu_diagonal_ok(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu) {
  for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i) {
    const Complex u = lu.matrixLU()(i, i);
    if (!std::isfinite(u.real()) || !std::isfinite(u.imag())) return false;
    if (std::abs(u) < kZeroPivot) return false;
  }
  return true;
}
}  // namespace

// Row-pivoted elimination with the log of each pivot accumulated as it is
// chosen. Division goes through std::complex (scaled internally), so pivot
// magnitudes anywhere in the double range are handled; Eigen's own LU kernel
// breaks down once |pivot|^2 underflows.
LogDetResult log_abs_det(const Eigen::MatrixXcd& matrix) {
  if (matrix.rows() != matrix.cols()) throw ValidationError("log_abs_det needs a square matrix");
  const auto n = matrix.rows();
  if (n == 0) return {};
  Eigen::MatrixXcd a = matrix;
  LogDetResult out;
  double log_abs = 0.0;
  Complex phase{1.0, 0.0};
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot_row = k;
    double pivot_mag = std::abs(a(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double mag = std::abs(a(i, k));
      if (mag > pivot_mag) {
        pivot_mag = mag;
        pivot_row = i;
      }
    }
    if (pivot_mag < kZeroPivot) return singular_result();
    if (pivot_row != k) {
      a.row(pivot_row).tail(n - k).swap(a.row(k).tail(n - k));
      phase = -phase;
    }
    const Complex pivot = a(k, k);
    log_abs += std::log(pivot_mag);
    phase *= pivot / pivot_mag;
    const Eigen::Index tail = n - k - 1;
    if (tail > 0) {
      const Complex inv_pivot = Complex(1.0, 0.0) / pivot;
      a.col(k).tail(tail) *= inv_pivot;
      a.bottomRightCorner(tail, tail).noalias() -=
          a.col(k).tail(tail) * a.row(k).tail(tail);
    }
  }
  out.log_abs = log_abs;
  out.phase = phase / std::abs(phase);
  return out;
}

LogDetResult minor_logdet(const Eigen::MatrixXcd& matrix, int row, int col) {
  const auto m = matrix.rows();
  if (m != matrix.cols()) throw ValidationError("minor_logdet needs a square matrix");
  if (row < 0 || row >= m || col < 0 || col >= m) {
    throw ValidationError("minor index out of range");
  }
  if (m == 1) return {};  // empty minor, det = 1
  Eigen::MatrixXcd sub(m - 1, m - 1);
  for (Eigen::Index i = 0, si = 0; i < m; ++i) {
    if (i == row) continue;
    for (Eigen::Index j = 0, sj = 0; j < m; ++j) {
      if (j == col) continue;
      sub(si, sj) = matrix(i, j);
      ++sj;
    }
    ++si;
  }
  return log_abs_det(sub);
}

namespace {

template <typename Rhs>
Rhs solve_impl(const Eigen::MatrixXcd& matrix, const Rhs& rhs) {
  if (matrix.rows() != matrix.cols()) throw ValidationError("solve needs a square matrix");
  if (matrix.rows() != rhs.rows()) throw ValidationError("solve rhs size mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(matrix);
  if (!lu_diagonal_ok(lu)) {
    throw NearSingularError("solve hit an exactly singular factorization");
  }
  Rhs x = lu.solve(rhs);
  // one refinement step
  const Rhs residual = rhs - matrix * x;
  x += lu.solve(residual);
  return x;
}

}  // namespace

Eigen::VectorXcd solve(const Eigen::MatrixXcd& matrix, const Eigen::VectorXcd& rhs) {
  return solve_impl(matrix, rhs);
}

Eigen::MatrixXcd solve(const Eigen::MatrixXcd& matrix, const Eigen::MatrixXcd& rhs) {
  return solve_impl(matrix, rhs);
}

Eigen::MatrixXcd refined_inverse(const Eigen::MatrixXcd& matrix) {
  return solve(matrix, Eigen::MatrixXcd::Identity(matrix.rows(), matrix.cols()).eval());
}

EigenDecomposition eigensolve_hermitian(const Eigen::MatrixXcd& matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw ValidationError("eigensolve_hermitian needs a square matrix");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  const double asym = (matrix - matrix.adjoint().eval()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "matrix is not Hermitian: max asymmetry " << asym;
    throw ValidationError(os.str());
  }
  const Eigen::MatrixXcd sym = 0.5 * (matrix + matrix.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Hermitian eigensolve failed to converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double spectrum_distance(double E, const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) throw ValidationError("spectrum_distance on an empty spectrum");
  return (eigenvalues.array() - E).abs().minCoeff();
}

}  // namespace qplab::denselin
