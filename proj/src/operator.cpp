#include "qplab/operator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qplab/errors.hpp"
#include "qplab/torus.hpp"

namespace qplab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void PotentialSpec::validate() const {
  if (!(strip_width > 0.0)) throw ValidationError("potential strip_width must be > 0");
  double scale = 0.0;
  for (const auto& [k, c] : coeffs) scale = std::max(scale, std::abs(c));
  for (const auto& [k, c] : coeffs) {
    Complex mirror{0.0, 0.0};
    if (auto it = coeffs.find(-k); it != coeffs.end()) mirror = it->second;
    if (std::abs(mirror - std::conj(c)) > 1e-12 * std::max(1.0, scale)) {
      std::ostringstream os;
      os << "potential coefficients break Hermitian symmetry at k=" << k
         << ": c(-k) != conj(c(k))";
      throw ValidationError(os.str());
    }
  }
  // realness spot check on the axis
  for (int i = 0; i < 64; ++i) {
    const double x = (i + 0.5) / 64.0;
    const Complex v = eval_potential(*this, Complex(x, 0.0));
    if (std::abs(v.imag()) > 1e-12 * std::max(1.0, scale)) {
      throw ValidationError("potential is not real on the real axis");
    }
  }
}

bool PotentialSpec::nonconstant() const {
  for (const auto& [k, c] : coeffs) {
    if (k != 0 && std::abs(c) > 0.0) return true;
  }
  return false;
}

double PotentialSpec::sup_abs_real_axis(int grid) const {
  double sup = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    sup = std::max(sup, std::abs(eval_potential(*this, Complex(x, 0.0))));
  }
  return sup;
}

Complex eval_potential(const PotentialSpec& spec, Complex z) {
  if (std::abs(z.imag()) > spec.strip_width + 1e-15) {
    std::ostringstream os;
    os << "potential evaluated at |Im z| = " << std::abs(z.imag())
       << " outside its analyticity strip of width " << spec.strip_width;
    throw ValidationError(os.str());
  }
  Complex sum{0.0, 0.0};
  for (const auto& [k, c] : spec.coeffs) {
    sum += c * std::exp(Complex(0.0, kTwoPi * k) * z);
  }
  return sum;
}

Complex eval_potential_derivative(const PotentialSpec& spec, Complex z) {
  if (std::abs(z.imag()) > spec.strip_width + 1e-15) {
    throw ValidationError("potential derivative evaluated outside the analyticity strip");
  }
  Complex sum{0.0, 0.0};
  for (const auto& [k, c] : spec.coeffs) {
    sum += c * Complex(0.0, kTwoPi * k) * std::exp(Complex(0.0, kTwoPi * k) * z);
  }
  return sum;
}

void BlockPotential::validate() const {
  if (components.empty()) throw ValidationError("block potential needs at least one component");
  for (const auto& c : components) c.validate();
}

void HoppingKernel::validate_and_normalize(int block_size) {
  if (!(decay_rate > 0.0)) throw ValidationError("hopping decay_rate must be > 0");
  if (!(decay_amp > 0.0)) throw ValidationError("hopping decay_amp must be > 0");
  for (auto& [k, w] : blocks) {
    if (k < 0) throw ValidationError("hopping blocks are stored for k >= 0 only");
    if (w.rows() != block_size || w.cols() != block_size) {
      throw ValidationError("hopping block size does not match the potential block size");
    }
    const double norm = w.operatorNorm();
    const double bound = decay_amp * std::exp(-decay_rate * k);
    if (norm > bound * (1.0 + 1e-9) + 1e-300) {
      std::ostringstream os;
      os << "hopping block k=" << k << " has norm " << norm
         << " above the decay bound " << bound;
      throw ValidationError(os.str());
    }
  }
  if (auto it = blocks.find(0); it != blocks.end()) {
    const double asym = (it->second - it->second.adjoint().eval()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) {
      std::ostringstream os;
      os << "W_0 must be Hermitian (max asymmetry " << asym << ")";
      throw ValidationError(os.str());
    }
    it->second = 0.5 * (it->second + it->second.adjoint().eval());
  }
}

Eigen::MatrixXcd HoppingKernel::block(int k, int block_size) const {
  if (k >= 0) {
    if (auto it = blocks.find(k); it != blocks.end()) return it->second;
  } else {
    if (auto it = blocks.find(-k); it != blocks.end()) return it->second.adjoint();
  }
  return Eigen::MatrixXcd::Zero(block_size, block_size);
}

int HoppingKernel::max_stored_range() const {
  int r = 0;
  for (const auto& [k, w] : blocks) r = std::max(r, k);
  return r;
}

double HoppingKernel::total_norm() const {
  double sum = 0.0;
  for (const auto& [k, w] : blocks) {
    const double n = w.operatorNorm();
    sum += (k == 0) ? n : 2.0 * n;
  }
  return sum;
}

TruncationRadius hopping_truncation_radius(const HoppingKernel& kernel, double tol) {
  if (!(tol > 0.0)) throw ValidationError("truncation tolerance must be > 0");
  if (tol >= kernel.decay_amp) return {0, true};
  const double k = std::ceil(std::log(kernel.decay_amp / tol) / kernel.decay_rate);
  return {static_cast<int>(k), false};
}

std::vector<std::string> OperatorModel::validate() {
  std::vector<std::string> warnings;
  if (epsilon < 0.0) throw ValidationError("epsilon must be >= 0");
  if (!(omega > 0.0 && omega < 1.0)) throw ValidationError("omega must lie in (0,1)");
  potential.validate();
  hopping.validate_and_normalize(block_size());
  for (std::size_t j = 0; j < potential.components.size(); ++j) {
    if (potential.components[j].strip_width < hopping.decay_rate - 1e-12) {
      std::ostringstream os;
      os << "potential component " << j + 1 << " has strip width "
         << potential.components[j].strip_width << " below the hopping decay rate "
         << hopping.decay_rate;
      throw ValidationError(os.str());
    }
    if (!potential.components[j].nonconstant()) {
      std::ostringstream os;
      os << "potential component " << j + 1 << " is constant";
      warnings.push_back(os.str());
    }
  }
  // reject exact small-denominator rationals
  for (std::int64_t q = 1; q <= 1024; ++q) {
    if (dist_to_integer(frac_of_multiple(q, omega)) < 1e-12) {
      std::ostringstream os;
      os << "omega is rational at working precision (q*omega integral for q=" << q << ")";
      throw ValidationError(os.str());
    }
  }
  if (!omega_digits.empty()) {
    const double v = DecimalFraction::parse(omega_digits).value();
    if (std::abs(v - omega) > 1e-14) {
      throw ValidationError("omega_digits disagree with the double omega value");
    }
  }
  return warnings;
}

Eigen::MatrixXcd assemble_dirichlet(const OperatorModel& model, const LatticeInterval& interval,
                                    double x, double E, double tol) {
  if (interval.length() < 1) throw ValidationError("empty lattice interval");
  const int l = model.block_size();
  const auto n_sites = static_cast<int>(interval.length());
  const int m = n_sites * l;

  const int k_trunc = hopping_truncation_radius(model.hopping, tol).k_max;
  const int k_eff = std::min(k_trunc, model.hopping.max_stored_range());

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m, m);
  for (int i = 0; i < n_sites; ++i) {
    const std::int64_t site = interval.a + i;
    const double phase = torus_phase(x, site, model.omega);
    for (int r = 0; r < l; ++r) {
      const Complex v = eval_potential(model.potential.components[r], Complex(phase, 0.0));
      a(i * l + r, i * l + r) = v.real() - E;
    }
  }
  if (model.epsilon != 0.0) {
    for (const auto& [k, w] : model.hopping.blocks) {
      if (k > k_eff) continue;
      if (k == 0) {
        for (int i = 0; i < n_sites; ++i) {
          a.block(i * l, i * l, l, l) += model.epsilon * w;
        }
        continue;
      }
      const Eigen::MatrixXcd scaled = model.epsilon * w;
      const Eigen::MatrixXcd scaled_adj = scaled.adjoint();
      for (int i = k; i < n_sites; ++i) {
        // row site i couples to column site i-k through W_k
        a.block(i * l, (i - k) * l, l, l) = scaled;
        a.block((i - k) * l, i * l, l, l) = scaled_adj;
      }
    }
  }
  return a;
}

BlockSequence apply_operator(const OperatorModel& model, const BlockSequence& psi, double x,
                             double tol) {
  BlockSequence out;
  if (psi.empty()) return out;
  const int l = model.block_size();
  const int k_trunc = hopping_truncation_radius(model.hopping, tol).k_max;
  const int k_eff = std::min(k_trunc, model.hopping.max_stored_range());

  const std::int64_t lo = psi.begin()->first - k_eff;
  const std::int64_t hi = psi.rbegin()->first + k_eff;
  for (std::int64_t n = lo; n <= hi; ++n) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(l);
    bool touched = false;
    if (model.epsilon != 0.0) {
      for (int k = -k_eff; k <= k_eff; ++k) {
        auto it = psi.find(n - k);
        if (it == psi.end()) continue;
        acc += model.epsilon * (model.hopping.block(k, l) * it->second);
        touched = true;
      }
    }
    if (auto it = psi.find(n); it != psi.end()) {
      const double phase = torus_phase(x, n, model.omega);
      for (int r = 0; r < l; ++r) {
        acc(r) += eval_potential(model.potential.components[r], Complex(phase, 0.0)).real() *
                  it->second(r);
      }
      touched = true;
    }
    if (touched) out[n] = std::move(acc);
  }
  return out;
}

double translate_check(const OperatorModel& model, const LatticeInterval& interval, double x,
                       double E, std::int64_t j, double tol) {
  const Eigen::MatrixXcd lhs = assemble_dirichlet(model, interval.shifted(j), x, E, tol);
  const Eigen::MatrixXcd rhs =
      assemble_dirichlet(model, interval, torus_phase(x, j, model.omega), E, tol);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

OperatorModel reference_model(double epsilon, int stored_hopping_range) {
  OperatorModel m;
  m.epsilon = epsilon;
  m.omega = 0.61803398874989484820458683436563811772;  // golden mean, (sqrt(5)-1)/2
  m.omega_note = "golden mean";
  m.omega_digits = "0.618033988749894848204586834365638117720309179805762862135";

  PotentialSpec v1;
  v1.coeffs[1] = Complex(1.0, 0.0);
  v1.coeffs[-1] = Complex(1.0, 0.0);
  v1.strip_width = 1.0;
  PotentialSpec v2 = v1;
  v2.coeffs[2] = Complex(0.5, 0.0);
  v2.coeffs[-2] = Complex(0.5, 0.0);
  m.potential.components = {v1, v2};

  // symmetric unitary block: a reflection, so every W_k including W_0 is Hermitian
  const double theta = 0.7;
  Eigen::MatrixXcd b(2, 2);
  b << std::cos(theta), std::sin(theta), std::sin(theta), -std::cos(theta);
  m.hopping.decay_rate = 1.0;
  m.hopping.decay_amp = 1.0;
  for (int k = 0; k <= stored_hopping_range; ++k) {
    m.hopping.blocks[k] = std::exp(-static_cast<double>(k)) * b;
  }
  m.validate();
  return m;
}

}  // namespace qplab
