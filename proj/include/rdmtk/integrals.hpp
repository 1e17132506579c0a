#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "rdmtk/tensor.hpp"

namespace rdmtk {

/// One- and two-electron integrals over an orthonormal spatial-orbital basis.
/// two_body is stored densely in chemists' notation (ij|kl) with the 8-fold
/// real-orbital permutational symmetry. Conversion to the physicists'
/// convention used by the Hamiltonian happens at application time
/// (see SpinHamiltonian).
struct IntegralSet {
  int n_spatial = 0;
  int n_alpha = 0;
  int n_beta = 0;
  Eigen::MatrixXd one_body;           // r x r, symmetric
  Tensor4 two_body;                   // (ij|kl), chemists'
  double core_energy = 0.0;           // V_nn plus any frozen-core shift
  std::vector<int> point_group_labels;  // pass-through ORBSYM tags, may be empty

  int n_electrons() const { return n_alpha + n_beta; }

  /// Throws std::invalid_argument if the symmetry/count invariants fail.
  void validate(double tol = 1e-12) const;
};

/// A contracted s-type Gaussian: sum_k c_k * N(alpha_k) * exp(-alpha_k r^2).
struct ContractedS {
  std::vector<double> exponents;
  std::vector<double> coefficients;
};

struct Atom {
  std::string element;
  double charge = 1.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Nuclear geometry plus one contracted s-shell per atom.
struct Geometry {
  std::vector<Atom> atoms;
  std::vector<ContractedS> shells;  // shells[i] belongs to atoms[i]

  void validate() const;
};

/// Boys function F0(t) = \int_0^1 exp(-t x^2) dx. Positive-term series below
/// t = 12, closed erf form above; the two branches agree to 1e-13 at the seam.
double boys_f0(double t);

/// Geometry text format: one `element Z x y z` line per atom (bohr), then one
/// `basis ... end` block per atom with `exponent coefficient` lines. A single
/// basis block is shared by all atoms.
Geometry parse_geometry(std::istream& in);
Geometry parse_geometry_file(const std::string& path);

/// Integrals over contracted s-Gaussians, Loewdin-orthogonalized.
/// The orbital count equals the atom count (one contraction per atom).
IntegralSet build_h_system(const Geometry& geom, int n_alpha = -1, int n_beta = -1);

/// As build_h_system, but also returns the AO -> orthonormal-orbital
/// coefficient matrix needed to evaluate orbitals on a spatial grid.
struct BuiltSystem {
  IntegralSet integrals;
  Eigen::MatrixXd orbital_coeffs;  // column p = orbital p in the AO basis
};
BuiltSystem build_h_system_full(const Geometry& geom, int n_alpha = -1, int n_beta = -1);

/// FCIDUMP interchange (1-based indices, chemists' notation, `&FCI ... &END`
/// or `/`-terminated namelist). Parse errors carry the offending line number.
IntegralSet parse_fcidump(std::istream& in);
IntegralSet parse_fcidump_file(const std::string& path);
void write_fcidump(const IntegralSet& ints, std::ostream& out);
void write_fcidump_file(const IntegralSet& ints, const std::string& path);

/// Rotate the integrals into a new orthonormal orbital basis; column p of
/// coeffs expresses new orbital p in the current basis.
IntegralSet transform_orbitals(const IntegralSet& ints, const Eigen::MatrixXd& coeffs);

/// Minimal closed-shell restricted Hartree-Fock (damped fixed point). Used to
/// produce canonical-orbital seeds for the correlation solvers.
struct ScfResult {
  double energy = 0.0;
  Eigen::MatrixXd mo_coeffs;        // in the orthonormal input basis
  Eigen::VectorXd orbital_energies;
  int iterations = 0;
  bool converged = false;
};
ScfResult restricted_hf(const IntegralSet& ints, int max_iters = 200, double tol = 1e-12);

/// Spin-orbital Hamiltonian tables derived from a spatial IntegralSet with
/// the index rule p = 2*spatial + spin (spin 0 = alpha, 1 = beta):
///   H = sum_{pq} h^p_q a+_p a_q + sum_{pqrs} v^{pq}_{rs} a+_p a+_q a_s a_r
/// where v^{pq}_{rs} = <pq|rs>/2 (physicists', spin deltas applied).
struct SpinHamiltonian {
  int n_so = 0;
  double core = 0.0;
  Eigen::MatrixXd h;   // n_so x n_so
  Tensor4 v_phys;      // <pq|rs>, physicists'

  static SpinHamiltonian from(const IntegralSet& ints);
};

}  // namespace rdmtk
