#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdmtk/integrals.hpp"
#include "rdmtk/tensor.hpp"

namespace rdmtk {

/// Spin-orbital 1-RDM, 1D^i_q = <a+_i a_q>. dim = 2r.
struct Rdm1 {
  int dim = 0;
  Eigen::MatrixXd data;

  Rdm1() = default;
  explicit Rdm1(int d) : dim(d), data(Eigen::MatrixXd::Zero(d, d)) {}

  /// Checked constructor: rejects non-Hermitian input beyond tol.
  static Rdm1 from_data(Eigen::MatrixXd m, double tol = 1e-8);

  double trace() const { return data.trace(); }
};

/// Spin-orbital 2-RDM, 2D^{ij}_{kl} = <a+_i a+_j a_l a_k>. Trace N(N-1).
struct Rdm2 {
  int dim = 0;
  Tensor4 data;

  Rdm2() = default;
  explicit Rdm2(int d) : dim(d), data(d) {}

  /// Checked constructor: rejects tensors that are not antisymmetric in
  /// (i,j) and (k,l) and Hermitian under (ij)<->(kl) beyond tol.
  static Rdm2 from_data(Tensor4 t, double tol = 1e-8);

  double trace() const;
  double antisymmetry_violation() const;
  double hermiticity_violation() const;

  /// Project onto the exactly antisymmetric, Hermitian subspace (in place).
  void enforce_symmetries();
};

/// Spin-orbital 3-RDM, 3D^{ijk}_{qst} = <a+_i a+_j a+_k a_t a_s a_q>.
struct Rdm3 {
  int dim = 0;
  Tensor6 data;

  Rdm3() = default;
  explicit Rdm3(int d) : dim(d), data(d) {}

  double trace() const;
};

/// Grassmann wedge of two 1-RDMs: the antisymmetrized product
///   out^{ij}_{kl} = (a^i_k b^j_l - a^i_l b^j_k - a^j_k b^i_l + a^j_l b^i_k)/4,
/// which for a = b reduces to (a^i_k a^j_l - a^i_l a^j_k)/2. For an
/// idempotent a the exact determinant 2-RDM equals 2 * wedge11(a, a).
Tensor4 wedge11(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Two-particle cumulant (and optionally the three-particle one).
/// delta2 vanishes elementwise for a single Slater determinant.
struct CumulantPair {
  Tensor4 delta2;
  std::optional<Tensor6> delta3;
};
CumulantPair cumulant2(const Rdm2& d2, const Rdm1& d1);

/// Cumulant reconstruction of the 3-RDM with the three-particle cumulant set
/// to zero: the fully antisymmetrized triple product of 1-RDMs plus the nine
/// signed 1-RDM x delta2 cross terms. Exact for single determinants.
Rdm3 valdemoro3(const Rdm2& d2, const Rdm1& d1);

/// 1D^i_k = 1/(N-1) * sum_j 2D^{ij}_{kj}.
Rdm1 contract_2to1(const Rdm2& d2, int n_electrons);

/// Eigenvalues of the spin-summed spatial 1-RDM, sorted descending, plus the
/// HONO/LUNO values bracketing the N/2 occupation boundary.
struct NaturalOccupations {
  Eigen::VectorXd values;
  double hono = 0.0;
  double luno = 0.0;
};
NaturalOccupations natural_occupations(const Rdm1& d1);

/// E = core + sum 1K.1D + sum 2V.2D with 2V^{ij}_{kl} = <ij|kl>/2.
double rdm_energy(const IntegralSet& ints, const Rdm1& d1, const Rdm2& d2);
double rdm_energy(const SpinHamiltonian& h, const Rdm1& d1, const Rdm2& d2);

/// Text interchange for RDMs: optional `#` provenance lines, then a header
/// `rank dim n_electrons`, then 0-based `i j [k l [m n]] value` records for
/// the nonzero elements.
void write_rdm1(const Rdm1& d1, int n_electrons, std::ostream& out,
                const std::vector<std::string>& provenance = {});
void write_rdm2(const Rdm2& d2, int n_electrons, std::ostream& out,
                const std::vector<std::string>& provenance = {});
struct RdmFile {
  int rank = 0;
  int n_electrons = 0;
  std::optional<Rdm1> d1;
  std::optional<Rdm2> d2;
};
RdmFile read_rdm(std::istream& in, double symmetry_tol = 1e-6);
RdmFile read_rdm_file(const std::string& path, double symmetry_tol = 1e-6);

}  // namespace rdmtk
