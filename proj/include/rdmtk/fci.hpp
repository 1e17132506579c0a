#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <vector>

#include "rdmtk/integrals.hpp"
#include "rdmtk/rdm.hpp"

namespace rdmtk {

/// Slater determinant as separate alpha/beta occupation masks over spatial
/// orbitals. Spin-orbital p = 2*spatial + spin, so the combined mask
/// interleaves the two strings.
struct Det {
  uint32_t alpha = 0;
  uint32_t beta = 0;

  uint64_t combined(int n_spatial) const {
    uint64_t m = 0;
    for (int o = 0; o < n_spatial; ++o) {
      if (alpha & (1u << o)) m |= 1ull << (2 * o);
      if (beta & (1u << o)) m |= 1ull << (2 * o + 1);
    }
    return m;
  }
  bool operator==(const Det&) const = default;
};

/// Full Sz-resolved determinant space with a deterministic lexicographic
/// ordering (alpha strings ascending, beta strings fastest).
class DeterminantBasis {
 public:
  static std::shared_ptr<const DeterminantBasis> build(int n_spatial, int n_alpha, int n_beta);

  int n_spatial() const { return n_spatial_; }
  int n_spin_orbitals() const { return 2 * n_spatial_; }
  int n_alpha() const { return n_alpha_; }
  int n_beta() const { return n_beta_; }
  int n_electrons() const { return n_alpha_ + n_beta_; }
  int size() const { return static_cast<int>(dets_.size()); }
  const Det& det(int i) const { return dets_[i]; }
  const std::vector<Det>& dets() const { return dets_; }

  /// Index of a combined-mask determinant; -1 when outside the sector.
  int index_of(uint64_t combined_mask) const;

 private:
  int n_spatial_ = 0, n_alpha_ = 0, n_beta_ = 0;
  std::vector<Det> dets_;
  std::unordered_map<uint64_t, int> index_;
};

/// Real CI vector over a determinant basis; unit 2-norm.
struct CiState {
  std::shared_ptr<const DeterminantBasis> basis;
  Eigen::VectorXd coeffs;

  static CiState from_coeffs(std::shared_ptr<const DeterminantBasis> basis,
                             Eigen::VectorXd coeffs, double norm_tol = 1e-12);
  /// Unit vector on a single determinant of the basis.
  static CiState determinant(std::shared_ptr<const DeterminantBasis> basis, const Det& d);

  double norm() const { return coeffs.norm(); }
};

/// H|psi> by Slater-Condon rules (diagonal, single, double excitations with
/// fermionic phases); the core energy is added on the diagonal.
Eigen::VectorXd apply_hamiltonian(const SpinHamiltonian& h, const CiState& state);

/// Generic particle-conserving two-body operator sum_{ijkl} C^{ij}_{kl}
/// a+_i a+_j a_l a_k applied to a CI vector.
Eigen::VectorXd apply_two_body(const Tensor4& coeff, const CiState& state);

struct GroundStateOptions {
  enum class Method { Auto, Dense, Davidson };
  Method method = Method::Auto;
  int dense_threshold = 2000;
  int max_iterations = 400;
  int max_subspace = 40;
  double residual_tol = 1e-10;
};

struct GroundStateResult {
  double energy = 0.0;
  CiState state;
  int iterations = 0;
};

/// Lowest eigenpair of the sector Hamiltonian. Dense diagonalization below
/// the threshold, Davidson above. Sign fixed so the largest-magnitude
/// coefficient is positive.
GroundStateResult ground_state(const IntegralSet& ints, int n_alpha, int n_beta,
                               const GroundStateOptions& opts = {});
GroundStateResult ground_state(const SpinHamiltonian& h,
                               std::shared_ptr<const DeterminantBasis> basis,
                               const GroundStateOptions& opts = {});

/// Exact (shot-free) reduced state tomography.
std::pair<Rdm1, Rdm2> measure_rdms(const CiState& state);
Rdm3 measure_rdm3(const CiState& state);

/// Transition 2-RDM <bra| a+_i a+_j a_l a_k |ket> between two states on the
/// same basis. With bra = ket this reduces to the ordinary 2-RDM.
Tensor4 transition_rdm2(const CiState& bra, const CiState& ket);

/// CiState text interchange: `#` provenance lines, a header
/// `n_spin_orbitals n_alpha n_beta`, then `alpha_mask beta_mask coeff` rows.
void write_ci_state(const CiState& state, std::ostream& out,
                    const std::vector<std::string>& provenance = {});
CiState read_ci_state(std::istream& in);
CiState read_ci_state_file(const std::string& path);

}  // namespace rdmtk
