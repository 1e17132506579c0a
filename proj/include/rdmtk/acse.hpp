#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rdmtk/fci.hpp"
#include "rdmtk/integrals.hpp"
#include "rdmtk/rdm.hpp"

namespace rdmtk {

/// Coefficients of an anti-Hermitian two-body generator
/// A = sum A^{ij}_{kl} a+_i a+_j a_l a_k with A^{ij}_{kl} = -A^{kl}_{ij}
/// and antisymmetry within each index pair.
struct AMatrix {
  int dim = 0;
  Tensor4 data;

  AMatrix() = default;
  explicit AMatrix(int d) : dim(d), data(d) {}

  double frobenius_norm() const { return data.frobenius_norm(); }
  double max_abs() const { return data.max_abs(); }
  double anti_hermiticity_violation() const;

  /// Project onto the exact anti-Hermitian, pair-antisymmetric subspace.
  void enforce_symmetries();
};

enum class SolverMode { statevector, cumulant_rdm };
enum class StepControl { fixed, halving };

struct SolverConfig {
  double epsilon = 0.05;
  int max_iters = 200;
  double energy_tol = 1e-8;        // Hartree
  double residual_tol = 1e-6;      // on ||A||_F
  SolverMode mode = SolverMode::statevector;
  StepControl step_control = StepControl::halving;

  void validate() const;
};

enum class StopReason { energy_converged, residual_converged, max_iters, step_underflow };
const char* to_string(StopReason r);

struct AcseIteration {
  int iter = 0;
  double energy = 0.0;
  double residual_norm = 0.0;
  double epsilon = 0.0;
};

struct AcseTrace {
  std::vector<AcseIteration> iterations;
  Rdm1 final_d1;
  Rdm2 final_d2;
  std::optional<CiState> final_state;  // statevector mode only
  double final_energy = 0.0;
  StopReason reason = StopReason::max_iters;
  bool converged = false;
};

/// <[a+_i a+_j a_l a_k, W]> for a two-body operator W = sum C^{pq}_{rs}
/// a+_p a+_q a_s a_r, expanded by Wick's theorem into 2- and 3-RDM
/// contractions (the pure four-body terms cancel in the commutator).
/// C must have the pair-swap symmetry C^{qp}_{sr} = C^{pq}_{rs}.
Tensor4 two_body_commutator(const Tensor4& coeff, const Rdm2& d2, const Rdm3& d3);

/// ACSE residual A^{ij}_{kl} = <[a+_i a+_j a_l a_k, H]>. Exact when d3 is the
/// measured 3-RDM; approximate under cumulant reconstruction.
AMatrix acse_residual(const SpinHamiltonian& h, const Rdm1& d1, const Rdm2& d2, const Rdm3& d3);
AMatrix acse_residual(const IntegralSet& ints, const Rdm1& d1, const Rdm2& d2, const Rdm3& d3);

/// exp(eps * A)|psi> to machine precision (sub-stepped Taylor series on the
/// CI-space action of A). Unitary: the output stays unit-normalized.
CiState step_statevector(const CiState& state, const AMatrix& a, double epsilon);

/// Wavefunction-free first-order update of the 2-RDM along the generator:
/// 2D += eps * <[a+a+aa, A]> with the 3-RDM closed by valdemoro3, followed by
/// re-antisymmetrization and trace rescaling; the 1-RDM is recontracted.
std::pair<Rdm1, Rdm2> step_rdm(const Rdm1& d1, const Rdm2& d2, const AMatrix& a, double epsilon,
                               int n_electrons);

/// Iterated two-body unitary propagation until the energy or residual
/// tolerance is met. Statevector mode needs a CiState seed and uses exact
/// 3-RDMs; cumulant-rdm mode propagates (1,2)-RDMs only.
AcseTrace solve_acse(const IntegralSet& ints, const CiState& seed, const SolverConfig& cfg);
AcseTrace solve_acse(const IntegralSet& ints, const Rdm1& seed_d1, const Rdm2& seed_d2,
                     const SolverConfig& cfg);

/// CSV rows `iter,energy,residual_norm,epsilon` with `#` provenance lines.
void write_acse_trace_csv(const AcseTrace& trace, std::ostream& out,
                          const std::vector<std::string>& provenance = {});

}  // namespace rdmtk
