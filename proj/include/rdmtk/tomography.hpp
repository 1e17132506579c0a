#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "rdmtk/acse.hpp"
#include "rdmtk/fci.hpp"
#include "rdmtk/integrals.hpp"
#include "rdmtk/rdm.hpp"

namespace rdmtk {

/// Noise knobs for the simulated NISQ run: a depolarizing channel applied to
/// the CI-space density matrix after every propagation step, and independent
/// readout bit flips on measured determinant labels. Fixed seed => identical
/// output on every platform (integer-state RNG throughout).
struct NoiseModel {
  double depolarizing_p = 0.0;
  double readout_flip = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

/// Mixed state over a fixed-particle-number determinant basis.
struct DensityMatrix {
  std::shared_ptr<const DeterminantBasis> basis;
  Eigen::MatrixXd rho;

  static DensityMatrix pure(const CiState& state);
  double trace() const { return rho.trace(); }
};

/// sigma <- (1-p) sigma + p I/dim.
void depolarize(DensityMatrix& sigma, double p);

/// Exact expectation values under a mixed state.
std::pair<Rdm1, Rdm2> measure_rdms(const DensityMatrix& sigma);
Rdm3 measure_rdm3(const DensityMatrix& sigma);

/// Run the ACSE iteration on a density matrix, applying the depolarizing
/// channel after each two-body unitary. The generator's 3-RDM source follows
/// cfg.mode (statevector: exact from sigma; cumulant-rdm: valdemoro3), so the
/// p = 0, statevector configuration reproduces solve_acse's pure trajectory.
/// The seed state is the lowest-diagonal determinant (the Hartree-Fock
/// determinant in a canonical-orbital basis).
DensityMatrix prepare_qacse_state(const IntegralSet& ints, const SolverConfig& cfg,
                                  const NoiseModel& noise);

/// One commuting measurement group: the occupation-basis setting covering all
/// diagonal tuples, or a single symmetry-unique off-diagonal class.
struct TomographySetting {
  bool diagonal = false;
  std::array<int, 4> tuple = {0, 0, 0, 0};  // canonical i<j, k<l, (ij)<(kl)
};

struct TomographyPlan {
  int shots_per_setting = 0;
  bool use_exact_expectations = false;
  std::vector<TomographySetting> settings;

  /// One setting per symmetry-unique observable class (O(r^4) settings).
  static TomographyPlan naive(int n_spin_orbitals, int shots, bool exact = false);
  /// Throws unless the settings jointly cover every index tuple.
  void validate(int n_spin_orbitals) const;
};

/// Finite-shot 2-RDM tomography: every observable is estimated as the sample
/// mean of shots_per_setting draws from its exact outcome distribution under
/// sigma, with readout bit flips corrupting the measured basis labels. The
/// assembled tensor is exactly Hermitian and antisymmetric; trace and
/// positivity violations are the noise signal and are left alone.
Rdm2 tomograph_rdm2(const DensityMatrix& sigma, const TomographyPlan& plan,
                    const NoiseModel& noise);

/// Energy difference of one statevector ACSE step taken with the exact 3-RDM
/// residual versus the cumulant-reconstructed one: the per-step energy cost
/// of the reconstruction.
double reconstruction_error_report(const IntegralSet& ints, const CiState& state,
                                   double epsilon = 0.05);

}  // namespace rdmtk
