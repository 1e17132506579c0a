#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdmtk/rdm.hpp"

namespace rdmtk {

/// Violation summary before/after purification. contraction_error is the
/// feasibility gap of the contracted 1-RDM (how far its eigenvalues leave
/// [0, 1]); the remaining fields are the constraints the projection targets.
struct ConstraintReport {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double antisymmetry_error = 0.0;
  double contraction_error = 0.0;
  double min_eig_d = 0.0;
  double min_eig_q = 0.0;
  double min_eig_g = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

/// The D, Q, G pair matrices of a 2-RDM: D is the 2-RDM itself reshaped to
/// (pair x pair); Q^{ij}_{kl} = <a_i a_j a+_l a+_k> and
/// G^{ij}_{kl} = <a+_i a_j a+_l a_k> follow from anticommutation through the
/// contracted 1-RDM. All three are positive semidefinite for an
/// N-representable input.
struct DqgMatrices {
  Eigen::MatrixXd d;
  Eigen::MatrixXd q;
  Eigen::MatrixXd g;
};
DqgMatrices dqg_transforms(const Rdm2& d2, int n_electrons);

struct PurifyOptions {
  double tol = 1e-8;
  int max_iters = 500;
  /// Optional spin equality constraints, applied as linear projections when
  /// target values are declared.
  std::optional<double> sz_target;
  std::optional<double> s2_target;
};

/// Alternating projections toward the N-representable set: per cycle,
/// (a) trace rescale to N(N-1), (b-d) eigenvalue clipping of D, Q, G mapped
/// back through the inverse transforms, then re-antisymmetrization. Keeps the
/// best iterate; reports converged=false instead of failing when max_iters is
/// reached.
std::pair<Rdm2, ConstraintReport> purify(const Rdm2& noisy, int n_electrons,
                                         const PurifyOptions& opts = {});

/// Reusable projection engine behind purify: the symmetry-subspace basis, the
/// Q/G linear maps, and the KKT factorization depend only on (dim, N,
/// constraint set), so callers that project repeatedly (the cumulant-mode
/// ACSE loop) build one projector and reuse it. The projection itself is
/// Dykstra's alternating scheme between the three PSD cones and the
/// constrained linear-map graph, so it converges to the nearest feasible
/// point rather than an arbitrary one.
class DqgProjector {
 public:
  DqgProjector(int dim, int n_electrons, const PurifyOptions& opts = {});
  std::pair<Rdm2, ConstraintReport> project(const Rdm2& noisy) const;

  const PurifyOptions& options() const { return opts_; }

 private:
  int n_;
  int n_electrons_;
  PurifyOptions opts_;
  Eigen::MatrixXd basis_, mq_, mg_;
  Eigen::VectorXd cq_;
  std::vector<std::pair<Eigen::VectorXd, double>> constraints_;
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt_lu_;
};

/// <S^2> as a linear functional of the 2-RDM for a fixed-(Na, Nb) sector.
double s2_expectation(const Rdm2& d2, int n_alpha, int n_beta);
/// <Sz> from the contracted 1-RDM.
double sz_expectation(const Rdm2& d2, int n_electrons);

/// Flat key-value block plus a one-line CSV encoding of the report.
void write_constraint_report(const ConstraintReport& rep, std::ostream& out);
std::string constraint_report_csv_header();
std::string constraint_report_csv_row(const ConstraintReport& rep);

}  // namespace rdmtk
