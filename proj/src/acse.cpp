#include "rdmtk/acse.hpp"

#include "rdmtk/purification.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace rdmtk {

double AMatrix::anti_hermiticity_violation() const {
  double m = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          m = std::max(m, std::abs(data(i, j, k, l) + data(k, l, i, j)));
  return m;
}

void AMatrix::enforce_symmetries() {
  Tensor4 out(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          out(i, j, k, l) = 0.125 * (data(i, j, k, l) - data(j, i, k, l) - data(i, j, l, k) +
                                     data(j, i, l, k) - data(k, l, i, j) + data(l, k, i, j) +
                                     data(k, l, j, i) - data(l, k, j, i));
  data = std::move(out);
}

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("SolverConfig: epsilon must be positive");
  if (!(energy_tol > 0.0) || !(residual_tol > 0.0))
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::energy_converged: return "energy_converged";
    case StopReason::residual_converged: return "residual_converged";
    case StopReason::max_iters: return "max_iters";
    case StopReason::step_underflow: return "step_underflow";
  }
  return "unknown";
}

Tensor4 two_body_commutator(const Tensor4& coeff, const Rdm2& d2, const Rdm3& d3) {
  const int n = d2.dim;
  if (coeff.dim() != n || d3.dim != n)
    throw std::invalid_argument("two_body_commutator: dimension mismatch");
  const int n2 = n * n, n3 = n * n * n;

  using Mat = Eigen::MatrixXd;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Pair-index matrices of the coefficient tensor: C[(p,q),(r,s)] and its
  // lower-pair antisymmetrization Cbar = C^{pq}_{rs} - C^{pq}_{sr}.
  Eigen::Map<const RowMat> cmat(coeff.raw().data(), n2, n2);
  RowMat cbar(n2, n2);
  for (int pq = 0; pq < n2; ++pq)
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) cbar(pq, r * n + s) = cmat(pq, r * n + s) - cmat(pq, s * n + r);

  Eigen::Map<const RowMat> d2mat(d2.data.raw().data(), n2, n2);

  // Scalar (2-RDM) terms: S1 = D2 Cbar^T over (r,s); S2 = Cbar^T D2 over (p,q).
  RowMat s1 = d2mat * cbar.transpose();      // [(i,j),(k,l)]
  RowMat s2 = cbar.transpose() * d2mat;      // [(i,j),(k,l)]

  // 3-RDM terms, contracted as GEMMs over permuted scratch copies.
  // R1[m]((i,j),c) = sum_{qrs} D3(i,j,q,r,s,m) C(c,q,r,s)
  // R2(c,(x,k,l))  = sum_{s} sum_{pq} C(p,q,c,s) D3(p,q,x,k,l,s)
  RowMat cflat(n, n3);  // C(c,(q,r,s))
  for (int c = 0; c < n; ++c)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) cflat(c, (q * n + r) * n + s) = coeff(c, q, r, s);

  std::vector<RowMat> r1(n);
  {
    RowMat scratch(n2, n3);  // D3 with the last index fixed
    for (int m = 0; m < n; ++m) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r)
              for (int s = 0; s < n; ++s)
                scratch(i * n + j, (q * n + r) * n + s) = d3.data(i, j, q, r, s, m);
      r1[m] = scratch * cflat.transpose();  // [(i,j), c]
    }
  }

  RowMat r2 = RowMat::Zero(n, n3);
  {
    RowMat d3s(n2, n3);   // D3(p,q,x,k,l,s) for fixed s: [(p,q),(x,k,l)]
    RowMat cs(n2, n);     // C(p,q,c,s) for fixed s: [(p,q),c]
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          for (int x = 0; x < n; ++x)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                d3s(p * n + q, (x * n + k) * n + l) = d3.data(p, q, x, k, l, s);
          for (int c = 0; c < n; ++c) cs(p * n + q, c) = coeff(p, q, c, s);
        }
      r2.noalias() += cs.transpose() * d3s;
    }
  }

  Tensor4 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out(i, j, k, l) = s1(i * n + j, k * n + l) - s2(i * n + j, k * n + l) -
                            2.0 * r1[l](i * n + j, k) + 2.0 * r1[k](i * n + j, l) +
                            2.0 * r2(i, (j * n + k) * n + l) - 2.0 * r2(j, (i * n + k) * n + l);
  return out;
}

namespace {

Tensor4 one_body_commutator(const Eigen::MatrixXd& h, const Rdm2& d2) {
  const int n = d2.dim;
  Tensor4 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int q = 0; q < n; ++q)
            s += h(k, q) * d2.data(i, j, q, l) - h(l, q) * d2.data(i, j, q, k) -
                 h(q, i) * d2.data(q, j, k, l) + h(q, j) * d2.data(q, i, k, l);
          out(i, j, k, l) = s;
        }
  return out;
}

}  // namespace

AMatrix acse_residual(const SpinHamiltonian& sh, const Rdm1& d1, const Rdm2& d2,
                      const Rdm3& d3) {
  const int n = sh.n_so;
  if (d1.dim != n || d2.dim != n || d3.dim != n)
    throw std::invalid_argument("acse_residual: dimension mismatch");
  (void)d1;  // the 1-RDM enters through the contractions already folded into d2

  Tensor4 vcoeff(n);
  for (size_t i = 0; i < vcoeff.raw().size(); ++i)
    vcoeff.raw()[i] = 0.5 * sh.v_phys.raw()[i];

  Tensor4 two = two_body_commutator(vcoeff, d2, d3);
  Tensor4 one = one_body_commutator(sh.h, d2);

  AMatrix a(n);
  for (size_t i = 0; i < a.data.raw().size(); ++i) a.data.raw()[i] = one.raw()[i] + two.raw()[i];
  a.enforce_symmetries();
  return a;
}

AMatrix acse_residual(const IntegralSet& ints, const Rdm1& d1, const Rdm2& d2, const Rdm3& d3) {
  return acse_residual(SpinHamiltonian::from(ints), d1, d2, d3);
}

CiState step_statevector(const CiState& state, const AMatrix& a, double epsilon) {
  if (a.dim != state.basis->n_spin_orbitals())
    throw std::invalid_argument("step_statevector: dimension mismatch");
  if (epsilon == 0.0) return state;

  // Sub-step so the Taylor series of exp(eps A / m) converges fast.
  double scale = std::abs(epsilon) * a.frobenius_norm();
  int substeps = std::max(1, static_cast<int>(std::ceil(scale)));
  double h = epsilon / substeps;

  Eigen::VectorXd w = state.coeffs;
  for (int step = 0; step < substeps; ++step) {
    Eigen::VectorXd term = w;
    Eigen::VectorXd acc = w;
    bool converged = false;
    for (int k = 1; k <= 60; ++k) {
      term = (h / k) * apply_two_body(a.data, CiState{state.basis, term});
      acc += term;
      if (term.norm() < 1e-17 * acc.norm()) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw std::runtime_error("step_statevector: matrix exponential did not converge");
    w = acc;
  }
  double nrm = w.norm();
  if (std::abs(nrm - 1.0) > 1e-10)
    throw std::runtime_error("step_statevector: unitarity lost (generator not anti-Hermitian?)");
  w /= nrm;
  return CiState{state.basis, std::move(w)};
}

std::pair<Rdm1, Rdm2> step_rdm(const Rdm1& d1, const Rdm2& d2, const AMatrix& a, double epsilon,
                               int n_electrons) {
  if (d1.dim != d2.dim || a.dim != d2.dim)
    throw std::invalid_argument("step_rdm: dimension mismatch");
  const int n = d2.dim;
  const double target_trace = static_cast<double>(n_electrons) * (n_electrons - 1);

  Rdm3 d3 = valdemoro3(d2, d1);
  Tensor4 derivative = two_body_commutator(a.data, d2, d3);

  Rdm2 out(n);
  for (size_t i = 0; i < out.data.raw().size(); ++i)
    out.data.raw()[i] = d2.data.raw()[i] + epsilon * derivative.raw()[i];
  out.enforce_symmetries();

  double tr = out.trace();
  if (std::abs(tr - target_trace) > 0.1)
    throw std::runtime_error("step_rdm: trace drift exceeds 0.1, propagation unstable");
  if (tr != 0.0) {
    double rescale = target_trace / tr;
    for (auto& x : out.data.raw()) x *= rescale;
  }
  return {contract_2to1(out, n_electrons), std::move(out)};
}

namespace {

struct StatevectorEngine {
  const SpinHamiltonian& sh;

  double energy(const CiState& s) const {
    return s.coeffs.dot(apply_hamiltonian(sh, s));
  }
  AMatrix residual(const CiState& s) const {
    auto [d1, d2] = measure_rdms(s);
    Rdm3 d3 = measure_rdm3(s);
    return acse_residual(sh, d1, d2, d3);
  }
};

struct RdmEngine {
  const SpinHamiltonian& sh;
  int n_electrons;

  double energy(const Rdm1& d1, const Rdm2& d2) const { return rdm_energy(sh, d1, d2); }
  AMatrix residual(const Rdm1& d1, const Rdm2& d2) const {
    return acse_residual(sh, d1, d2, valdemoro3(d2, d1));
  }
};

constexpr double kMinEpsilon = 1e-6;

}  // namespace

AcseTrace solve_acse(const IntegralSet& ints, const CiState& seed, const SolverConfig& cfg) {
  cfg.validate();
  auto sh = SpinHamiltonian::from(ints);

  if (cfg.mode == SolverMode::cumulant_rdm) {
    auto [d1, d2] = measure_rdms(seed);
    return solve_acse(ints, d1, d2, cfg);
  }

  StatevectorEngine engine{sh};
  AcseTrace trace;
  CiState current = seed;
  double energy = engine.energy(current);
  double eps = cfg.epsilon;
  double last_delta = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= cfg.max_iters; ++iter) {
    AMatrix a = engine.residual(current);
    double rnorm = a.frobenius_norm();
    trace.iterations.push_back({iter, energy, rnorm, eps});
    if (rnorm <= cfg.residual_tol) {
      trace.reason = StopReason::residual_converged;
      trace.converged = true;
      break;
    }
    if (last_delta < cfg.energy_tol) {
      trace.reason = StopReason::energy_converged;
      trace.converged = true;
      break;
    }
    if (iter == cfg.max_iters) {
      trace.reason = StopReason::max_iters;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      CiState proposal = step_statevector(current, a, eps);
      double e_new = engine.energy(proposal);
      if (cfg.step_control == StepControl::fixed || e_new <= energy) {
        last_delta = std::abs(e_new - energy);
        current = std::move(proposal);
        energy = e_new;
        accepted = true;
      } else {
        eps *= 0.5;
        if (eps < kMinEpsilon) break;
      }
    }
    if (!accepted) {
      trace.reason = StopReason::step_underflow;
      break;
    }
  }

  auto [d1, d2] = measure_rdms(current);
  trace.final_d1 = std::move(d1);
  trace.final_d2 = std::move(d2);
  trace.final_state = std::move(current);
  trace.final_energy = energy;
  return trace;
}

AcseTrace solve_acse(const IntegralSet& ints, const Rdm1& seed_d1, const Rdm2& seed_d2,
                     const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.mode == SolverMode::statevector)
    throw std::invalid_argument("solve_acse: statevector mode requires a CiState seed");
  auto sh = SpinHamiltonian::from(ints);
  const int nelec = ints.n_electrons();
  RdmEngine engine{sh, nelec};

  // The first-order cumulant propagation alone walks off the N-representable
  // set, where the energy functional is unbounded below; each accepted step
  // is therefore pulled back onto the DQG-feasible set. The projection keeps
  // the energy bounded and gives the iteration its natural stall near the
  // reconstructed fixed point.
  PurifyOptions popts;
  popts.tol = 1e-7;
  popts.max_iters = 120;
  DqgProjector projector(seed_d2.dim, nelec, popts);

  AcseTrace trace;
  Rdm1 d1 = seed_d1;
  Rdm2 d2 = seed_d2;
  double energy = engine.energy(d1, d2);
  double eps = cfg.epsilon;
  double last_delta = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= cfg.max_iters; ++iter) {
    AMatrix a = engine.residual(d1, d2);
    double rnorm = a.frobenius_norm();
    trace.iterations.push_back({iter, energy, rnorm, eps});
    if (rnorm <= cfg.residual_tol) {
      trace.reason = StopReason::residual_converged;
      trace.converged = true;
      break;
    }
    if (last_delta < cfg.energy_tol) {
      trace.reason = StopReason::energy_converged;
      trace.converged = true;
      break;
    }
    if (iter == cfg.max_iters) {
      trace.reason = StopReason::max_iters;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      std::pair<Rdm1, Rdm2> proposal;
      bool step_ok = true;
      try {
        proposal = step_rdm(d1, d2, a, eps, nelec);
        proposal.second = projector.project(proposal.second).first;
        proposal.first = contract_2to1(proposal.second, nelec);
      } catch (const std::runtime_error&) {
        step_ok = false;  // unstable step: treat like an energy increase
      }
      double e_new = step_ok ? engine.energy(proposal.first, proposal.second) : 0.0;
      if (step_ok && (cfg.step_control == StepControl::fixed || e_new <= energy)) {
        last_delta = std::abs(e_new - energy);
        d1 = std::move(proposal.first);
        d2 = std::move(proposal.second);
        energy = e_new;
        accepted = true;
      } else {
        eps *= 0.5;
        if (eps < kMinEpsilon) break;
      }
    }
    if (!accepted) {
      trace.reason = StopReason::step_underflow;
      break;
    }
  }

  trace.final_d1 = std::move(d1);
  trace.final_d2 = std::move(d2);
  trace.final_energy = energy;
  return trace;
}

void write_acse_trace_csv(const AcseTrace& trace, std::ostream& out,
                          const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << '\n';
  out << "iter,energy,residual_norm,epsilon\n";
  char buf[128];
  for (const auto& it : trace.iterations) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", it.iter, it.energy, it.residual_norm,
                  it.epsilon);
    out << buf << '\n';
  }
}

}  // namespace rdmtk
