#include "rdmtk/fci.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdmtk {

namespace {

// Parity of occupied bits strictly below position p.
inline int parity_below(uint64_t mask, int p) {
  uint64_t below = mask & ((1ull << p) - 1);
  return (std::popcount(below) & 1) ? -1 : 1;
}

// Enumerate n_bits-choose-k masks in ascending order (Gosper's hack).
std::vector<uint32_t> combinations(int n_bits, int k) {
  std::vector<uint32_t> out;
  if (k == 0) {
    out.push_back(0);
    return out;
  }
  if (k > n_bits) return out;
  uint32_t v = (1u << k) - 1;
  const uint32_t limit = 1u << n_bits;
  while (v < limit) {
    out.push_back(v);
    if (k == n_bits) break;
    uint32_t t = v | (v - 1);
    v = (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
  }
  return out;
}

}  // namespace

std::shared_ptr<const DeterminantBasis> DeterminantBasis::build(int n_spatial, int n_alpha,
                                                                int n_beta) {
  if (n_spatial <= 0 || n_spatial > 30)
    throw std::invalid_argument("DeterminantBasis: n_spatial out of range");
  if (n_alpha < 0 || n_beta < 0 || n_alpha > n_spatial || n_beta > n_spatial)
    throw std::invalid_argument("DeterminantBasis: bad electron counts");
  auto basis = std::make_shared<DeterminantBasis>();
  basis->n_spatial_ = n_spatial;
  basis->n_alpha_ = n_alpha;
  basis->n_beta_ = n_beta;
  auto alphas = combinations(n_spatial, n_alpha);
  auto betas = combinations(n_spatial, n_beta);
  basis->dets_.reserve(alphas.size() * betas.size());
  for (uint32_t a : alphas)
    for (uint32_t b : betas) basis->dets_.push_back(Det{a, b});
  basis->index_.reserve(basis->dets_.size());
  for (int i = 0; i < basis->size(); ++i)
    basis->index_.emplace(basis->dets_[i].combined(n_spatial), i);
  return basis;
}

int DeterminantBasis::index_of(uint64_t combined_mask) const {
  auto it = index_.find(combined_mask);
  return it == index_.end() ? -1 : it->second;
}

CiState CiState::from_coeffs(std::shared_ptr<const DeterminantBasis> basis,
                             Eigen::VectorXd coeffs, double norm_tol) {
  if (!basis || coeffs.size() != basis->size())
    throw std::invalid_argument("CiState: coefficient size mismatch");
  if (std::abs(coeffs.norm() - 1.0) > norm_tol)
    throw std::invalid_argument("CiState: coefficients are not unit-normalized");
  return CiState{std::move(basis), std::move(coeffs)};
}

CiState CiState::determinant(std::shared_ptr<const DeterminantBasis> basis, const Det& d) {
  int idx = basis->index_of(d.combined(basis->n_spatial()));
  if (idx < 0) throw std::invalid_argument("CiState: determinant outside the basis sector");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis->size());
  c(idx) = 1.0;
  return CiState{std::move(basis), std::move(c)};
}

Eigen::VectorXd apply_hamiltonian(const SpinHamiltonian& sh, const CiState& state) {
  const auto& basis = *state.basis;
  if (sh.n_so != basis.n_spin_orbitals())
    throw std::invalid_argument("apply_hamiltonian: dimension mismatch");
  const int n_so = sh.n_so;
  const auto& v = sh.v_phys;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.size());

  std::vector<int> occ, vir;
  for (int m = 0; m < basis.size(); ++m) {
    double c = state.coeffs(m);
    if (c == 0.0) continue;
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    occ.clear();
    vir.clear();
    for (int p = 0; p < n_so; ++p) ((dmask >> p) & 1 ? occ : vir).push_back(p);

    // Diagonal.
    double diag = sh.core;
    for (int p : occ) diag += sh.h(p, p);
    for (size_t a = 0; a < occ.size(); ++a)
      for (size_t b = a + 1; b < occ.size(); ++b) {
        int p = occ[a], q = occ[b];
        diag += v(p, q, p, q) - v(p, q, q, p);
      }
    out(m) += diag * c;

    // Single excitations p -> q, same spin.
    for (int p : occ)
      for (int q : vir) {
        if ((p & 1) != (q & 1)) continue;
        double elem = sh.h(q, p);
        for (int r : occ) {
          if (r == p) continue;
          elem += v(q, r, p, r) - v(q, r, r, p);
        }
        if (elem == 0.0) continue;
        uint64_t m1 = dmask;
        int sgn = parity_below(m1, p);
        m1 ^= 1ull << p;
        sgn *= parity_below(m1, q);
        m1 |= 1ull << q;
        int target = basis.index_of(m1);
        if (target >= 0) out(target) += sgn * elem * c;
      }

    // Double excitations {p<q} -> {r<s}.
    for (size_t a = 0; a < occ.size(); ++a)
      for (size_t b = a + 1; b < occ.size(); ++b) {
        int p = occ[a], q = occ[b];
        for (size_t x = 0; x < vir.size(); ++x)
          for (size_t y = x + 1; y < vir.size(); ++y) {
            int r = vir[x], s = vir[y];
            if ((p & 1) + (q & 1) != (r & 1) + (s & 1)) continue;
            double elem = v(r, s, p, q) - v(r, s, q, p);
            if (elem == 0.0) continue;
            // Phase of a+_r a+_s a_q a_p |D>.
            uint64_t m1 = dmask;
            int sgn = parity_below(m1, p);
            m1 ^= 1ull << p;
            sgn *= parity_below(m1, q);
            m1 ^= 1ull << q;
            sgn *= parity_below(m1, s);
            m1 |= 1ull << s;
            sgn *= parity_below(m1, r);
            m1 |= 1ull << r;
            int target = basis.index_of(m1);
            if (target >= 0) out(target) += sgn * elem * c;
          }
      }
  }
  return out;
}

Eigen::VectorXd apply_two_body(const Tensor4& coeff, const CiState& state) {
  const auto& basis = *state.basis;
  const int n_so = basis.n_spin_orbitals();
  if (coeff.dim() != n_so) throw std::invalid_argument("apply_two_body: dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.size());

  for (int m = 0; m < basis.size(); ++m) {
    double c = state.coeffs(m);
    if (c == 0.0) continue;
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    for (int k = 0; k < n_so; ++k) {
      if (!((dmask >> k) & 1)) continue;
      uint64_t m1 = dmask;
      int s1 = parity_below(m1, k);
      m1 ^= 1ull << k;
      for (int l = 0; l < n_so; ++l) {
        if (!((m1 >> l) & 1)) continue;
        uint64_t m2 = m1;
        int s2 = s1 * parity_below(m2, l);
        m2 ^= 1ull << l;
        for (int j = 0; j < n_so; ++j) {
          if ((m2 >> j) & 1) continue;
          uint64_t m3 = m2;
          int s3 = s2 * parity_below(m3, j);
          m3 |= 1ull << j;
          for (int i = 0; i < n_so; ++i) {
            if ((m3 >> i) & 1) continue;
            double w = coeff(i, j, k, l);
            if (w == 0.0) continue;
            int s4 = s3 * parity_below(m3, i);
            int target = basis.index_of(m3 | (1ull << i));
            if (target >= 0) out(target) += w * s4 * c;
          }
        }
      }
    }
  }
  return out;
}

namespace {

Eigen::VectorXd hamiltonian_diagonal(const SpinHamiltonian& sh, const DeterminantBasis& basis) {
  Eigen::VectorXd diag(basis.size());
  std::vector<int> occ;
  for (int m = 0; m < basis.size(); ++m) {
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    double d = sh.core;
    occ.clear();
    for (int p = 0; p < sh.n_so; ++p)
      if ((dmask >> p) & 1) occ.push_back(p);
    for (int p : occ) d += sh.h(p, p);
    for (size_t a = 0; a < occ.size(); ++a)
      for (size_t b = a + 1; b < occ.size(); ++b)
        d += sh.v_phys(occ[a], occ[b], occ[a], occ[b]) -
             sh.v_phys(occ[a], occ[b], occ[b], occ[a]);
    diag(m) = d;
  }
  return diag;
}

void fix_sign(Eigen::VectorXd& c) {
  int arg = 0;
  c.cwiseAbs().maxCoeff(&arg);
  if (c(arg) < 0) c *= -1.0;
}

GroundStateResult solve_dense(const SpinHamiltonian& sh,
                              std::shared_ptr<const DeterminantBasis> basis) {
  const int dim = basis->size();
  Eigen::MatrixXd H(dim, dim);
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
    unit(j) = 1.0;
    H.col(j) = apply_hamiltonian(sh, CiState{basis, std::move(unit)});
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  GroundStateResult res;
  res.energy = es.eigenvalues()(0);
  Eigen::VectorXd c = es.eigenvectors().col(0);
  fix_sign(c);
  res.state = CiState{std::move(basis), std::move(c)};
  res.iterations = 0;
  return res;
}

GroundStateResult solve_davidson(const SpinHamiltonian& sh,
                                 std::shared_ptr<const DeterminantBasis> basis,
                                 const GroundStateOptions& opts) {
  const int dim = basis->size();
  const int max_sub = std::min(opts.max_subspace, dim);
  Eigen::VectorXd diag = hamiltonian_diagonal(sh, *basis);

  auto matvec = [&](const Eigen::VectorXd& x) {
    return apply_hamiltonian(sh, CiState{basis, x});
  };

  // Start from the lowest-diagonal determinant.
  int start = 0;
  diag.minCoeff(&start);
  Eigen::MatrixXd V(dim, max_sub), HV(dim, max_sub);
  V.col(0) = Eigen::VectorXd::Unit(dim, start);
  HV.col(0) = matvec(V.col(0));
  int nsub = 1;

  double theta = 0.0;
  Eigen::VectorXd ritz = V.col(0);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::MatrixXd S = V.leftCols(nsub).transpose() * HV.leftCols(nsub);
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    theta = es.eigenvalues()(0);
    Eigen::VectorXd y = es.eigenvectors().col(0);
    ritz = V.leftCols(nsub) * y;
    Eigen::VectorXd residual = HV.leftCols(nsub) * y - theta * ritz;
    if (residual.norm() < opts.residual_tol) {
      fix_sign(ritz);
      return GroundStateResult{theta, CiState{std::move(basis), std::move(ritz)}, it};
    }
    if (nsub == max_sub) {
      // Collapse the subspace to the current Ritz vector.
      V.col(0) = ritz;
      HV.col(0) = HV.leftCols(nsub) * y;
      nsub = 1;
    }
    // Diagonal (Davidson) preconditioner.
    Eigen::VectorXd t(dim);
    for (int i = 0; i < dim; ++i) {
      double denom = theta - diag(i);
      if (std::abs(denom) < 1e-8) denom = (denom < 0 ? -1e-8 : 1e-8);
      t(i) = residual(i) / denom;
    }
    // Orthogonalize twice against the current subspace.
    for (int pass = 0; pass < 2; ++pass)
      t -= V.leftCols(nsub) * (V.leftCols(nsub).transpose() * t);
    double tn = t.norm();
    if (tn < 1e-12) {
      fix_sign(ritz);
      return GroundStateResult{theta, CiState{std::move(basis), std::move(ritz)}, it};
    }
    V.col(nsub) = t / tn;
    HV.col(nsub) = matvec(V.col(nsub));
    ++nsub;
  }
  throw std::runtime_error("ground_state: Davidson failed to converge");
}

}  // namespace

GroundStateResult ground_state(const SpinHamiltonian& sh,
                               std::shared_ptr<const DeterminantBasis> basis,
                               const GroundStateOptions& opts) {
  if (basis->size() < 1) throw std::invalid_argument("ground_state: empty basis");
  if (static_cast<long>(basis->size()) > 1000000)
    throw std::invalid_argument("ground_state: basis larger than 1e6 determinants");
  bool dense = opts.method == GroundStateOptions::Method::Dense ||
               (opts.method == GroundStateOptions::Method::Auto &&
                basis->size() <= opts.dense_threshold);
  return dense ? solve_dense(sh, std::move(basis)) : solve_davidson(sh, std::move(basis), opts);
}

GroundStateResult ground_state(const IntegralSet& ints, int n_alpha, int n_beta,
                               const GroundStateOptions& opts) {
  auto basis = DeterminantBasis::build(ints.n_spatial, n_alpha, n_beta);
  return ground_state(SpinHamiltonian::from(ints), std::move(basis), opts);
}

Tensor4 transition_rdm2(const CiState& bra, const CiState& ket) {
  if (bra.basis != ket.basis && bra.basis->size() != ket.basis->size())
    throw std::invalid_argument("transition_rdm2: mismatched bases");
  const auto& basis = *ket.basis;
  const int n_so = basis.n_spin_orbitals();
  Tensor4 out(n_so);

  for (int m = 0; m < basis.size(); ++m) {
    double c = ket.coeffs(m);
    if (c == 0.0) continue;
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    for (int k = 0; k < n_so; ++k) {
      if (!((dmask >> k) & 1)) continue;
      uint64_t m1 = dmask;
      int s1 = parity_below(m1, k);
      m1 ^= 1ull << k;
      for (int l = 0; l < n_so; ++l) {
        if (!((m1 >> l) & 1)) continue;
        uint64_t m2 = m1;
        int s2 = s1 * parity_below(m2, l);
        m2 ^= 1ull << l;
        for (int j = 0; j < n_so; ++j) {
          if ((m2 >> j) & 1) continue;
          uint64_t m3 = m2;
          int s3 = s2 * parity_below(m3, j);
          m3 |= 1ull << j;
          for (int i = 0; i < n_so; ++i) {
            if ((m3 >> i) & 1) continue;
            int s4 = s3 * parity_below(m3, i);
            int target = basis.index_of(m3 | (1ull << i));
            if (target >= 0) out(i, j, k, l) += bra.coeffs(target) * c * s4;
          }
        }
      }
    }
  }
  return out;
}

std::pair<Rdm1, Rdm2> measure_rdms(const CiState& state) {
  const auto& basis = *state.basis;
  const int n_so = basis.n_spin_orbitals();

  Rdm1 d1(n_so);
  for (int m = 0; m < basis.size(); ++m) {
    double c = state.coeffs(m);
    if (c == 0.0) continue;
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    for (int q = 0; q < n_so; ++q) {
      if (!((dmask >> q) & 1)) continue;
      uint64_t m1 = dmask ^ (1ull << q);
      int s1 = parity_below(dmask, q);
      for (int i = 0; i < n_so; ++i) {
        if ((m1 >> i) & 1) continue;
        int s2 = s1 * parity_below(m1, i);
        int target = basis.index_of(m1 | (1ull << i));
        if (target >= 0) d1.data(i, q) += state.coeffs(target) * c * s2;
      }
    }
  }

  Rdm2 d2(n_so);
  d2.data = transition_rdm2(state, state);
  return {std::move(d1), std::move(d2)};
}

Rdm3 measure_rdm3(const CiState& state) {
  const auto& basis = *state.basis;
  const int n_so = basis.n_spin_orbitals();
  Rdm3 out(n_so);

  for (int m = 0; m < basis.size(); ++m) {
    double c = state.coeffs(m);
    if (c == 0.0) continue;
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    // <a+_i a+_j a+_k a_t a_s a_q> : annihilate q, s, t then create k, j, i.
    for (int q = 0; q < n_so; ++q) {
      if (!((dmask >> q) & 1)) continue;
      uint64_t m1 = dmask ^ (1ull << q);
      int s1 = parity_below(dmask, q);
      for (int s = 0; s < n_so; ++s) {
        if (!((m1 >> s) & 1)) continue;
        uint64_t m2 = m1 ^ (1ull << s);
        int s2 = s1 * parity_below(m1, s);
        for (int t = 0; t < n_so; ++t) {
          if (!((m2 >> t) & 1)) continue;
          uint64_t m3 = m2 ^ (1ull << t);
          int s3 = s2 * parity_below(m2, t);
          for (int k = 0; k < n_so; ++k) {
            if ((m3 >> k) & 1) continue;
            uint64_t m4 = m3 | (1ull << k);
            int s4 = s3 * parity_below(m3, k);
            for (int j = 0; j < n_so; ++j) {
              if ((m4 >> j) & 1) continue;
              uint64_t m5 = m4 | (1ull << j);
              int s5 = s4 * parity_below(m4, j);
              for (int i = 0; i < n_so; ++i) {
                if ((m5 >> i) & 1) continue;
                int s6 = s5 * parity_below(m5, i);
                int target = basis.index_of(m5 | (1ull << i));
                if (target >= 0)
                  out.data(i, j, k, q, s, t) += state.coeffs(target) * c * s6;
              }
            }
          }
        }
      }
    }
  }
  return out;
}

void write_ci_state(const CiState& state, std::ostream& out,
                    const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << '\n';
  const auto& basis = *state.basis;
  out << basis.n_spin_orbitals() << ' ' << basis.n_alpha() << ' ' << basis.n_beta() << '\n';
  char buf[40];
  for (int m = 0; m < basis.size(); ++m) {
    if (state.coeffs(m) == 0.0) continue;
    std::snprintf(buf, sizeof(buf), "%.17g", state.coeffs(m));
    out << basis.det(m).alpha << ' ' << basis.det(m).beta << ' ' << buf << '\n';
  }
}

CiState read_ci_state(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      size_t pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_data_line()) throw std::runtime_error("CiState file: missing header");
  int n_so, n_alpha, n_beta;
  {
    std::istringstream hs(line);
    if (!(hs >> n_so >> n_alpha >> n_beta) || n_so <= 0 || n_so % 2 != 0)
      throw std::runtime_error("CiState file line " + std::to_string(lineno) + ": bad header");
  }
  auto basis = DeterminantBasis::build(n_so / 2, n_alpha, n_beta);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis->size());
  while (next_data_line()) {
    std::istringstream ls(line);
    uint32_t a, b;
    double c;
    if (!(ls >> a >> b >> c))
      throw std::runtime_error("CiState file line " + std::to_string(lineno) + ": bad record");
    int idx = basis->index_of(Det{a, b}.combined(basis->n_spatial()));
    if (idx < 0)
      throw std::runtime_error("CiState file line " + std::to_string(lineno) +
                               ": determinant outside the declared sector");
    coeffs(idx) = c;
  }
  return CiState::from_coeffs(std::move(basis), std::move(coeffs), 1e-10);
}

CiState read_ci_state_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CiState file: " + path);
  return read_ci_state(in);
}

}  // namespace rdmtk
