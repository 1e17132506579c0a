#include "rdmtk/rdm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdmtk {

Rdm1 Rdm1::from_data(Eigen::MatrixXd m, double tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("Rdm1: matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("Rdm1: input is not Hermitian");
  Rdm1 d(static_cast<int>(m.rows()));
  d.data = std::move(m);
  return d;
}

double Rdm2::trace() const {
  double t = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) t += data(i, j, i, j);
  return t;
}

double Rdm2::antisymmetry_violation() const {
  double m = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l) {
          m = std::max(m, std::abs(data(i, j, k, l) + data(j, i, k, l)));
          m = std::max(m, std::abs(data(i, j, k, l) + data(i, j, l, k)));
        }
  return m;
}

double Rdm2::hermiticity_violation() const {
  double m = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          m = std::max(m, std::abs(data(i, j, k, l) - data(k, l, i, j)));
  return m;
}

void Rdm2::enforce_symmetries() {
  Tensor4 out(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          out(i, j, k, l) = 0.125 * (data(i, j, k, l) - data(j, i, k, l) - data(i, j, l, k) +
                                     data(j, i, l, k) + data(k, l, i, j) - data(l, k, i, j) -
                                     data(k, l, j, i) + data(l, k, j, i));
  data = std::move(out);
}

Rdm2 Rdm2::from_data(Tensor4 t, double tol) {
  Rdm2 d(t.dim());
  d.data = std::move(t);
  if (d.antisymmetry_violation() > tol)
    throw std::invalid_argument("Rdm2: input violates index-pair antisymmetry");
  if (d.hermiticity_violation() > tol)
    throw std::invalid_argument("Rdm2: input violates Hermiticity");
  return d;
}

double Rdm3::trace() const {
  double t = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) t += data(i, j, k, i, j, k);
  return t;
}

Tensor4 wedge11(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw std::invalid_argument("wedge11: dimension mismatch");
  const int n = static_cast<int>(a.rows());
  Tensor4 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out(i, j, k, l) = 0.25 * (a(i, k) * b(j, l) - a(i, l) * b(j, k) - a(j, k) * b(i, l) +
                                    a(j, l) * b(i, k));
  return out;
}

CumulantPair cumulant2(const Rdm2& d2, const Rdm1& d1) {
  if (d2.dim != d1.dim) throw std::invalid_argument("cumulant2: dimension mismatch");
  const int n = d1.dim;
  CumulantPair out;
  out.delta2 = Tensor4(n);
  const auto& d = d1.data;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out.delta2(i, j, k, l) =
              d2.data(i, j, k, l) - (d(i, k) * d(j, l) - d(i, l) * d(j, k));
  return out;
}

Rdm3 valdemoro3(const Rdm2& d2, const Rdm1& d1) {
  if (d2.dim != d1.dim) throw std::invalid_argument("valdemoro3: dimension mismatch");
  const int n = d1.dim;
  const auto& d = d1.data;
  Tensor4 c = cumulant2(d2, d1).delta2;

  Rdm3 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int q = 0; q < n; ++q)
          for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) {
              // 3x3 determinant of 1-RDM elements.
              double det = d(i, q) * (d(j, s) * d(k, t) - d(j, t) * d(k, s)) -
                           d(i, s) * (d(j, q) * d(k, t) - d(j, t) * d(k, q)) +
                           d(i, t) * (d(j, q) * d(k, s) - d(j, s) * d(k, q));
              // Antisymmetrized 1-RDM x cumulant cross terms.
              double cross = d(i, q) * c(j, k, s, t) - d(i, s) * c(j, k, q, t) +
                             d(i, t) * c(j, k, q, s) - d(j, q) * c(i, k, s, t) +
                             d(j, s) * c(i, k, q, t) - d(j, t) * c(i, k, q, s) +
                             d(k, q) * c(i, j, s, t) - d(k, s) * c(i, j, q, t) +
                             d(k, t) * c(i, j, q, s);
              out.data(i, j, k, q, s, t) = det + cross;
            }
  return out;
}

Rdm1 contract_2to1(const Rdm2& d2, int n_electrons) {
  if (n_electrons < 2) throw std::invalid_argument("contract_2to1: need at least 2 electrons");
  const int n = d2.dim;
  Rdm1 out(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += d2.data(i, j, k, j);
      out.data(i, k) = s / (n_electrons - 1);
    }
  return out;
}

NaturalOccupations natural_occupations(const Rdm1& d1) {
  if ((d1.data - d1.data.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("natural_occupations: 1-RDM is not Hermitian");
  if (d1.dim % 2 != 0)
    throw std::invalid_argument("natural_occupations: spin-orbital dimension must be even");
  const int r = d1.dim / 2;
  Eigen::MatrixXd spatial = Eigen::MatrixXd::Zero(r, r);
  for (int p = 0; p < r; ++p)
    for (int q = 0; q < r; ++q)
      spatial(p, q) = d1.data(2 * p, 2 * q) + d1.data(2 * p + 1, 2 * q + 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spatial);
  NaturalOccupations out;
  out.values = es.eigenvalues().reverse();
  int n_electrons = static_cast<int>(std::lround(d1.trace()));
  int occ = (n_electrons + 1) / 2;  // orbitals below the N/2 boundary
  if (occ < 1 || occ >= r + 1)
    throw std::invalid_argument("natural_occupations: electron count incompatible with basis");
  out.hono = out.values(occ - 1);
  out.luno = (occ < r) ? out.values(occ) : 0.0;
  return out;
}

double rdm_energy(const SpinHamiltonian& sh, const Rdm1& d1, const Rdm2& d2) {
  if (d1.dim != sh.n_so || d2.dim != sh.n_so)
    throw std::invalid_argument("rdm_energy: dimension mismatch");
  double e1 = (sh.h.array() * d1.data.array()).sum();
  double e2 = 0.0;
  const int n = sh.n_so;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          e2 += 0.5 * sh.v_phys(i, j, k, l) * d2.data(i, j, k, l);
  return sh.core + e1 + e2;
}

double rdm_energy(const IntegralSet& ints, const Rdm1& d1, const Rdm2& d2) {
  return rdm_energy(SpinHamiltonian::from(ints), d1, d2);
}

namespace {

void write_header(std::ostream& out, int rank, int dim, int n_electrons,
                  const std::vector<std::string>& provenance) {
  for (const auto& line : provenance) out << "# " << line << '\n';
  out << rank << ' ' << dim << ' ' << n_electrons << '\n';
}

void emit_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf << '\n';
}

}  // namespace

void write_rdm1(const Rdm1& d1, int n_electrons, std::ostream& out,
                const std::vector<std::string>& provenance) {
  write_header(out, 1, d1.dim, n_electrons, provenance);
  for (int i = 0; i < d1.dim; ++i)
    for (int j = 0; j < d1.dim; ++j)
      if (std::abs(d1.data(i, j)) > 1e-14) {
        out << i << ' ' << j << ' ';
        emit_value(out, d1.data(i, j));
      }
}

void write_rdm2(const Rdm2& d2, int n_electrons, std::ostream& out,
                const std::vector<std::string>& provenance) {
  write_header(out, 2, d2.dim, n_electrons, provenance);
  for (int i = 0; i < d2.dim; ++i)
    for (int j = 0; j < d2.dim; ++j)
      for (int k = 0; k < d2.dim; ++k)
        for (int l = 0; l < d2.dim; ++l)
          if (std::abs(d2.data(i, j, k, l)) > 1e-14) {
            out << i << ' ' << j << ' ' << k << ' ' << l << ' ';
            emit_value(out, d2.data(i, j, k, l));
          }
}

RdmFile read_rdm(std::istream& in, double symmetry_tol) {
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
  if (!next_data_line()) throw std::runtime_error("RDM file: missing header");
  RdmFile out;
  int dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> out.rank >> dim >> out.n_electrons))
      throw std::runtime_error("RDM file line " + std::to_string(lineno) +
                               ": expected `rank dim n_electrons`");
  }
  if (out.rank != 1 && out.rank != 2)
    throw std::runtime_error("RDM file: unsupported rank " + std::to_string(out.rank));
  if (dim <= 0) throw std::runtime_error("RDM file: nonpositive dimension");

  Eigen::MatrixXd m1;
  Tensor4 m2;
  if (out.rank == 1) m1 = Eigen::MatrixXd::Zero(dim, dim);
  if (out.rank == 2) m2 = Tensor4(dim);

  while (next_data_line()) {
    std::istringstream ls(line);
    if (out.rank == 1) {
      int i, j;
      double v;
      if (!(ls >> i >> j >> v))
        throw std::runtime_error("RDM file line " + std::to_string(lineno) + ": bad record");
      if (i < 0 || i >= dim || j < 0 || j >= dim)
        throw std::runtime_error("RDM file line " + std::to_string(lineno) + ": index bounds");
      m1(i, j) = v;
    } else {
      int i, j, k, l;
      double v;
      if (!(ls >> i >> j >> k >> l >> v))
        throw std::runtime_error("RDM file line " + std::to_string(lineno) + ": bad record");
      if (i < 0 || i >= dim || j < 0 || j >= dim || k < 0 || k >= dim || l < 0 || l >= dim)
        throw std::runtime_error("RDM file line " + std::to_string(lineno) + ": index bounds");
      m2(i, j, k, l) = v;
    }
  }
  if (out.rank == 1) out.d1 = Rdm1::from_data(std::move(m1), symmetry_tol);
  if (out.rank == 2) out.d2 = Rdm2::from_data(std::move(m2), symmetry_tol);
  return out;
}

RdmFile read_rdm_file(const std::string& path, double symmetry_tol) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open RDM file: " + path);
  return read_rdm(in, symmetry_tol);
}

}  // namespace rdmtk
