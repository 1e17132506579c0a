#include "rdmtk/integrals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdmtk {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void IntegralSet::validate(double tol) const {
  if (n_spatial <= 0) fail("IntegralSet: n_spatial must be positive");
  if (n_alpha < 0 || n_beta < 0) fail("IntegralSet: negative electron count");
  if (n_alpha + n_beta > 2 * n_spatial)
    fail("IntegralSet: electron count exceeds spin-orbital count");
  if (one_body.rows() != n_spatial || one_body.cols() != n_spatial)
    fail("IntegralSet: one_body dimension mismatch");
  if (two_body.dim() != n_spatial) fail("IntegralSet: two_body dimension mismatch");

  double scale = std::max(1.0, one_body.cwiseAbs().maxCoeff());
  if ((one_body - one_body.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("IntegralSet: one_body is not symmetric");

  const int r = n_spatial;
  double vscale = std::max(1.0, two_body.max_abs());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < r; ++k)
        for (int l = 0; l <= k; ++l) {
          double v = two_body(i, j, k, l);
          const std::array<double, 7> images = {
              two_body(j, i, k, l), two_body(i, j, l, k), two_body(j, i, l, k),
              two_body(k, l, i, j), two_body(l, k, i, j), two_body(k, l, j, i),
              two_body(l, k, j, i)};
          for (double w : images)
            if (std::abs(v - w) > tol * vscale)
              throw std::invalid_argument(
                  "IntegralSet: two_body violates 8-fold permutational symmetry");
        }
}

void Geometry::validate() const {
  if (atoms.empty()) fail("Geometry: no atoms");
  if (shells.size() != atoms.size()) fail("Geometry: one basis shell per atom required");
  for (const auto& sh : shells) {
    if (sh.exponents.empty() || sh.exponents.size() != sh.coefficients.size())
      fail("Geometry: contraction lists must be nonempty and matched");
    for (double e : sh.exponents)
      if (!(e > 0.0)) fail("Geometry: Gaussian exponents must be strictly positive");
  }
}

double boys_f0(double t) {
  if (t < 0.0) fail("boys_f0: negative argument");
  if (t < 12.0) {
    // F0(t) = exp(-t) * sum_k (2t)^k / (2k+1)!!  -- all terms positive.
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= 2.0 * t / (2.0 * k + 1.0);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::exp(-t) * sum;
  }
  return 0.5 * std::sqrt(kPi / t) * std::erf(std::sqrt(t));
}

Geometry parse_geometry(std::istream& in) {
  Geometry geom;
  std::string line;
  int lineno = 0;
  bool in_basis = false;
  ContractedS current;
  auto flush_basis = [&]() {
    geom.shells.push_back(current);
    current = ContractedS{};
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    std::string key = lower(first);
    if (key == "basis") {
      if (in_basis) fail("geometry line " + std::to_string(lineno) + ": nested basis block");
      in_basis = true;
      continue;
    }
    if (key == "end") {
      if (!in_basis) fail("geometry line " + std::to_string(lineno) + ": stray end");
      in_basis = false;
      flush_basis();
      continue;
    }
    if (in_basis) {
      double e, c;
      std::istringstream bs(line);
      if (!(bs >> e >> c))
        fail("geometry line " + std::to_string(lineno) + ": expected `exponent coefficient`");
      current.exponents.push_back(e);
      current.coefficients.push_back(c);
      continue;
    }
    Atom a;
    a.element = first;
    if (!(ls >> a.charge >> a.center.x() >> a.center.y() >> a.center.z()))
      fail("geometry line " + std::to_string(lineno) + ": expected `element Z x y z`");
    geom.atoms.push_back(a);
  }
  if (in_basis) fail("geometry: unterminated basis block");
  if (geom.shells.size() == 1 && geom.atoms.size() > 1)
    geom.shells.assign(geom.atoms.size(), geom.shells.front());
  geom.validate();
  return geom;
}

Geometry parse_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open geometry file: " + path);
  return parse_geometry(in);
}

namespace {

double primitive_norm(double alpha) { return std::pow(2.0 * alpha / kPi, 0.75); }

struct PrimPair {
  double p;      // alpha + beta
  double pref;   // c_a c_b N_a N_b exp(-xi |A-B|^2)
  Eigen::Vector3d center;  // (alpha A + beta B)/p
};

// Expand all primitive pairs between two contracted shells.
std::vector<PrimPair> prim_pairs(const ContractedS& sa, const Eigen::Vector3d& A,
                                 const ContractedS& sb, const Eigen::Vector3d& B) {
  std::vector<PrimPair> out;
  double r2 = (A - B).squaredNorm();
  for (size_t ia = 0; ia < sa.exponents.size(); ++ia)
    for (size_t ib = 0; ib < sb.exponents.size(); ++ib) {
      double a = sa.exponents[ia], b = sb.exponents[ib];
      double p = a + b;
      double xi = a * b / p;
      PrimPair pp;
      pp.p = p;
      pp.pref = sa.coefficients[ia] * sb.coefficients[ib] * primitive_norm(a) *
                primitive_norm(b) * std::exp(-xi * r2);
      pp.center = (a * A + b * B) / p;
      out.push_back(pp);
    }
  return out;
}

}  // namespace

BuiltSystem build_h_system_full(const Geometry& geom, int n_alpha, int n_beta) {
  geom.validate();
  const int n = static_cast<int>(geom.atoms.size());

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const auto& A = geom.atoms[i].center;
      const auto& B = geom.atoms[j].center;
      double s = 0.0, t = 0.0, v = 0.0;
      double r2 = (A - B).squaredNorm();
      for (size_t ia = 0; ia < geom.shells[i].exponents.size(); ++ia)
        for (size_t ib = 0; ib < geom.shells[j].exponents.size(); ++ib) {
          double a = geom.shells[i].exponents[ia];
          double b = geom.shells[j].exponents[ib];
          double p = a + b;
          double xi = a * b / p;
          double pref = geom.shells[i].coefficients[ia] * geom.shells[j].coefficients[ib] *
                        primitive_norm(a) * primitive_norm(b) * std::exp(-xi * r2);
          double s_ab = pref * std::pow(kPi / p, 1.5);
          s += s_ab;
          t += s_ab * xi * (3.0 - 2.0 * xi * r2);
          Eigen::Vector3d P = (a * A + b * B) / p;
          for (const auto& atom : geom.atoms)
            v -= atom.charge * pref * (2.0 * kPi / p) *
                 boys_f0(p * (P - atom.center).squaredNorm());
        }
      S(i, j) = S(j, i) = s;
      T(i, j) = T(j, i) = t;
      V(i, j) = V(j, i) = v;
    }

  // Two-electron repulsion integrals (ij|kl) in the AO basis.
  Tensor4 eri(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      auto bra = prim_pairs(geom.shells[i], geom.atoms[i].center, geom.shells[j],
                            geom.atoms[j].center);
      for (int k = 0; k <= i; ++k)
        for (int l = 0; l <= (k == i ? j : k); ++l) {
          auto ket = prim_pairs(geom.shells[k], geom.atoms[k].center, geom.shells[l],
                                geom.atoms[l].center);
          double val = 0.0;
          for (const auto& pb : bra)
            for (const auto& pk : ket) {
              double denom = pb.p * pk.p * std::sqrt(pb.p + pk.p);
              double tt = pb.p * pk.p / (pb.p + pk.p) * (pb.center - pk.center).squaredNorm();
              val += pb.pref * pk.pref * 2.0 * std::pow(kPi, 2.5) / denom * boys_f0(tt);
            }
          for (const auto& [a, b, c, d] :
               std::array<std::array<int, 4>, 8>{{{i, j, k, l},
                                                  {j, i, k, l},
                                                  {i, j, l, k},
                                                  {j, i, l, k},
                                                  {k, l, i, j},
                                                  {l, k, i, j},
                                                  {k, l, j, i},
                                                  {l, k, j, i}}})
            eri(a, b, c, d) = val;
        }
    }

  // Loewdin orthogonalization X = U s^{-1/2} U^T.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.eigenvalues().minCoeff() < 1e-10)
    throw std::runtime_error("build_h_system: linearly dependent basis (overlap eigenvalue < 1e-10)");
  Eigen::MatrixXd X = es.eigenvectors() *
                      es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                      es.eigenvectors().transpose();

  IntegralSet ao;
  ao.n_spatial = n;
  int nelec_default = 0;
  for (const auto& a : geom.atoms) nelec_default += static_cast<int>(std::lround(a.charge));
  ao.n_alpha = (n_alpha >= 0) ? n_alpha : (nelec_default + 1) / 2;
  ao.n_beta = (n_beta >= 0) ? n_beta : nelec_default / 2;
  ao.one_body = T + V;
  ao.two_body = std::move(eri);
  ao.core_energy = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      ao.core_energy += geom.atoms[i].charge * geom.atoms[j].charge /
                        (geom.atoms[i].center - geom.atoms[j].center).norm();

  BuiltSystem out;
  out.integrals = transform_orbitals(ao, X);
  out.orbital_coeffs = X;
  return out;
}

IntegralSet build_h_system(const Geometry& geom, int n_alpha, int n_beta) {
  return build_h_system_full(geom, n_alpha, n_beta).integrals;
}

IntegralSet transform_orbitals(const IntegralSet& ints, const Eigen::MatrixXd& C) {
  const int r = ints.n_spatial;
  if (C.rows() != r || C.cols() != r)
    fail("transform_orbitals: coefficient matrix dimension mismatch");

  IntegralSet out = ints;
  out.one_body = C.transpose() * ints.one_body * C;

  // Four consecutive quarter transforms, O(r^5).
  const auto& g = ints.two_body;
  Tensor4 t1(r), t2(r), t3(r), t4(r);
  for (int p = 0; p < r; ++p)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k)
        for (int l = 0; l < r; ++l) {
          double s = 0.0;
          for (int i = 0; i < r; ++i) s += C(i, p) * g(i, j, k, l);
          t1(p, j, k, l) = s;
        }
  for (int p = 0; p < r; ++p)
    for (int q = 0; q < r; ++q)
      for (int k = 0; k < r; ++k)
        for (int l = 0; l < r; ++l) {
          double s = 0.0;
          for (int j = 0; j < r; ++j) s += C(j, q) * t1(p, j, k, l);
          t2(p, q, k, l) = s;
        }
  for (int p = 0; p < r; ++p)
    for (int q = 0; q < r; ++q)
      for (int u = 0; u < r; ++u)
        for (int l = 0; l < r; ++l) {
          double s = 0.0;
          for (int k = 0; k < r; ++k) s += C(k, u) * t2(p, q, k, l);
          t3(p, q, u, l) = s;
        }
  for (int p = 0; p < r; ++p)
    for (int q = 0; q < r; ++q)
      for (int u = 0; u < r; ++u)
        for (int w = 0; w < r; ++w) {
          double s = 0.0;
          for (int l = 0; l < r; ++l) s += C(l, w) * t3(p, q, u, l);
          t4(p, q, u, w) = s;
        }
  out.two_body = std::move(t4);
  return out;
}

namespace {

struct FcidumpHeader {
  int norb = -1, nelec = -1, ms2 = 0, isym = 1;
  std::vector<int> orbsym;
};

FcidumpHeader parse_namelist(std::istream& in, int& lineno) {
  std::string text;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string low = lower(line);
    auto endpos = low.find("&end");
    if (endpos == std::string::npos) endpos = low.find("$end");
    auto slashpos = low.find('/');
    if (endpos != std::string::npos) {
      text += " " + line.substr(0, endpos);
      terminated = true;
      break;
    }
    if (slashpos != std::string::npos) {
      text += " " + line.substr(0, slashpos);
      terminated = true;
      break;
    }
    text += " " + line;
  }
  if (!terminated)
    fail("FCIDUMP parse error at line " + std::to_string(lineno) + ": unterminated namelist");

  // Strip the &FCI opener, split KEY=VALUES on '=' boundaries.
  std::string low = lower(text);
  auto fci = low.find("&fci");
  if (fci == std::string::npos) fci = low.find("$fci");
  if (fci == std::string::npos)
    fail("FCIDUMP parse error at line 1: missing &FCI namelist");
  text = text.substr(fci + 4);

  for (char& c : text)
    if (c == ',' || c == '\t') c = ' ';
  FcidumpHeader h;
  std::istringstream ts(text);
  std::string tok;
  std::string key;
  std::vector<std::string> values;
  auto commit = [&]() {
    if (key.empty()) return;
    auto need_int = [&](const std::string& what) {
      if (values.empty())
        fail("FCIDUMP parse error: missing value for " + what);
      return std::stoi(values.front());
    };
    std::string k = lower(key);
    if (k == "norb") h.norb = need_int("NORB");
    else if (k == "nelec") h.nelec = need_int("NELEC");
    else if (k == "ms2") h.ms2 = need_int("MS2");
    else if (k == "isym") h.isym = need_int("ISYM");
    else if (k == "orbsym") {
      h.orbsym.clear();
      for (const auto& v : values) h.orbsym.push_back(std::stoi(v));
    }
    // unknown keys ignored
    key.clear();
    values.clear();
  };
  while (ts >> tok) {
    auto eq = tok.find('=');
    if (eq != std::string::npos) {
      commit();
      key = tok.substr(0, eq);
      std::string rest = tok.substr(eq + 1);
      if (!rest.empty()) values.push_back(rest);
    } else if (!key.empty()) {
      values.push_back(tok);
    }
  }
  commit();
  if (h.norb <= 0)
    fail("FCIDUMP parse error: namelist must declare NORB > 0");
  if (h.nelec < 0)
    fail("FCIDUMP parse error: namelist must declare NELEC >= 0");
  return h;
}

// Canonical representative of the chemists' 8-fold orbit of (i,j,k,l).
std::array<int, 4> canonical4(int i, int j, int k, int l) {
  std::array<int, 4> best = {i, j, k, l};
  const std::array<std::array<int, 4>, 8> images = {{{i, j, k, l},
                                                     {j, i, k, l},
                                                     {i, j, l, k},
                                                     {j, i, l, k},
                                                     {k, l, i, j},
                                                     {l, k, i, j},
                                                     {k, l, j, i},
                                                     {l, k, j, i}}};
  for (const auto& im : images)
    if (im < best) best = im;
  return best;
}

}  // namespace

IntegralSet parse_fcidump(std::istream& in) {
  int lineno = 0;
  FcidumpHeader h = parse_namelist(in, lineno);

  IntegralSet ints;
  ints.n_spatial = h.norb;
  ints.n_alpha = (h.nelec + h.ms2) / 2;
  ints.n_beta = h.nelec - ints.n_alpha;
  ints.one_body = Eigen::MatrixXd::Zero(h.norb, h.norb);
  ints.two_body = Tensor4(h.norb);
  ints.point_group_labels = h.orbsym;

  std::vector<char> seen2(static_cast<size_t>(h.norb) * h.norb * h.norb * h.norb, 0);
  Eigen::MatrixXd seen1 = Eigen::MatrixXd::Zero(h.norb, h.norb);
  bool have_core = false;

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    double v;
    int i, j, k, l;
    if (!(ls >> v >> i >> j >> k >> l)) {
      std::istringstream probe(line);
      std::string any;
      if (probe >> any)
        fail("FCIDUMP parse error at line " + std::to_string(lineno) +
             ": expected `value i j k l`");
      continue;  // blank line
    }
    for (int idx : {i, j, k, l})
      if (idx < 0 || idx > h.norb)
        fail("FCIDUMP bounds error at line " + std::to_string(lineno) + ": index " +
             std::to_string(idx) + " outside [0, " + std::to_string(h.norb) + "]");

    if (i == 0 && j == 0 && k == 0 && l == 0) {
      if (have_core && std::abs(ints.core_energy - v) > 1e-10)
        fail("FCIDUMP consistency error at line " + std::to_string(lineno) +
             ": conflicting core-energy records");
      ints.core_energy = v;
      have_core = true;
      continue;
    }
    if (k == 0 && l == 0) {
      if (i == 0 || j == 0)
        fail("FCIDUMP parse error at line " + std::to_string(lineno) +
             ": malformed one-body record");
      int a = i - 1, b = j - 1;
      if (seen1(a, b) != 0.0 && std::abs(ints.one_body(a, b) - v) > 1e-10)
        fail("FCIDUMP consistency error at line " + std::to_string(lineno) +
             ": conflicting one-body records");
      ints.one_body(a, b) = ints.one_body(b, a) = v;
      seen1(a, b) = seen1(b, a) = 1.0;
      continue;
    }
    if (i == 0 || j == 0 || k == 0 || l == 0)
      fail("FCIDUMP parse error at line " + std::to_string(lineno) +
           ": malformed two-body record");
    int a = i - 1, b = j - 1, c = k - 1, d = l - 1;
    auto canon = canonical4(a, b, c, d);
    size_t key = ((static_cast<size_t>(canon[0]) * h.norb + canon[1]) * h.norb + canon[2]) *
                     h.norb +
                 canon[3];
    if (seen2[key] && std::abs(ints.two_body(a, b, c, d) - v) > 1e-10)
      fail("FCIDUMP consistency error at line " + std::to_string(lineno) +
           ": conflicting two-body records");
    seen2[key] = 1;
    for (const auto& [p, q, r, s] :
         std::array<std::array<int, 4>, 8>{{{a, b, c, d},
                                            {b, a, c, d},
                                            {a, b, d, c},
                                            {b, a, d, c},
                                            {c, d, a, b},
                                            {d, c, a, b},
                                            {c, d, b, a},
                                            {d, c, b, a}}})
      ints.two_body(p, q, r, s) = v;
  }
  ints.validate(1e-10);
  return ints;
}

IntegralSet parse_fcidump_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open FCIDUMP file: " + path);
  return parse_fcidump(in);
}

void write_fcidump(const IntegralSet& ints, std::ostream& out) {
  ints.validate(1e-8);
  const int r = ints.n_spatial;
  char buf[64];
  out << "&FCI NORB=" << r << ",NELEC=" << ints.n_electrons()
      << ",MS2=" << (ints.n_alpha - ints.n_beta) << ",\n ORBSYM=";
  for (int p = 0; p < r; ++p) {
    int sym = (p < static_cast<int>(ints.point_group_labels.size()))
                  ? ints.point_group_labels[p]
                  : 1;
    out << sym << ",";
  }
  out << "\n ISYM=1,\n&END\n";

  auto emit = [&](double v, int i, int j, int k, int l) {
    std::snprintf(buf, sizeof(buf), "%23.16e", v);
    out << buf << ' ' << i << ' ' << j << ' ' << k << ' ' << l << '\n';
  };

  // Symmetry-unique two-body records: i<=j, k<=l, (i,j) <= (k,l).
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j)
      for (int k = 0; k < r; ++k) {
        if (k < i) continue;
        for (int l = k; l < r; ++l) {
          if (k == i && l < j) continue;
          double v = ints.two_body(i, j, k, l);
          if (std::abs(v) > 1e-14) emit(v, i + 1, j + 1, k + 1, l + 1);
        }
      }
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) {
      double v = ints.one_body(i, j);
      if (std::abs(v) > 1e-14) emit(v, i + 1, j + 1, 0, 0);
    }
  emit(ints.core_energy, 0, 0, 0, 0);
}

void write_fcidump_file(const IntegralSet& ints, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  write_fcidump(ints, out);
}

ScfResult restricted_hf(const IntegralSet& ints, int max_iters, double tol) {
  if (ints.n_alpha != ints.n_beta)
    fail("restricted_hf: closed-shell systems only (n_alpha must equal n_beta)");
  const int r = ints.n_spatial;
  const int nocc = ints.n_alpha;
  const auto& g = ints.two_body;

  // Start from the core guess.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ints.one_body);
  Eigen::MatrixXd C = es.eigenvectors();

  ScfResult res;
  double e_old = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::MatrixXd D = 2.0 * C.leftCols(nocc) * C.leftCols(nocc).transpose();
    Eigen::MatrixXd F = ints.one_body;
    for (int p = 0; p < r; ++p)
      for (int q = 0; q < r; ++q) {
        double s = 0.0;
        for (int u = 0; u < r; ++u)
          for (int w = 0; w < r; ++w)
            s += D(u, w) * (g(p, q, u, w) - 0.5 * g(p, w, u, q));
        F(p, q) += s;
      }
    double energy = ints.core_energy + 0.5 * (D.array() * (ints.one_body + F).array()).sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> fes(F);
    C = fes.eigenvectors();
    res.orbital_energies = fes.eigenvalues();
    res.iterations = it;
    res.energy = energy;
    if (it > 1 && std::abs(energy - e_old) < tol) {
      res.converged = true;
      break;
    }
    e_old = energy;
  }
  // Fix orbital sign: largest-magnitude coefficient positive.
  for (int p = 0; p < r; ++p) {
    int arg = 0;
    C.col(p).cwiseAbs().maxCoeff(&arg);
    if (C(arg, p) < 0) C.col(p) *= -1.0;
  }
  res.mo_coeffs = C;
  return res;
}

SpinHamiltonian SpinHamiltonian::from(const IntegralSet& ints) {
  const int r = ints.n_spatial;
  SpinHamiltonian sh;
  sh.n_so = 2 * r;
  sh.core = ints.core_energy;
  sh.h = Eigen::MatrixXd::Zero(sh.n_so, sh.n_so);
  sh.v_phys = Tensor4(sh.n_so);
  for (int p = 0; p < sh.n_so; ++p)
    for (int q = 0; q < sh.n_so; ++q)
      if ((p & 1) == (q & 1)) sh.h(p, q) = ints.one_body(p >> 1, q >> 1);
  // <pq|rs> = (p r | q s) * delta(sp,sr) * delta(sq,ss)
  for (int p = 0; p < sh.n_so; ++p)
    for (int q = 0; q < sh.n_so; ++q)
      for (int s = 0; s < sh.n_so; ++s)
        for (int t = 0; t < sh.n_so; ++t)
          if ((p & 1) == (s & 1) && (q & 1) == (t & 1))
            sh.v_phys(p, q, s, t) = ints.two_body(p >> 1, s >> 1, q >> 1, t >> 1);
  return sh;
}

}  // namespace rdmtk
