#include "rdmtk/purification.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace rdmtk {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

size_t flat(int n, int i, int j, int k, int l) {
  return ((static_cast<size_t>(i) * n + j) * n + k) * n + l;
}

// Canonical slots of the antisym-pair + Hermitian subspace.
std::vector<std::array<int, 4>> canonical_slots(int n) {
  std::vector<std::array<int, 4>> slots;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          if (k < i || (k == i && l < j)) continue;
          slots.push_back({i, j, k, l});
        }
  return slots;
}

// Orthonormal basis column of the symmetry subspace for one canonical slot.
void basis_column(int n, const std::array<int, 4>& s, Vec& out) {
  out.setZero();
  auto [i, j, k, l] = s;
  double v = (i == k && j == l) ? 0.5 : 1.0;
  out(flat(n, i, j, k, l)) += v;
  out(flat(n, j, i, k, l)) -= v;
  out(flat(n, i, j, l, k)) -= v;
  out(flat(n, j, i, l, k)) += v;
  out(flat(n, k, l, i, j)) += v;
  out(flat(n, l, k, i, j)) -= v;
  out(flat(n, k, l, j, i)) -= v;
  out(flat(n, l, k, j, i)) += v;
  out /= out.norm();
}

// Q and G maps applied to a full d2 vector, with the 1-RDM taken as the
// contraction of the same vector (so the maps are linear in d2).
void apply_q_map(int n, int nelec, const Vec& x, Vec& q) {
  double invn = 1.0 / (nelec - 1.0);
  Mat d1 = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += x(flat(n, i, j, k, j));
      d1(i, k) = s * invn;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = x(flat(n, k, l, i, j));
          if (j == l) v -= d1(k, i);
          if (i == l) v += d1(k, j);
          if (j == k) v += d1(l, i);
          if (i == k) v -= d1(l, j);
          q(flat(n, i, j, k, l)) = v;
        }
}

void apply_g_map(int n, int nelec, const Vec& x, Vec& g) {
  double invn = 1.0 / (nelec - 1.0);
  Mat d1 = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += x(flat(n, i, j, k, j));
      d1(i, k) = s * invn;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = -x(flat(n, i, l, k, j));
          if (j == l) v += d1(i, k);
          g(flat(n, i, j, k, l)) = v;
        }
}

// Frobenius projection onto the PSD cone.
void clip_psd(Vec& y, int side) {
  Eigen::Map<Mat> m(y.data(), side, side);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  m = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
      es.eigenvectors().transpose();
}

double min_eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

Tensor4 sz_coefficients(int dim, int n_electrons) {
  Tensor4 w(dim);
  for (int i = 0; i < dim; ++i) {
    double s = (i % 2 == 0) ? 0.5 : -0.5;
    for (int j = 0; j < dim; ++j) w(i, j, i, j) = s / (n_electrons - 1);
  }
  return w;
}

// <S^2> = m(m+1) + N_beta - sum_{pq} 2D^{p_b q_a}_{q_b p_a}; coefficients of
// the d2-linear part.
Tensor4 s2_coefficients(int dim, int n_electrons) {
  Tensor4 w(dim);
  for (int i = 1; i < dim; i += 2)
    for (int j = 0; j < dim; ++j) w(i, j, i, j) += 1.0 / (n_electrons - 1);
  for (int p = 0; p < dim / 2; ++p)
    for (int q = 0; q < dim / 2; ++q) w(2 * p + 1, 2 * q, 2 * q + 1, 2 * p) -= 1.0;
  return w;
}

}  // namespace

DqgMatrices dqg_transforms(const Rdm2& d2, int n_electrons) {
  const int n = d2.dim;
  Rdm1 d1 = contract_2to1(d2, n_electrons);
  const auto& d = d1.data;

  // Compressed i<j pair index for D and Q (pair occupations of a determinant
  // come out as 0/1 in this convention); G keeps the full ordered-pair index.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  const int np = static_cast<int>(pairs.size());

  DqgMatrices out;
  out.d = Mat::Zero(np, np);
  out.q = Mat::Zero(np, np);
  out.g = Mat::Zero(n * n, n * n);
  for (int a = 0; a < np; ++a)
    for (int b = 0; b < np; ++b) {
      auto [i, j] = pairs[a];
      auto [k, l] = pairs[b];
      out.d(a, b) = d2.data(i, j, k, l);
      double q = d2.data(k, l, i, j);
      if (i == k && j == l) q += 1.0;
      if (i == l && j == k) q -= 1.0;
      if (j == l) q -= d(k, i);
      if (i == l) q += d(k, j);
      if (j == k) q += d(l, i);
      if (i == k) q -= d(l, j);
      out.q(a, b) = q;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double g = -d2.data(i, l, k, j);
          if (j == l) g += d(i, k);
          out.g(i * n + j, k * n + l) = g;
        }
  return out;
}

double sz_expectation(const Rdm2& d2, int n_electrons) {
  Rdm1 d1 = contract_2to1(d2, n_electrons);
  double sz = 0.0;
  for (int i = 0; i < d2.dim; ++i) sz += ((i % 2 == 0) ? 0.5 : -0.5) * d1.data(i, i);
  return sz;
}

double s2_expectation(const Rdm2& d2, int n_alpha, int n_beta) {
  const int nelec = n_alpha + n_beta;
  double m = 0.5 * (n_alpha - n_beta);
  Tensor4 w = s2_coefficients(d2.dim, nelec);
  double f = 0.0;
  for (size_t i = 0; i < w.raw().size(); ++i) f += w.raw()[i] * d2.data.raw()[i];
  return m * (m + 1.0) + f;
}

namespace {

ConstraintReport report_of(const Rdm2& x, int n_electrons) {
  const double target_trace = static_cast<double>(n_electrons) * (n_electrons - 1);
  ConstraintReport rep;
  rep.trace_error = std::abs(x.trace() - target_trace);
  rep.hermiticity_error = x.hermiticity_violation();
  rep.antisymmetry_error = x.antisymmetry_violation();
  auto dqg = dqg_transforms(x, n_electrons);
  rep.min_eig_d = min_eig(dqg.d);
  rep.min_eig_q = min_eig(dqg.q);
  rep.min_eig_g = min_eig(dqg.g);
  Rdm1 d1 = contract_2to1(x, n_electrons);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (d1.data + d1.data.transpose()));
  rep.contraction_error = std::max(std::max(0.0, -es.eigenvalues().minCoeff()),
                                   std::max(0.0, es.eigenvalues().maxCoeff() - 1.0));
  return rep;
}

double sup_violation(const ConstraintReport& rep) {
  return std::max({rep.trace_error, rep.hermiticity_error, rep.antisymmetry_error,
                   std::max(0.0, -rep.min_eig_d), std::max(0.0, -rep.min_eig_q),
                   std::max(0.0, -rep.min_eig_g)});
}

}  // namespace

DqgProjector::DqgProjector(int dim, int n_electrons, const PurifyOptions& opts)
    : n_(dim), n_electrons_(n_electrons), opts_(opts) {
  if (n_electrons < 2) throw std::invalid_argument("DqgProjector: need at least 2 electrons");
  const size_t n4 = static_cast<size_t>(n_) * n_ * n_ * n_;
  const double target_trace = static_cast<double>(n_electrons) * (n_electrons - 1);

  auto slots = canonical_slots(n_);
  const int m = static_cast<int>(slots.size());
  basis_.resize(n4, m);
  {
    Vec col(n4);
    for (int c = 0; c < m; ++c) {
      basis_column(n_, slots[c], col);
      basis_.col(c) = col;
    }
  }

  mq_.resize(n4, m);
  mg_.resize(n4, m);
  {
    Vec tmp(n4);
    for (int c = 0; c < m; ++c) {
      apply_q_map(n_, n_electrons, basis_.col(c), tmp);
      mq_.col(c) = tmp;
      apply_g_map(n_, n_electrons, basis_.col(c), tmp);
      mg_.col(c) = tmp;
    }
  }
  cq_ = Vec::Zero(n4);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      cq_(flat(n_, i, j, i, j)) += 1.0;
      cq_(flat(n_, i, j, j, i)) -= 1.0;
    }

  {
    Vec wtr = Vec::Zero(n4);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) wtr(flat(n_, i, j, i, j)) += 1.0;
    constraints_.push_back({basis_.transpose() * wtr, target_trace});
  }
  if (opts_.sz_target) {
    Tensor4 w = sz_coefficients(n_, n_electrons);
    constraints_.push_back(
        {basis_.transpose() * Eigen::Map<const Vec>(w.raw().data(), n4), *opts_.sz_target});
  }
  if (opts_.s2_target) {
    double mz = opts_.sz_target.value_or(0.0);
    Tensor4 w = s2_coefficients(n_, n_electrons);
    constraints_.push_back({basis_.transpose() * Eigen::Map<const Vec>(w.raw().data(), n4),
                            *opts_.s2_target - mz * (mz + 1.0)});
  }
  const int nc = static_cast<int>(constraints_.size());

  // KKT system for the projection onto the constrained graph set
  //   {(x, Yd, Yq, Yg) : Yd = B x, Yq = MQ x + cq, Yg = MG x, C x = d}.
  Mat kkt = Mat::Zero(m + nc, m + nc);
  kkt.topLeftCorner(m, m) = Mat::Identity(m, m) + basis_.transpose() * basis_ +
                            mq_.transpose() * mq_ + mg_.transpose() * mg_;
  for (int c = 0; c < nc; ++c) {
    kkt.block(0, m + c, m, 1) = constraints_[c].first;
    kkt.block(m + c, 0, 1, m) = constraints_[c].first.transpose();
  }
  kkt_lu_.compute(kkt);
}

std::pair<Rdm2, ConstraintReport> DqgProjector::project(const Rdm2& noisy) const {
  if (noisy.dim != n_) throw std::invalid_argument("DqgProjector: dimension mismatch");
  const size_t n4 = static_cast<size_t>(n_) * n_ * n_ * n_;
  const int m = static_cast<int>(basis_.cols());
  const int nc = static_cast<int>(constraints_.size());

  Rdm2 d2 = noisy;
  d2.enforce_symmetries();
  Vec x = basis_.transpose() * Eigen::Map<const Vec>(d2.data.raw().data(), n4);

  ConstraintReport in_report = report_of(d2, n_electrons_);
  Rdm2 best = d2;
  ConstraintReport best_report = in_report;
  best_report.iterations_used = 0;
  double best_viol = sup_violation(in_report);
  if (best_viol < opts_.tol) {
    best_report.converged = true;
    return {std::move(best), best_report};
  }

  // Dykstra alternating projections between the PSD cones (product space)
  // and the constrained graph set.
  Vec yd = basis_ * x, yq = mq_ * x + cq_, yg = mg_ * x;
  Vec pd = Vec::Zero(n4), pq = Vec::Zero(n4), pg = Vec::Zero(n4);
  Vec qd = Vec::Zero(n4), qq = Vec::Zero(n4), qg = Vec::Zero(n4), qx = Vec::Zero(m);

  for (int iter = 1; iter <= opts_.max_iters; ++iter) {
    Vec ad = yd + pd, aq = yq + pq, ag = yg + pg;
    Vec bd = ad, bq = aq, bg = ag;
    clip_psd(bd, n_ * n_);
    clip_psd(bq, n_ * n_);
    clip_psd(bg, n_ * n_);
    pd = ad - bd;
    pq = aq - bq;
    pg = ag - bg;

    Vec cd = bd + qd, cqv = bq + qq, cg = bg + qg, cx = x + qx;
    Vec rhs(m + nc);
    rhs.head(m) = cx + basis_.transpose() * cd + mq_.transpose() * (cqv - cq_) +
                  mg_.transpose() * cg;
    for (int c = 0; c < nc; ++c) rhs(m + c) = constraints_[c].second;
    Vec sol = kkt_lu_.solve(rhs);
    Vec xn = sol.head(m);
    Vec nd = basis_ * xn, nq = mq_ * xn + cq_, ng = mg_ * xn;
    qd = cd - nd;
    qq = cqv - nq;
    qg = cg - ng;
    qx = cx - xn;
    x = xn;
    yd = nd;
    yq = nq;
    yg = ng;

    Rdm2 cur(n_);
    Eigen::Map<Vec>(cur.data.raw().data(), n4) = basis_ * x;
    ConstraintReport rep = report_of(cur, n_electrons_);
    double viol = sup_violation(rep);
    if (viol < best_viol) {
      best_viol = viol;
      best = cur;
      best_report = rep;
      best_report.iterations_used = iter;
    }
    if (viol < opts_.tol) {
      rep.converged = true;
      rep.iterations_used = iter;
      return {std::move(cur), rep};
    }
  }
  best_report.converged = false;
  return {std::move(best), best_report};
}

std::pair<Rdm2, ConstraintReport> purify(const Rdm2& noisy, int n_electrons,
                                         const PurifyOptions& opts) {
  DqgProjector projector(noisy.dim, n_electrons, opts);
  return projector.project(noisy);
}

void write_constraint_report(const ConstraintReport& rep, std::ostream& out) {
  char buf[64];
  auto kv = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  kv("trace_error", rep.trace_error);
  kv("hermiticity_error", rep.hermiticity_error);
  kv("antisymmetry_error", rep.antisymmetry_error);
  kv("contraction_error", rep.contraction_error);
  kv("min_eig_d", rep.min_eig_d);
  kv("min_eig_q", rep.min_eig_q);
  kv("min_eig_g", rep.min_eig_g);
  out << "iterations_used = " << rep.iterations_used << '\n';
  out << "converged = " << (rep.converged ? "true" : "false") << '\n';
}

std::string constraint_report_csv_header() {
  return "trace_error,hermiticity_error,antisymmetry_error,contraction_error,"
         "min_eig_d,min_eig_q,min_eig_g,iterations_used,converged";
}

std::string constraint_report_csv_row(const ConstraintReport& rep) {
  char buf[384];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d",
                rep.trace_error, rep.hermiticity_error, rep.antisymmetry_error,
                rep.contraction_error, rep.min_eig_d, rep.min_eig_q, rep.min_eig_g,
                rep.iterations_used, rep.converged ? 1 : 0);
  return buf;
}

}  // namespace rdmtk
