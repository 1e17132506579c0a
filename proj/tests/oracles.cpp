#include "oracles.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace oracle {

FockSpace::FockSpace(int n_spin_orbitals) : n_(n_spin_orbitals) {
  if (n_ < 1 || n_ > 12) throw std::invalid_argument("FockSpace: 1..12 spin orbitals");
  const int d = dim();
  for (int p = 0; p < n_; ++p) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int s = 0; s < d; ++s) {
      if (s & (1 << p)) {
        int sign = (std::popcount(static_cast<unsigned>(s & ((1 << p) - 1))) & 1) ? -1 : 1;
        a(s ^ (1 << p), s) = sign;
      }
    }
    annihilate_.push_back(a);
    create_.push_back(a.transpose());
  }
}

Eigen::MatrixXd FockSpace::hamiltonian(const rdmtk::SpinHamiltonian& sh) const {
  if (sh.n_so != n_) throw std::invalid_argument("FockSpace: Hamiltonian size mismatch");
  const int d = dim();
  Eigen::MatrixXd H = sh.core * Eigen::MatrixXd::Identity(d, d);
  for (int p = 0; p < n_; ++p)
    for (int q = 0; q < n_; ++q)
      if (sh.h(p, q) != 0.0) H += sh.h(p, q) * create_[p] * annihilate_[q];
  for (int p = 0; p < n_; ++p)
    for (int q = 0; q < n_; ++q)
      for (int r = 0; r < n_; ++r)
        for (int s = 0; s < n_; ++s) {
          double v = 0.5 * sh.v_phys(p, q, r, s);
          if (v != 0.0) H += v * create_[p] * create_[q] * annihilate_[s] * annihilate_[r];
        }
  return H;
}

Eigen::MatrixXd FockSpace::two_body_operator(const rdmtk::Tensor4& coeff) const {
  const int d = dim();
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) {
          double c = coeff(i, j, k, l);
          if (c != 0.0) O += c * create_[i] * create_[j] * annihilate_[l] * annihilate_[k];
        }
  return O;
}

Eigen::VectorXd FockSpace::embed(const rdmtk::CiState& state) const {
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(dim());
  const auto& basis = *state.basis;
  for (int m = 0; m < basis.size(); ++m)
    psi(static_cast<int>(basis.det(m).combined(basis.n_spatial()))) = state.coeffs(m);
  return psi;
}

std::pair<double, Eigen::VectorXd> FockSpace::sector_ground_state(const Eigen::MatrixXd& h,
                                                                  int n_alpha,
                                                                  int n_beta) const {
  // Collect Fock states with the requested particle numbers per spin.
  std::vector<int> members;
  for (int s = 0; s < dim(); ++s) {
    int na = 0, nb = 0;
    for (int p = 0; p < n_; ++p)
      if (s & (1 << p)) ((p & 1) ? nb : na)++;
    if (na == n_alpha && nb == n_beta) members.push_back(s);
  }
  const int m = static_cast<int>(members.size());
  Eigen::MatrixXd hs(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) hs(a, b) = h(members[a], members[b]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(dim());
  for (int a = 0; a < m; ++a) full(members[a]) = es.eigenvectors()(a, 0);
  return {es.eigenvalues()(0), full};
}

Eigen::MatrixXd FockSpace::rdm1(const Eigen::VectorXd& psi) const {
  Eigen::MatrixXd d1(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int q = 0; q < n_; ++q) d1(i, q) = psi.dot(create_[i] * (annihilate_[q] * psi));
  return d1;
}

rdmtk::Tensor4 FockSpace::rdm2(const Eigen::VectorXd& psi) const {
  rdmtk::Tensor4 d2(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l)
          d2(i, j, k, l) =
              psi.dot(create_[i] * (create_[j] * (annihilate_[l] * (annihilate_[k] * psi))));
  return d2;
}

rdmtk::Tensor6 FockSpace::rdm3(const Eigen::VectorXd& psi) const {
  rdmtk::Tensor6 d3(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int q = 0; q < n_; ++q)
          for (int s = 0; s < n_; ++s)
            for (int t = 0; t < n_; ++t)
              d3(i, j, k, q, s, t) = psi.dot(
                  create_[i] *
                  (create_[j] *
                   (create_[k] * (annihilate_[t] * (annihilate_[s] * (annihilate_[q] * psi))))));
  return d3;
}

rdmtk::Tensor4 FockSpace::commutator_residual(const Eigen::MatrixXd& h,
                                              const Eigen::VectorXd& psi) const {
  rdmtk::Tensor4 out(n_);
  Eigen::VectorXd hpsi = h * psi;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) {
          // <psi| G H |psi> - <psi| H G |psi> with G = a+_i a+_j a_l a_k.
          Eigen::VectorXd gh = create_[i] * (create_[j] * (annihilate_[l] * (annihilate_[k] * hpsi)));
          Eigen::VectorXd gp = create_[i] * (create_[j] * (annihilate_[l] * (annihilate_[k] * psi)));
          out(i, j, k, l) = psi.dot(gh) - hpsi.dot(gp);
        }
  return out;
}

rdmtk::Tensor4 FockSpace::q_matrix(const Eigen::VectorXd& psi) const {
  rdmtk::Tensor4 out(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l)
          out(i, j, k, l) =
              psi.dot(annihilate_[i] * (annihilate_[j] * (create_[l] * (create_[k] * psi))));
  return out;
}

rdmtk::Tensor4 FockSpace::g_matrix(const Eigen::VectorXd& psi) const {
  rdmtk::Tensor4 out(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l)
          out(i, j, k, l) =
              psi.dot(create_[i] * (annihilate_[j] * (create_[l] * (annihilate_[k] * psi))));
  return out;
}

double boys_f0_quadrature(double t) {
  // 64-point Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
  static std::vector<double> nodes, weights;
  if (nodes.empty()) {
    const int n = 64;
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
  double sum = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    double x = 0.5 * (nodes[i] + 1.0);  // map to [0, 1]
    sum += 0.5 * weights[i] * std::exp(-t * x * x);
  }
  return sum;
}

double restricted_pbe_xc(const Eigen::VectorXd& weights, const Eigen::VectorXd& rho,
                         const Eigen::VectorXd& grad_norm) {
  const double pi = 3.14159265358979323846;
  const double kappa = 0.804, mu = 0.2195149727645171;
  const double beta = 0.06672455060314922, gamma = (1.0 - std::log(2.0)) / (pi * pi);

  auto pw92_eps = [&](double rs, const double p[6]) {
    double q0 = -2.0 * p[0] * (1.0 + p[1] * rs);
    double sq = std::sqrt(rs);
    double q1 = 2.0 * p[0] * (p[2] * sq + p[3] * rs + p[4] * rs * sq + p[5] * rs * rs);
    return q0 * std::log(1.0 + 1.0 / q1);
  };
  const double P0[6] = {0.031091, 0.21370, 7.5957, 3.5876, 1.6382, 0.49294};

  double e = 0.0;
  for (int i = 0; i < rho.size(); ++i) {
    double n = rho(i);
    if (n < 1e-12) continue;
    double g = grad_norm(i);
    // Exchange: unpolarized enhancement factor on the total density.
    double kf = std::cbrt(3.0 * pi * pi * n);
    double ex_lda = -3.0 / (4.0 * pi) * kf * n;
    double s = g / (2.0 * kf * n);
    double fx = 1.0 + kappa - kappa / (1.0 + mu * s * s / kappa);
    // Correlation at zeta = 0 (phi = 1).
    double rs = std::cbrt(3.0 / (4.0 * pi * n));
    double eps = pw92_eps(rs, P0);
    double ks = std::sqrt(4.0 * kf / pi);
    double t = g / (2.0 * ks * n);
    double expo = std::exp(-eps / gamma);
    double A = beta / gamma / (expo - 1.0);
    double t2 = t * t;
    double num = 1.0 + A * t2;
    double den = 1.0 + A * t2 + A * A * t2 * t2;
    double H = gamma * std::log(1.0 + beta / gamma * t2 * num / den);
    e += weights(i) * (ex_lda * fx + n * (eps + H));
  }
  return e;
}

}  // namespace oracle
