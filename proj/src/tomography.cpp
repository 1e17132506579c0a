#include "rdmtk/tomography.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "rdmtk/rng.hpp"

namespace rdmtk {

namespace {

inline int parity_below(uint64_t mask, int p) {
  uint64_t below = mask & ((1ull << p) - 1);
  return (std::popcount(below) & 1) ? -1 : 1;
}

}  // namespace

void NoiseModel::validate() const {
  if (depolarizing_p < 0.0 || depolarizing_p > 1.0)
    throw std::invalid_argument("NoiseModel: depolarizing_p outside [0, 1]");
  if (readout_flip < 0.0 || readout_flip > 1.0)
    throw std::invalid_argument("NoiseModel: readout_flip outside [0, 1]");
}

DensityMatrix DensityMatrix::pure(const CiState& state) {
  DensityMatrix out;
  out.basis = state.basis;
  out.rho = state.coeffs * state.coeffs.transpose();
  return out;
}

void depolarize(DensityMatrix& sigma, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("depolarize: p outside [0, 1]");
  const int dim = static_cast<int>(sigma.rho.rows());
  sigma.rho = (1.0 - p) * sigma.rho +
              (p / dim) * Eigen::MatrixXd::Identity(dim, dim);
}

std::pair<Rdm1, Rdm2> measure_rdms(const DensityMatrix& sigma) {
  const auto& basis = *sigma.basis;
  const int n_so = basis.n_spin_orbitals();
  Rdm1 d1(n_so);
  Rdm2 d2(n_so);

  // Tr[sigma a+_i ... a_k] = sum_{m,t} sigma(t, m) <t| op |m>.
  for (int m = 0; m < basis.size(); ++m) {
    uint64_t dmask = basis.det(m).combined(basis.n_spatial());
    for (int q = 0; q < n_so; ++q) {
      if (!((dmask >> q) & 1)) continue;
      uint64_t m1 = dmask ^ (1ull << q);
      int s1 = parity_below(dmask, q);
      for (int i = 0; i < n_so; ++i) {
        if ((m1 >> i) & 1) continue;
        int target = basis.index_of(m1 | (1ull << i));
        if (target >= 0) d1.data(i, q) += sigma.rho(target, m) * s1 * parity_below(m1, i);
      }
    }
    for (int k = 0; k < n_so; ++k) {
      if (!((dmask >> k) & 1)) continue;
      uint64_t m1 = dmask ^ (1ull << k);
      int s1 = parity_below(dmask, k);
      for (int l = 0; l < n_so; ++l) {
        if (!((m1 >> l) & 1)) continue;
        uint64_t m2 = m1 ^ (1ull << l);
        int s2 = s1 * parity_below(m1, l);
        for (int j = 0; j < n_so; ++j) {
          if ((m2 >> j) & 1) continue;
          uint64_t m3 = m2 | (1ull << j);
          int s3 = s2 * parity_below(m2, j);
          for (int i = 0; i < n_so; ++i) {
            if ((m3 >> i) & 1) continue;
            int target = basis.index_of(m3 | (1ull << i));
            if (target >= 0)
              d2.data(i, j, k, l) += sigma.rho(target, m) * s3 * parity_below(m3, i);
          }
        }
      }
    }
  }
  return {std::move(d1), std::move(d2)};
}

Rdm3 measure_rdm3(const DensityMatrix& sigma) {
  // Spectral split: sigma = sum_k w_k |v_k><v_k|; reuse the pure-state path.
  const auto& basis = sigma.basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (sigma.rho + sigma.rho.transpose()));
  Rdm3 out(basis->n_spin_orbitals());
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    double w = es.eigenvalues()(k);
    if (std::abs(w) < 1e-15) continue;
    CiState vk{basis, es.eigenvectors().col(k)};
    Rdm3 part = measure_rdm3(vk);
    for (size_t i = 0; i < out.data.raw().size(); ++i)
      out.data.raw()[i] += w * part.data.raw()[i];
  }
  return out;
}

namespace {

// exp(eps*A) applied to every column of a matrix (sub-stepped Taylor).
Eigen::MatrixXd apply_exp_two_body(const AMatrix& a, double eps,
                                   std::shared_ptr<const DeterminantBasis> basis,
                                   const Eigen::MatrixXd& m) {
  double scale = std::abs(eps) * a.frobenius_norm();
  int substeps = std::max(1, static_cast<int>(std::ceil(scale)));
  double h = eps / substeps;
  Eigen::MatrixXd out = m;
  for (int col = 0; col < m.cols(); ++col) {
    Eigen::VectorXd w = m.col(col);
    for (int s = 0; s < substeps; ++s) {
      Eigen::VectorXd term = w, acc = w;
      bool done = false;
      for (int k = 1; k <= 80; ++k) {
        term = (h / k) * apply_two_body(a.data, CiState{basis, term});
        acc += term;
        if (term.norm() < 1e-16 * std::max(1e-300, acc.norm())) {
          done = true;
          break;
        }
      }
      if (!done) throw std::runtime_error("prepare_qacse_state: exponential not converged");
      w = acc;
    }
    out.col(col) = w;
  }
  return out;
}

}  // namespace

DensityMatrix prepare_qacse_state(const IntegralSet& ints, const SolverConfig& cfg,
                                  const NoiseModel& noise) {
  cfg.validate();
  noise.validate();
  auto sh = SpinHamiltonian::from(ints);
  auto basis = DeterminantBasis::build(ints.n_spatial, ints.n_alpha, ints.n_beta);
  if (basis->size() > 4096)
    throw std::invalid_argument("prepare_qacse_state: CI dimension exceeds 4096");

  // Seed: lowest-diagonal determinant.
  Eigen::VectorXd diag(basis->size());
  for (int m = 0; m < basis->size(); ++m) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(basis->size());
    unit(m) = 1.0;
    diag(m) = unit.dot(apply_hamiltonian(sh, CiState{basis, unit}));
  }
  int start = 0;
  diag.minCoeff(&start);
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(basis->size());
  c0(start) = 1.0;
  DensityMatrix sigma = DensityMatrix::pure(CiState{basis, c0});

  auto energy_of = [&](const DensityMatrix& s) {
    auto [d1, d2] = measure_rdms(s);
    return rdm_energy(sh, d1, d2);
  };

  double energy = energy_of(sigma);
  double eps = cfg.epsilon;
  double last_delta = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    auto [d1, d2] = measure_rdms(sigma);
    Rdm3 d3 = (cfg.mode == SolverMode::statevector) ? measure_rdm3(sigma)
                                                    : valdemoro3(d2, d1);
    AMatrix a = acse_residual(sh, d1, d2, d3);
    if (a.frobenius_norm() <= cfg.residual_tol) break;
    if (last_delta < cfg.energy_tol) break;

    bool accepted = false;
    while (!accepted) {
      DensityMatrix proposal = sigma;
      proposal.rho = apply_exp_two_body(a, eps, basis, sigma.rho);
      proposal.rho = apply_exp_two_body(a, eps, basis, proposal.rho.transpose().eval());
      proposal.rho = 0.5 * (proposal.rho + proposal.rho.transpose()).eval();
      depolarize(proposal, noise.depolarizing_p);
      double e_new = energy_of(proposal);
      if (cfg.step_control == StepControl::fixed || e_new <= energy) {
        last_delta = std::abs(e_new - energy);
        sigma = std::move(proposal);
        energy = e_new;
        accepted = true;
      } else {
        eps *= 0.5;
        if (eps < 1e-6) return sigma;
      }
    }
  }
  return sigma;
}

TomographyPlan TomographyPlan::naive(int n_so, int shots, bool exact) {
  TomographyPlan plan;
  plan.shots_per_setting = shots;
  plan.use_exact_expectations = exact;
  plan.settings.push_back({true, {0, 0, 0, 0}});
  for (int i = 0; i < n_so; ++i)
    for (int j = i + 1; j < n_so; ++j)
      for (int k = 0; k < n_so; ++k)
        for (int l = k + 1; l < n_so; ++l) {
          if (std::make_pair(i, j) >= std::make_pair(k, l)) continue;
          plan.settings.push_back({false, {i, j, k, l}});
        }
  return plan;
}

void TomographyPlan::validate(int n_so) const {
  if (shots_per_setting <= 0 && !use_exact_expectations)
    throw std::invalid_argument("TomographyPlan: shots_per_setting must be positive");
  std::vector<char> covered(static_cast<size_t>(n_so) * n_so * n_so * n_so, 0);
  auto mark = [&](int i, int j, int k, int l) {
    covered[((static_cast<size_t>(i) * n_so + j) * n_so + k) * n_so + l] = 1;
  };
  for (const auto& s : settings) {
    if (s.diagonal) {
      for (int i = 0; i < n_so; ++i)
        for (int j = 0; j < n_so; ++j) {
          mark(i, j, i, j);
          mark(i, j, j, i);
        }
    } else {
      auto [i, j, k, l] = s.tuple;
      int img[8][4] = {{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                       {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}};
      for (auto& q : img) mark(q[0], q[1], q[2], q[3]);
    }
  }
  for (int i = 0; i < n_so; ++i)
    for (int j = 0; j < n_so; ++j)
      for (int k = 0; k < n_so; ++k)
        for (int l = 0; l < n_so; ++l) {
          if (i == j || k == l) continue;  // zero by antisymmetry
          if (!covered[((static_cast<size_t>(i) * n_so + j) * n_so + k) * n_so + l])
            throw std::invalid_argument("TomographyPlan: settings do not cover all tuples");
        }
}

namespace {

struct PairEntry {
  int plus_det = -1;   // label decoding to +sign/2
  int minus_det = -1;  // label decoding to -sign/2
  double sign = 1.0;
  double p_plus = 0.0, p_minus = 0.0;
};

uint64_t flip_bits(uint64_t label, int n_bits, double flip_p, Rng& rng) {
  if (flip_p <= 0.0) return label;
  for (int b = 0; b < n_bits; ++b)
    if (rng.bernoulli(flip_p)) label ^= 1ull << b;
  return label;
}

}  // namespace

Rdm2 tomograph_rdm2(const DensityMatrix& sigma, const TomographyPlan& plan,
                    const NoiseModel& noise) {
  noise.validate();
  const auto& basis = *sigma.basis;
  const int n_so = basis.n_spin_orbitals();
  plan.validate(n_so);

  if (plan.use_exact_expectations) {
    auto [d1, d2] = measure_rdms(sigma);
    d2.enforce_symmetries();
    return std::move(d2);
  }

  Rdm2 out(n_so);
  const int shots = plan.shots_per_setting;

  for (size_t si = 0; si < plan.settings.size(); ++si) {
    const auto& setting = plan.settings[si];
    Rng rng = Rng::substream(noise.seed, si);

    if (setting.diagonal) {
      // Occupation sampling: draw determinants from the diagonal of sigma,
      // corrupt the label bits, accumulate n_i n_j products.
      Eigen::VectorXd probs = sigma.rho.diagonal().cwiseMax(0.0);
      double total = probs.sum();
      if (total <= 0.0) throw std::runtime_error("tomograph_rdm2: invalid state diagonal");
      std::vector<double> cdf(basis.size());
      double acc = 0.0;
      for (int m = 0; m < basis.size(); ++m) {
        acc += probs(m) / total;
        cdf[m] = acc;
      }
      std::vector<double> sums(static_cast<size_t>(n_so) * n_so, 0.0);
      for (int shot = 0; shot < shots; ++shot) {
        double u = rng.uniform();
        int m = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (m >= basis.size()) m = basis.size() - 1;
        uint64_t label = basis.det(m).combined(basis.n_spatial());
        label = flip_bits(label, n_so, noise.readout_flip, rng);
        for (int i = 0; i < n_so; ++i) {
          if (!((label >> i) & 1)) continue;
          for (int j = i + 1; j < n_so; ++j)
            if ((label >> j) & 1) sums[static_cast<size_t>(i) * n_so + j] += 1.0;
        }
      }
      for (int i = 0; i < n_so; ++i)
        for (int j = i + 1; j < n_so; ++j) {
          double v = sums[static_cast<size_t>(i) * n_so + j] / shots;
          out.data(i, j, i, j) = v;
          out.data(j, i, j, i) = v;
          out.data(i, j, j, i) = -v;
          out.data(j, i, i, j) = -v;
        }
      continue;
    }

    // Off-diagonal class: O = (G + G+)/2 with G = a+_i a+_j a_l a_k couples
    // determinant pairs m <-> m' = m \ {k,l} u {i,j}; eigenvalues are
    // +-1/2 on the pair combinations and 0 elsewhere.
    auto [i, j, k, l] = setting.tuple;
    std::vector<PairEntry> pairs;
    std::unordered_map<uint64_t, std::pair<int, int>> decode;  // label -> (pair, +-)
    for (int m = 0; m < basis.size(); ++m) {
      uint64_t dmask = basis.det(m).combined(basis.n_spatial());
      // Apply a_k, a_l, a+_j, a+_i with sign bookkeeping.
      if (!((dmask >> k) & 1)) continue;
      uint64_t m1 = dmask ^ (1ull << k);
      int sgn = parity_below(dmask, k);
      if (!((m1 >> l) & 1)) continue;
      uint64_t m2 = m1 ^ (1ull << l);
      sgn *= parity_below(m1, l);
      if ((m2 >> j) & 1) continue;
      uint64_t m3 = m2 | (1ull << j);
      sgn *= parity_below(m2, j);
      if ((m3 >> i) & 1) continue;
      uint64_t m4 = m3 | (1ull << i);
      sgn *= parity_below(m3, i);
      int target = basis.index_of(m4);
      if (target < 0 || target == m) continue;
      if (decode.count(dmask) || decode.count(m4)) continue;  // already paired
      PairEntry pe;
      pe.plus_det = m;
      pe.minus_det = target;
      pe.sign = sgn;
      double smm = std::max(0.0, sigma.rho(m, m));
      double stt = std::max(0.0, sigma.rho(target, target));
      double cross = sigma.rho(m, target);
      pe.p_plus = std::max(0.0, 0.5 * (smm + stt) + cross);
      pe.p_minus = std::max(0.0, 0.5 * (smm + stt) - cross);
      decode[dmask] = {static_cast<int>(pairs.size()), +1};
      decode[m4] = {static_cast<int>(pairs.size()), -1};
      pairs.push_back(pe);
    }

    double estimate = 0.0;
    if (!pairs.empty()) {
      // Full outcome distribution: the rotated-frame label of each pair
      // eigenvector is the corresponding determinant string; unpaired
      // determinants keep their own label with outcome 0.
      std::vector<uint64_t> labels;
      std::vector<double> probs;
      std::vector<char> in_pair(basis.size(), 0);
      for (const auto& pe : pairs) {
        in_pair[pe.plus_det] = in_pair[pe.minus_det] = 1;
        labels.push_back(basis.det(pe.plus_det).combined(basis.n_spatial()));
        probs.push_back(pe.p_plus);
        labels.push_back(basis.det(pe.minus_det).combined(basis.n_spatial()));
        probs.push_back(pe.p_minus);
      }
      for (int m = 0; m < basis.size(); ++m) {
        if (in_pair[m]) continue;
        labels.push_back(basis.det(m).combined(basis.n_spatial()));
        probs.push_back(std::max(0.0, sigma.rho(m, m)));
      }
      double norm = 0.0;
      for (double p : probs) norm += p;
      std::vector<double> cdf(probs.size());
      double acc = 0.0;
      for (size_t c = 0; c < probs.size(); ++c) {
        acc += probs[c] / norm;
        cdf[c] = acc;
      }
      double sum = 0.0;
      for (int shot = 0; shot < shots; ++shot) {
        double u = rng.uniform();
        size_t idx = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (idx >= labels.size()) idx = labels.size() - 1;
        uint64_t label = flip_bits(labels[idx], n_so, noise.readout_flip, rng);
        auto it = decode.find(label);
        if (it != decode.end())
          sum += (it->second.second > 0 ? 0.5 : -0.5) * pairs[it->second.first].sign;
      }
      estimate = sum / shots;
    }
    out.data(i, j, k, l) = estimate;
    out.data(j, i, k, l) = -estimate;
    out.data(i, j, l, k) = -estimate;
    out.data(j, i, l, k) = estimate;
    out.data(k, l, i, j) = estimate;
    out.data(l, k, i, j) = -estimate;
    out.data(k, l, j, i) = -estimate;
    out.data(l, k, j, i) = estimate;
  }
  out.enforce_symmetries();
  return out;
}

double reconstruction_error_report(const IntegralSet& ints, const CiState& state,
                                   double epsilon) {
  auto sh = SpinHamiltonian::from(ints);
  auto [d1, d2] = measure_rdms(state);
  Rdm3 d3_exact = measure_rdm3(state);
  AMatrix a_exact = acse_residual(sh, d1, d2, d3_exact);
  AMatrix a_recon = acse_residual(sh, d1, d2, valdemoro3(d2, d1));
  auto energy_of = [&](const CiState& s) { return s.coeffs.dot(apply_hamiltonian(sh, s)); };
  double e_exact = energy_of(step_statevector(state, a_exact, epsilon));
  double e_recon = energy_of(step_statevector(state, a_recon, epsilon));
  return std::abs(e_exact - e_recon);
}

}  // namespace rdmtk
