#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "rdmtk/acse.hpp"
#include "rdmtk/rng.hpp"
#include "test_common.hpp"

using namespace rdmtk;

namespace {

CiState random_state(std::shared_ptr<const DeterminantBasis> basis, Rng& rng) {
  Eigen::VectorXd c(basis->size());
  for (int i = 0; i < c.size(); ++i) c(i) = rng.normal();
  c.normalize();
  return CiState::from_coeffs(std::move(basis), std::move(c));
}

AMatrix random_antihermitian(int n, Rng& rng) {
  // Sz-conserving generator, the shape the residual produces: elements whose
  // spin pattern changes Sz vanish for Sz-eigenstate expectation values.
  AMatrix a(n);
  for (auto& x : a.data.raw()) x = rng.normal();
  a.enforce_symmetries();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          if ((i & 1) + (j & 1) != (k & 1) + (l & 1)) a.data(i, j, k, l) = 0.0;
  return a;
}

double tensor4_max_diff(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.raw().size(); ++i)
    m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
  return m;
}

}  // namespace

TEST_CASE("residual with exact 3-RDM matches the commutator oracle") {
  // Random correlated states on H2 and a 3-electron sector.
  struct Case {
    IntegralSet ints;
    int na, nb;
  };
  std::vector<Case> cases;
  cases.push_back({fixtures::h2_mo(), 1, 1});
  cases.push_back({build_h_system(fixtures::h_chain(3, 1.6), 2, 1), 2, 1});

  Rng rng(31);
  for (auto& cs : cases) {
    auto sh = SpinHamiltonian::from(cs.ints);
    auto basis = DeterminantBasis::build(cs.ints.n_spatial, cs.na, cs.nb);
    oracle::FockSpace fock(sh.n_so);
    auto Hf = fock.hamiltonian(sh);
    for (int trial = 0; trial < 3; ++trial) {
      auto state = random_state(basis, rng);
      auto [d1, d2] = measure_rdms(state);
      auto d3 = measure_rdm3(state);
      auto a = acse_residual(sh, d1, d2, d3);
      auto ref = fock.commutator_residual(Hf, fock.embed(state));
      CHECK(tensor4_max_diff(a.data, ref) < 1e-11);
    }
  }
}

TEST_CASE("residual vanishes on exact eigenstate RDMs") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto [d1, d2] = measure_rdms(gs.state);
  auto d3 = measure_rdm3(gs.state);
  auto a = acse_residual(ints, d1, d2, d3);
  CHECK(a.max_abs() < 1e-10);
}

TEST_CASE("residual on the H2 HF determinant drives the pair excitation") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto [d1, d2] = measure_rdms(hf);
  auto d3 = measure_rdm3(hf);
  auto a = acse_residual(ints, d1, d2, d3);
  CHECK(a.max_abs() > 1e-3);
  // The largest element must connect the (0a,0b) -> (1a,1b) pair excitation,
  // i.e. spin orbitals (2,3) <- (0,1) and its symmetry images.
  double best = a.max_abs();
  CHECK(std::abs(a.data(2, 3, 0, 1)) == doctest::Approx(best).epsilon(1e-12));
  // Cross-check the element against the statevector commutator.
  auto sh = SpinHamiltonian::from(ints);
  oracle::FockSpace fock(4);
  auto ref = fock.commutator_residual(fock.hamiltonian(sh), fock.embed(hf));
  CHECK(a.data(2, 3, 0, 1) == doctest::Approx(ref(2, 3, 0, 1)).epsilon(1e-12));
}

TEST_CASE("residual vanishes for a determinant under a one-body Hamiltonian") {
  auto ints = fixtures::h2_mo();
  // Zero the two-electron part and make the one-body part diagonal (canonical).
  IntegralSet one = ints;
  one.two_body = Tensor4(one.n_spatial);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(one.one_body);
  one = transform_orbitals(one, es.eigenvectors());
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto [d1, d2] = measure_rdms(hf);
  auto d3 = measure_rdm3(hf);
  auto a = acse_residual(one, d1, d2, d3);
  CHECK(a.max_abs() < 1e-12);
}

TEST_CASE("residual is anti-Hermitian and pair-antisymmetric") {
  Rng rng(37);
  auto ints = fixtures::h2_mo();
  auto sh = SpinHamiltonian::from(ints);
  auto basis = DeterminantBasis::build(2, 1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    auto state = random_state(basis, rng);
    auto [d1, d2] = measure_rdms(state);
    auto a = acse_residual(sh, d1, d2, measure_rdm3(state));
    CHECK(a.anti_hermiticity_violation() < 1e-12);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int l = 0; l < 4; ++l)
            CHECK(std::abs(a.data(i, j, k, l) + a.data(j, i, k, l)) < 1e-12);
  }
}

TEST_CASE("step_statevector basics") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  Rng rng(41);
  auto state = random_state(basis, rng);

  SUBCASE("epsilon zero is the identity") {
    auto out = step_statevector(state, random_antihermitian(4, rng), 0.0);
    CHECK((out.coeffs - state.coeffs).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("unitarity on random generators") {
    for (int t = 0; t < 5; ++t) {
      auto a = random_antihermitian(4, rng);
      auto out = step_statevector(state, a, 0.17);
      CHECK(std::abs(out.norm() - 1.0) < 1e-12);
    }
  }
  SUBCASE("matches the dense matrix exponential") {
    auto a = random_antihermitian(4, rng);
    oracle::FockSpace fock(4);
    Eigen::MatrixXd amat = fock.two_body_operator(a.data);
    // exp via scaling and squaring on the oracle matrix.
    Eigen::MatrixXd m = 0.05 * amat;
    Eigen::MatrixXd expm = Eigen::MatrixXd::Identity(m.rows(), m.cols());
    Eigen::MatrixXd term = expm;
    for (int k = 1; k < 40; ++k) {
      term = (m * term) / k;
      expm += term;
    }
    Eigen::VectorXd ref = expm * fock.embed(state);
    auto out = step_statevector(state, a, 0.05);
    double mx = 0.0;
    for (int i = 0; i < basis->size(); ++i)
      mx = std::max(mx, std::abs(out.coeffs(i) -
                                 ref(static_cast<int>(basis->det(i).combined(2)))));
    CHECK(mx < 1e-13);
  }
}

TEST_CASE("energy slope along the residual direction matches finite differences") {
  auto ints = fixtures::h2_mo();
  auto sh = SpinHamiltonian::from(ints);
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto [d1, d2] = measure_rdms(hf);
  auto a = acse_residual(sh, d1, d2, measure_rdm3(hf));

  auto energy_at = [&](double eps) {
    auto s = step_statevector(hf, a, eps);
    return s.coeffs.dot(apply_hamiltonian(sh, s));
  };
  // dE/deps at 0 equals -||A||_F^2 for the steepest-descent generator.
  double h = 1e-5;
  double slope_fd = (energy_at(h) - energy_at(-h)) / (2.0 * h);
  double slope_expected = -a.frobenius_norm() * a.frobenius_norm();
  CHECK(slope_fd == doctest::Approx(slope_expected).epsilon(1e-6));
  // And the energy decreases for a small positive step.
  CHECK(energy_at(0.02) < energy_at(0.0));
}

TEST_CASE("step_rdm basics") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto [d1, d2] = measure_rdms(hf);
  Rng rng(43);

  SUBCASE("epsilon zero leaves the RDMs unchanged") {
    auto a = random_antihermitian(4, rng);
    auto [o1, o2] = step_rdm(d1, d2, a, 0.0, 2);
    CHECK((o1.data - d1.data).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(tensor4_max_diff(o2.data, d2.data) < 1e-14);
  }
  SUBCASE("zero generator leaves the RDMs unchanged") {
    AMatrix zero(4);
    auto [o1, o2] = step_rdm(d1, d2, zero, 0.05, 2);
    CHECK(tensor4_max_diff(o2.data, d2.data) < 1e-14);
  }
  SUBCASE("first-order agreement with the statevector step (Richardson)") {
    auto sh = SpinHamiltonian::from(ints);
    auto a = acse_residual(sh, d1, d2, measure_rdm3(hf));
    auto err_at = [&](double eps) {
      auto [r1, r2] = step_rdm(d1, d2, a, eps, 2);
      auto sv = step_statevector(hf, a, eps);
      auto [m1, m2] = measure_rdms(sv);
      return tensor4_max_diff(r2.data, m2.data);
    };
    double e1 = err_at(0.08);
    double e2 = err_at(0.04);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.35));  // O(eps^2) scaling
  }
}

TEST_CASE("cumulant-mode steps preserve 2-RDM symmetries") {
  auto ints = fixtures::h4_mo();
  auto basis = DeterminantBasis::build(4, 2, 2);
  auto hf = CiState::determinant(basis, Det{0b0011u, 0b0011u});
  auto [d1, d2] = measure_rdms(hf);
  auto sh = SpinHamiltonian::from(ints);
  Rdm1 c1 = d1;
  Rdm2 c2 = d2;
  for (int step = 0; step < 3; ++step) {
    auto a = acse_residual(sh, c1, c2, valdemoro3(c2, c1));
    std::tie(c1, c2) = step_rdm(c1, c2, a, 0.05, 4);
    CHECK(c2.antisymmetry_violation() < 1e-8);
    CHECK(c2.hermiticity_violation() < 1e-8);
    CHECK(c2.trace() == doctest::Approx(12.0).epsilon(1e-12));
  }
}

TEST_CASE("solve_acse statevector mode reaches FCI for H2") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto fci = ground_state(ints, 1, 1);

  SolverConfig cfg;
  cfg.mode = SolverMode::statevector;
  cfg.energy_tol = 1e-11;
  cfg.residual_tol = 1e-7;
  cfg.max_iters = 100;
  auto trace = solve_acse(ints, hf, cfg);
  CHECK(trace.converged);
  CHECK(std::abs(trace.final_energy - fci.energy) < 1e-8);
  CHECK(trace.iterations.size() <= 101);
  // Monotone energies under halving control.
  for (size_t i = 1; i < trace.iterations.size(); ++i)
    CHECK(trace.iterations[i].energy <= trace.iterations[i - 1].energy + 1e-12);
  CHECK(trace.final_energy <= trace.iterations.front().energy + 1e-12);
}

TEST_CASE("solve_acse terminates immediately on an exact eigenstate seed") {
  auto ints = fixtures::h2_mo();
  auto fci = ground_state(ints, 1, 1);
  SolverConfig cfg;
  cfg.mode = SolverMode::statevector;
  cfg.residual_tol = 1e-6;
  auto trace = solve_acse(ints, fci.state, cfg);
  CHECK(trace.converged);
  CHECK(trace.reason == StopReason::residual_converged);
  CHECK(trace.iterations.size() == 1);
  CHECK(trace.iterations.front().iter == 0);
}

TEST_CASE("solve_acse cumulant mode on H4 lands within 2 mHa of FCI") {
  auto ints = fixtures::h4_mo();
  auto basis = DeterminantBasis::build(4, 2, 2);
  auto hf = CiState::determinant(basis, Det{0b0011u, 0b0011u});
  auto [d1, d2] = measure_rdms(hf);
  auto fci = ground_state(ints, 2, 2);

  SolverConfig cfg;
  cfg.mode = SolverMode::cumulant_rdm;
  cfg.energy_tol = 1e-9;
  cfg.residual_tol = 1e-5;
  cfg.max_iters = 300;
  auto trace = solve_acse(ints, d1, d2, cfg);
  CHECK(std::abs(trace.final_energy - fci.energy) < 2e-3);
  CHECK(trace.final_energy <= trace.iterations.front().energy + 1e-12);
}

TEST_CASE("statevector and cumulant modes agree at convergence for H2") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});

  SolverConfig sv;
  sv.mode = SolverMode::statevector;
  sv.energy_tol = 1e-11;
  sv.max_iters = 150;
  auto t1 = solve_acse(ints, hf, sv);

  SolverConfig cm = sv;
  cm.mode = SolverMode::cumulant_rdm;
  auto t2 = solve_acse(ints, hf, cm);
  CHECK(std::abs(t1.final_energy - t2.final_energy) < 5e-3);
}

TEST_CASE("trace csv output") {
  auto ints = fixtures::h2_mo();
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  SolverConfig cfg;
  cfg.max_iters = 3;
  cfg.step_control = StepControl::fixed;
  auto trace = solve_acse(ints, hf, cfg);
  std::ostringstream out;
  write_acse_trace_csv(trace, out, {"seed hf"});
  auto text = out.str();
  CHECK(text.find("# seed hf\n") == 0);
  CHECK(text.find("iter,energy,residual_norm,epsilon") != std::string::npos);
}

TEST_CASE("invalid configs are rejected") {
  SolverConfig cfg;
  cfg.epsilon = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.energy_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
