#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdmtk/purification.hpp"
#include "rdmtk/rng.hpp"
#include "rdmtk/tomography.hpp"
#include "test_common.hpp"

using namespace rdmtk;

namespace {

double tensor4_max_diff(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.raw().size(); ++i)
    m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
  return m;
}

}  // namespace

TEST_CASE("depolarizing channel preserves trace and positivity") {
  auto basis = DeterminantBasis::build(2, 1, 1);
  Rng rng(301);
  for (int trial = 0; trial < 20; ++trial) {
    // Random density matrix: G G^T normalized.
    Eigen::MatrixXd g(basis->size(), basis->size());
    for (int i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    DensityMatrix sigma{basis, g * g.transpose()};
    sigma.rho /= sigma.rho.trace();
    double p = rng.uniform();
    depolarize(sigma, p);
    CHECK(std::abs(sigma.trace() - 1.0) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma.rho);
    CHECK(es.eigenvalues().minCoeff() > -1e-14);
  }
}

TEST_CASE("density-matrix rdms of a pure state match the statevector path") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto sigma = DensityMatrix::pure(gs.state);
  auto [d1m, d2m] = measure_rdms(sigma);
  auto [d1s, d2s] = measure_rdms(gs.state);
  CHECK((d1m.data - d1s.data).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(tensor4_max_diff(d2m.data, d2s.data) < 1e-12);
  auto d3m = measure_rdm3(sigma);
  auto d3s = measure_rdm3(gs.state);
  double m3 = 0.0;
  for (size_t i = 0; i < d3m.data.raw().size(); ++i)
    m3 = std::max(m3, std::abs(d3m.data.raw()[i] - d3s.data.raw()[i]));
  CHECK(m3 < 1e-12);
}

TEST_CASE("noiseless prepared state equals the pure ACSE projector") {
  auto ints = fixtures::h2_mo();
  SolverConfig cfg;
  cfg.mode = SolverMode::statevector;
  cfg.max_iters = 40;
  cfg.energy_tol = 1e-11;
  NoiseModel quiet;
  auto sigma = prepare_qacse_state(ints, cfg, quiet);

  auto basis = DeterminantBasis::build(2, 1, 1);
  auto hf = CiState::determinant(basis, Det{1u, 1u});
  auto trace = solve_acse(ints, hf, cfg);
  REQUIRE(trace.final_state.has_value());
  Eigen::MatrixXd proj =
      trace.final_state->coeffs * trace.final_state->coeffs.transpose();
  CHECK((sigma.rho - proj).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fully depolarizing single step yields the maximally mixed sector state") {
  auto ints = fixtures::h2_mo();
  SolverConfig cfg;
  cfg.max_iters = 1;
  cfg.step_control = StepControl::fixed;
  NoiseModel noise;
  noise.depolarizing_p = 1.0;
  auto sigma = prepare_qacse_state(ints, cfg, noise);
  const int dim = static_cast<int>(sigma.rho.rows());
  CHECK((sigma.rho - Eigen::MatrixXd::Identity(dim, dim) / dim).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("depolarizing noise raises the prepared-state energy") {
  auto ints = fixtures::h2_mo();
  auto sh = SpinHamiltonian::from(ints);
  SolverConfig cfg;
  cfg.max_iters = 20;
  cfg.step_control = StepControl::fixed;
  auto energy_of = [&](const DensityMatrix& s) {
    auto [d1, d2] = measure_rdms(s);
    return rdm_energy(sh, d1, d2);
  };
  NoiseModel quiet;
  NoiseModel noisy;
  noisy.depolarizing_p = 0.01;
  double e0 = energy_of(prepare_qacse_state(ints, cfg, quiet));
  double e1 = energy_of(prepare_qacse_state(ints, cfg, noisy));
  CHECK(e1 > e0);
  // Regression value for the noise gap, frozen from this configuration.
  CHECK(e1 - e0 == doctest::Approx(0.028597559).epsilon(1e-4));
}

TEST_CASE("naive plan covers all tuples and reports the setting count") {
  auto plan = TomographyPlan::naive(4, 100);
  CHECK_NOTHROW(plan.validate(4));
  CHECK(plan.settings.size() == 16);  // 1 diagonal group + C(6,2) classes
  TomographyPlan broken = plan;
  broken.settings.resize(3);
  CHECK_THROWS_AS(broken.validate(4), std::invalid_argument);
  TomographyPlan zero = plan;
  zero.shots_per_setting = 0;
  CHECK_THROWS_AS(zero.validate(4), std::invalid_argument);
}

TEST_CASE("exact-expectation tomography reproduces measure_rdms") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto sigma = DensityMatrix::pure(gs.state);
  auto plan = TomographyPlan::naive(4, 1, true);
  NoiseModel quiet;
  auto d2t = tomograph_rdm2(sigma, plan, quiet);
  auto [d1, d2] = measure_rdms(gs.state);
  CHECK(tensor4_max_diff(d2t.data, d2.data) < 1e-12);
}

TEST_CASE("sampled tomography is unbiased and exactly symmetric") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto sigma = DensityMatrix::pure(gs.state);
  auto [d1x, d2x] = measure_rdms(gs.state);
  auto plan = TomographyPlan::naive(4, 40000);
  NoiseModel noise;
  noise.seed = 9;
  auto d2 = tomograph_rdm2(sigma, plan, noise);
  CHECK(d2.antisymmetry_violation() == 0.0);
  CHECK(d2.hermiticity_violation() == 0.0);
  CHECK(tensor4_max_diff(d2.data, d2x.data) < 0.02);  // ~ shots^{-1/2}
}

TEST_CASE("tomography is deterministic under a fixed seed") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto sigma = DensityMatrix::pure(gs.state);
  auto plan = TomographyPlan::naive(4, 500);
  NoiseModel noise;
  noise.seed = 12345;
  noise.readout_flip = 0.03;
  auto a = tomograph_rdm2(sigma, plan, noise);
  auto b = tomograph_rdm2(sigma, plan, noise);
  CHECK(tensor4_max_diff(a.data, b.data) == 0.0);
}

TEST_CASE("rms error halves when shots quadruple") {
  auto ints = fixtures::h2_mo();
  auto gs = ground_state(ints, 1, 1);
  auto sigma = DensityMatrix::pure(gs.state);
  auto [d1x, d2x] = measure_rdms(gs.state);
  NoiseModel noise;

  auto rms_at = [&](int shots, int n_seeds) {
    double acc = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      noise.seed = 40 + s;
      auto plan = TomographyPlan::naive(4, shots);
      auto d2 = tomograph_rdm2(sigma, plan, noise);
      double sq = 0.0;
      for (size_t i = 0; i < d2.data.raw().size(); ++i) {
        double d = d2.data.raw()[i] - d2x.data.raw()[i];
        sq += d * d;
      }
      acc += sq / static_cast<double>(d2.data.raw().size());
    }
    return std::sqrt(acc / n_seeds);
  };
  double r1 = rms_at(1000, 20);
  double r2 = rms_at(4000, 20);
  double slope = std::log(r2 / r1) / std::log(4.0);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("readout flips bias determinant occupations toward one half") {
  // Determinant state: <n_i n_j> sampled under bit flips has the analytic
  // expectation prod over {i,j} of [(1-f) n + f (1-n)].
  auto basis = DeterminantBasis::build(2, 1, 1);
  auto det_state = CiState::determinant(basis, Det{1u, 1u});  // occupies {0, 1}
  auto sigma = DensityMatrix::pure(det_state);
  double f = 0.05;
  NoiseModel noise;
  noise.readout_flip = f;
  noise.seed = 77;
  auto plan = TomographyPlan::naive(4, 200000);
  auto d2 = tomograph_rdm2(sigma, plan, noise);

  auto expect_nn = [&](int ni, int nj) {
    double a = (1.0 - f) * ni + f * (1 - ni);
    double b = (1.0 - f) * nj + f * (1 - nj);
    return a * b;
  };
  CHECK(d2.data(0, 1, 0, 1) == doctest::Approx(expect_nn(1, 1)).epsilon(0.02));
  CHECK(d2.data(2, 3, 2, 3) == doctest::Approx(expect_nn(0, 0)).epsilon(0.25));
  CHECK(d2.data(0, 2, 0, 2) == doctest::Approx(expect_nn(1, 0)).epsilon(0.05));
}

TEST_CASE("reconstruction error report") {
  SUBCASE("determinant state: reconstruction is exact") {
    auto ints = fixtures::h2_mo();
    auto basis = DeterminantBasis::build(2, 1, 1);
    auto hf = CiState::determinant(basis, Det{1u, 1u});
    CHECK(reconstruction_error_report(ints, hf) < 1e-10);
  }
  SUBCASE("correlated H2 state: golden regression value") {
    auto ints = fixtures::h2_mo();
    auto gs = ground_state(ints, 1, 1);
    double err = reconstruction_error_report(ints, gs.state);
    CHECK(err < 1e-3);   // below the millihartree scale
    CHECK(err > 1e-12);  // but genuinely nonzero for a correlated state
  }
  SUBCASE("H4 mid-iteration state stays below a millihartree") {
    auto ints = fixtures::h4_mo();
    auto basis = DeterminantBasis::build(4, 2, 2);
    auto hf = CiState::determinant(basis, Det{0b0011u, 0b0011u});
    SolverConfig cfg;
    cfg.mode = SolverMode::statevector;
    cfg.max_iters = 5;
    cfg.step_control = StepControl::fixed;
    auto trace = solve_acse(ints, hf, cfg);
    REQUIRE(trace.final_state.has_value());
    double err = reconstruction_error_report(ints, *trace.final_state);
    CHECK(err < 1e-3);
  }
}
