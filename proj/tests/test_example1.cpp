#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "gspwl/estimators.hpp"
#include "gspwl/example1.hpp"

using namespace gspwl;

namespace {

Example1Config small_config(double eta, int n = 40, std::uint64_t seed = 7) {
  Example1Config c = default_example1_config(seed);
  c.eta = eta;
  c.n_vertices = n;
  c.edge_probability = 0.15;
  return c;
}

}  // namespace

TEST_CASE("theoretical diagonals follow the scalar model algebra") {
  for (double eta : {0.1, 0.3}) {
    const Example1Config c = small_config(eta);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    const Example1Stats stats = example1_theoretical_stats(c, s);
    const double delta = 1.0 - 2.0 * eta * eta;
    const double s2 = c.sigma * c.sigma;
    REQUIRE(stats.diag.n() == c.n_vertices);
    for (Eigen::Index i = 0; i < stats.diag.n(); ++i) {
      const double psi = stats.psi_values[i];
      REQUIRE(psi > 0.0);  // positive response coefficients, nonnegative spectrum
      CHECK(std::abs(stats.diag.d_gamma_xy[i] - psi) <= 1e-13 * psi);
      CHECK(std::abs(stats.diag.d_gamma_yy[i] - (psi * psi + s2)) <=
            1e-13 * (psi * psi + s2));
      CHECK(std::abs(stats.diag.d_c_xy[i] - delta * psi) <= 1e-13 * psi);
      CHECK(std::abs(stats.diag.d_c_yy[i] - delta * psi * psi) <= 1e-13 * psi * psi);
      CHECK(std::abs(stats.inv_snr[i] - s2 / (psi * psi)) <= 1e-13);
    }
    if (eta == 0.1) {
      // delta = 0.98 exactly at eta = 0.1
      for (Eigen::Index i = 0; i < stats.diag.n(); ++i) {
        const double psi2 = stats.psi_values[i] * stats.psi_values[i];
        CHECK(std::abs(stats.diag.d_c_yy[i] - 0.98 * psi2) <= 1e-12 * psi2);
      }
    }
  }
}

TEST_CASE("vertex-domain blocks embed exactly the stored diagonals") {
  const Example1Config c = small_config(0.3);
  const GraphSpectrum s = build_laplacian(example1_graph(c));
  const Example1Stats stats = example1_theoretical_stats(c, s);

  const SpectralDiagonalStats back = spectral_diagonals_from_full(s, stats.joint);
  CHECK((back.d_gamma_xy - stats.diag.d_gamma_xy).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.d_gamma_yy - stats.diag.d_gamma_yy).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.d_c_xy - stats.diag.d_c_xy).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.d_c_yy - stats.diag.d_c_yy).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.rho - stats.diag.rho).cwiseAbs().maxCoeff() <= 1e-12);

  // the frequency-domain blocks must be diagonal matrices
  const JointSecondOrder freq = to_frequency_domain(s, stats.joint);
  auto off_diag_max = [](const Eigen::MatrixXcd& m) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (i != j) worst = std::max(worst, std::abs(m(i, j)));
    return worst;
  };
  CHECK(off_diag_max(freq.yy.gamma) <= 1e-10);
  CHECK(off_diag_max(freq.yy.c) <= 1e-10);
  CHECK(off_diag_max(freq.xy.gamma) <= 1e-10);
  CHECK(off_diag_max(freq.xy.c) <= 1e-10);
}

TEST_CASE("per-frequency solver reproduces the closed-form filters") {
  const double etas[] = {0.0, 0.1, 0.3, 1.0 / std::numbers::sqrt2, 0.9, 1.0 - 1e-6};
  for (double eta : etas) {
    const Example1Config c = small_config(eta);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    const Example1Stats stats = example1_theoretical_stats(c, s);
    const WidelyLinearGraphFilterPair closed = example1_closed_form_filters(c, s);
    const WidelyLinearGraphFilterPair generic = gsp_wlmmse_filters(stats.diag);
    for (Eigen::Index i = 0; i < c.n_vertices; ++i) {
      const double scale1 = std::max(1.0, std::abs(closed.f1[i]));
      const double scale2 = std::max(1.0, std::abs(closed.f2[i]));
      CHECK(std::abs(generic.f1[i] - closed.f1[i]) <= 1e-12 * scale1);
      CHECK(std::abs(generic.f2[i] - closed.f2[i]) <= 1e-12 * scale2);
    }
    if (eta == 1.0 / std::numbers::sqrt2) {
      // proper signal: the conjugate branch vanishes
      CHECK(generic.f2.cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("closed-form error expressions agree with the generic report") {
  for (double eta : {0.1, 0.45, 0.8}) {
    const Example1Config c = small_config(eta);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    const Example1Stats stats = example1_theoretical_stats(c, s);
    const MseReport mses = theoretical_mses(stats.joint, stats.diag);

    const double mse_l = example1_gsp_lmmse_mse_closed_form(c, s);
    CHECK(std::abs(mses.gsp_lmmse - mse_l) <= 1e-10 * std::max(1.0, mse_l));

    const double gap = example1_gap_closed_form(c, s);
    CHECK(std::abs(gap - mse_gap_gsp(stats.diag)) <= 1e-12 * std::max(1.0, gap));
    CHECK(std::abs(gap - (mses.gsp_lmmse - mses.gsp_wlmmse)) <=
          1e-10 * std::max(1.0, gap));
    if (eta > 0.0 && std::abs(1.0 - 2.0 * eta * eta) > 1e-12) CHECK(gap > 0.0);
  }
}

TEST_CASE("diagonal model coincides with the unconstrained optimum") {
  const Example1Config c = small_config(0.3, 24);
  const GraphSpectrum s = build_laplacian(example1_graph(c));
  const Example1Stats stats = example1_theoretical_stats(c, s);

  const CoincidenceReport rep = coincidence_check(to_frequency_domain(s, stats.joint));
  CHECK(rep.coincide);
  CHECK(rep.residual_h1 <= 1e-9);
  CHECK(rep.residual_h2 <= 1e-9);

  const MseReport mses = theoretical_mses(stats.joint, stats.diag);
  CHECK(std::abs(mses.wlmmse - mses.gsp_wlmmse) <= 1e-9);
  CHECK(std::abs(mses.lmmse - mses.gsp_lmmse) <= 1e-9);
}

TEST_CASE("eta controls the impropriety of the drawn signal") {
  SECTION("eta = 0 yields exactly real signals") {
    const Example1Config c = small_config(0.0, 12);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    Rng rng(substream_seed(c.seed, stream::train, 0));
    const TrainingDataset d = sample_example1(c, s, 50, rng);
    CHECK(d.x_samples.imag().cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("eta = 1/sqrt(2) yields a proper signal with unit power") {
    Example1Config c = small_config(1.0 / std::numbers::sqrt2, 12);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    Rng rng(substream_seed(c.seed, stream::train, 0));
    const TrainingDataset d = sample_example1(c, s, 20000, rng);
    const JointSecondOrder hat = sample_full_stats(d);
    CHECK(hat.xx.c.cwiseAbs().maxCoeff() <= 0.05);
    CHECK((hat.xx.gamma - Eigen::MatrixXcd::Identity(12, 12)).cwiseAbs().maxCoeff() <=
          0.06);
    // observed power agrees with the model trace
    const Example1Stats stats = example1_theoretical_stats(c, s);
    const double expected = stats.joint.yy.gamma.real().trace();
    CHECK(std::abs(hat.yy.gamma.real().trace() - expected) <= 0.05 * expected);
  }
}

TEST_CASE("sampling is reproducible per seed and differs across streams") {
  const Example1Config c = small_config(0.25, 10);
  const GraphSpectrum s = build_laplacian(example1_graph(c));
  Rng r1(substream_seed(c.seed, stream::train, 5));
  Rng r2(substream_seed(c.seed, stream::train, 5));
  const TrainingDataset d1 = sample_example1(c, s, 17, r1);
  const TrainingDataset d2 = sample_example1(c, s, 17, r2);
  CHECK((d1.x_samples - d2.x_samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.y_samples - d2.y_samples).cwiseAbs().maxCoeff() == 0.0);

  Rng r3(substream_seed(c.seed, stream::train, 6));
  const TrainingDataset d3 = sample_example1(c, s, 17, r3);
  CHECK((d1.x_samples - d3.x_samples).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("noiseless real-signal model is inverted exactly") {
  Example1Config c = small_config(0.0, 16);
  c.sigma = 0.0;
  const GraphSpectrum s = build_laplacian(example1_graph(c));
  const Example1Stats stats = example1_theoretical_stats(c, s);

  // maximally improper observation: solver falls back to the linear branch
  const WidelyLinearGraphFilterPair f = gsp_wlmmse_filters(stats.diag);
  for (Eigen::Index i = 0; i < 16; ++i) {
    CHECK(std::abs(f.f1[i] - 1.0 / stats.psi_values[i]) <= 1e-12);
    CHECK(std::abs(f.f2[i]) <= 1e-14);
  }

  // widely linear graph filter captures all signal power: zero residual error
  double captured = 0.0;
  for (Eigen::Index i = 0; i < 16; ++i)
    captured += (std::conj(stats.diag.d_gamma_xy[i]) * f.f1[i] +
                 std::conj(stats.diag.d_c_xy[i]) * f.f2[i])
                    .real();
  CHECK(std::abs(stats.joint.xx.gamma.real().trace() - captured) <= 1e-9);
  CHECK(mse_gap_gsp(stats.diag) <= 1e-12);
  CHECK(example1_gsp_lmmse_mse_closed_form(c, s) == 0.0);

  const Example1Sampler sampler(c, s);
  Rng rng(substream_seed(c.seed, stream::test, 0));
  for (int t = 0; t < 5; ++t) {
    const auto [x, y] = sampler.draw(rng);
    const Eigen::VectorXcd xhat = gsp_wlmmse(s, f, y);
    CHECK((xhat - x).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("invalid configurations are rejected") {
  const Example1Config base = small_config(0.2, 8);
  const GraphSpectrum s = build_laplacian(example1_graph(base));

  Example1Config c = base;
  c.eta = -0.1;
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), ConfigError);
  c = base;
  c.eta = 1.01;
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), ConfigError);
  c = base;
  c.sigma = -1.0;
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), ConfigError);
  c = base;
  c.n_vertices = 1;
  CHECK_THROWS_AS(example1_graph(c), ConfigError);
  c = base;
  c.psi.numerator.resize(0);
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), ConfigError);

  c = base;
  c.n_vertices = 9;  // spectrum was built for 8 vertices
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), DimensionMismatch);

  // a response pole sitting on an eigenvalue must be detected
  c = base;
  c.psi.numerator = Eigen::VectorXd::Ones(1);
  c.psi.denominator.resize(1);
  c.psi.denominator[0] = -1.0 / s.eigenvalues[3];
  CHECK_THROWS_AS(example1_theoretical_stats(c, s), PoleOnSpectrum);
}

TEST_CASE("default measurement response stays positive over random spectra") {
  for (std::uint64_t seed : {1ull, 2ull, 9ull}) {
    const Example1Config c = small_config(0.1, 30, seed);
    const GraphSpectrum s = build_laplacian(example1_graph(c));
    const Eigen::VectorXd psi = arma_response(c.psi, s.eigenvalues);
    CHECK(psi.minCoeff() > 0.0);
    Eigen::VectorXd origin(1);
    origin << 0.0;
    CHECK(arma_response(c.psi, origin)[0] > 0.0);
  }
}
