#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>

#include "gspwl/psse.hpp"

using namespace gspwl;

namespace {

PowerSystemModel toy_grid() {
  PowerSystemModel m;
  m.n_buses = 3;
  m.lines = {{0, 1, Complex(-0.5, 3.0)}, {1, 2, Complex(-0.2, 4.0)}};
  return m;
}

int count_differing_entries(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  int n = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (std::abs(a(i, j) - b(i, j)) > 1e-15) ++n;
  return n;
}

}  // namespace

TEST_CASE("bus matrix matches the hand-built example and sums to zero") {
  const PowerSystemModel m = toy_grid();
  const Eigen::MatrixXcd y = admittance_matrix(m);
  const Complex y01(-0.5, 3.0), y12(-0.2, 4.0);
  Eigen::MatrixXcd expected(3, 3);
  expected << -y01, y01, 0.0, y01, -y01 - y12, y12, 0.0, y12, -y12;
  CHECK((y - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(y.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("susceptance graph Laplacian equals minus the imaginary part") {
  for (std::uint64_t seed : {1ull, 4ull}) {
    const PowerSystemModel m = synthetic_grid(20, 30, seed);
    const Eigen::MatrixXd lap = susceptance_graph(m).laplacian();
    const Eigen::MatrixXd minus_b = -admittance_matrix(m).imag();
    CHECK((lap - minus_b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("power flow equals the per-bus quadratic form") {
  const PowerSystemModel m = toy_grid();
  const Eigen::MatrixXcd y = admittance_matrix(m);
  Eigen::VectorXcd x(3);
  x << Complex(1.02, 0.1), Complex(0.97, -0.05), Complex(1.0, 0.2);
  const Eigen::VectorXcd flow = power_flow(y, x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k) acc += std::conj(y(i, k)) * std::conj(x[k]);
    CHECK(std::abs(flow[i] - x[i] * acc) <= 1e-15);
  }
  // flat voltage profile injects nothing: row sums of Y vanish
  const Eigen::VectorXcd flat = power_flow(y, Eigen::VectorXcd::Ones(3));
  CHECK(flat.cwiseAbs().maxCoeff() <= 1e-14);

  CHECK_THROWS_AS(power_flow(y, Eigen::VectorXcd::Ones(4)), DimensionMismatch);
}

TEST_CASE("sampler is reproducible and obeys the model ranges") {
  const PowerSystemModel m = synthetic_grid(12, 18, 3);
  const PsseSampler sampler(m);

  Rng r1(substream_seed(9, stream::test, trial_index(0, 0)));
  Rng r2(substream_seed(9, stream::test, trial_index(0, 0)));
  const auto [x1, y1] = sampler.draw(r1);
  const auto [x2, y2] = sampler.draw(r2);
  CHECK((x1 - x2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((y1 - y2).cwiseAbs().maxCoeff() == 0.0);

  Rng r3(substream_seed(9, stream::test, trial_index(0, 1)));
  const auto [x3, y3] = sampler.draw(r3);
  CHECK((x1 - x3).cwiseAbs().maxCoeff() > 1e-8);

  for (Eigen::Index i = 0; i < x1.size(); ++i) {
    CHECK(std::abs(x1[i]) > 0.0);
    CHECK(std::abs(x1[i]) < 2.0);  // 1 + 0.1 mu stays near one
    const double phase = std::arg(x1[i]);
    CHECK(phase >= 0.0);
    CHECK(phase <= m.theta_max + 1e-12);
  }
}

TEST_CASE("noise-free measurements equal the exact power flow") {
  PowerSystemModel m = synthetic_grid(10, 14, 2);
  m.noise_sigma = 0.0;
  const Eigen::MatrixXcd y = admittance_matrix(m);
  Rng rng(substream_seed(1, stream::test, 0));
  const TrainingDataset d = sample_psse(m, 6, rng);
  for (Eigen::Index k = 0; k < d.k(); ++k) {
    const Eigen::VectorXcd expected = power_flow(y, d.x_samples.col(k));
    CHECK((d.y_samples.col(k) - expected).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("zero phase spread produces real positive states") {
  PowerSystemModel m = synthetic_grid(8, 12, 5);
  m.theta_max = 0.0;
  Rng rng(substream_seed(1, stream::train, 100));
  const TrainingDataset d = sample_psse(m, 40, rng);
  CHECK(d.x_samples.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.x_samples.real().minCoeff() > 0.0);
}

TEST_CASE("topology perturbation changes exactly four entries per line") {
  const PowerSystemModel base = synthetic_grid(30, 45, 1);
  const Eigen::MatrixXd lap_base = susceptance_graph(base).laplacian();
  for (TopologyChange mode : {TopologyChange::remove, TopologyChange::add}) {
    for (int n_changes : {1, 3, 10}) {
      Rng rng(substream_seed(7, stream::perturb, n_changes));
      const PowerSystemModel p = perturb_topology(base, n_changes, mode, rng);
      const int delta = mode == TopologyChange::remove ? -n_changes : n_changes;
      CHECK(static_cast<int>(p.lines.size()) ==
            static_cast<int>(base.lines.size()) + delta);
      const Eigen::MatrixXd lap = susceptance_graph(p).laplacian();
      CHECK(count_differing_entries(lap, lap_base) == 4 * n_changes);
    }
  }
}

TEST_CASE("zero changes return the model untouched") {
  const PowerSystemModel base = synthetic_grid(15, 24, 2);
  Rng rng(substream_seed(7, stream::perturb, 0));
  const PowerSystemModel p = perturb_topology(base, 0, TopologyChange::remove, rng);
  REQUIRE(p.lines.size() == base.lines.size());
  for (std::size_t i = 0; i < p.lines.size(); ++i) {
    CHECK(p.lines[i].m == base.lines[i].m);
    CHECK(p.lines[i].k == base.lines[i].k);
    CHECK(p.lines[i].admittance == base.lines[i].admittance);
  }
}

TEST_CASE("line removal never disconnects the grid") {
  const PowerSystemModel base = synthetic_grid(30, 45, 1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(substream_seed(s, stream::perturb, 10));
    const PowerSystemModel p = perturb_topology(base, 10, TopologyChange::remove, rng);
    CHECK_NOTHROW(susceptance_graph(p));  // graph construction checks connectivity
  }
}

TEST_CASE("infeasible perturbations are rejected") {
  const PowerSystemModel base = synthetic_grid(30, 45, 1);
  Rng rng(1);
  CHECK_THROWS_AS(perturb_topology(base, -1, TopologyChange::remove, rng), InvalidModel);
  CHECK_THROWS_AS(perturb_topology(base, 16, TopologyChange::remove, rng), InvalidModel);

  // a tree has no removable line
  const PowerSystemModel tree = synthetic_grid(10, 9, 3);
  CHECK_THROWS_AS(perturb_topology(tree, 1, TopologyChange::remove, rng),
                  DisconnectionRisk);

  // a complete grid has no room for additions
  const PowerSystemModel complete = synthetic_grid(4, 6, 3);
  CHECK_THROWS_AS(perturb_topology(complete, 1, TopologyChange::add, rng),
                  DisconnectionRisk);
}

TEST_CASE("model validation rejects malformed grids") {
  PowerSystemModel m = toy_grid();
  m.n_buses = 1;
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.lines[0].k = 3;
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.lines[0].k = 0;
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.lines[0].admittance = Complex(0.5, 3.0);
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.lines[0].admittance = Complex(-0.5, 0.0);
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.lines.push_back({1, 0, Complex(-0.1, 2.0)});
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.theta_max = -0.1;
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.theta_max = 7.0;
  CHECK_THROWS_AS(validate(m), InvalidModel);
  m = toy_grid();
  m.noise_sigma = -1.0;
  CHECK_THROWS_AS(validate(m), InvalidModel);
}

TEST_CASE("synthetic grid is deterministic and validates its arguments") {
  CHECK_THROWS_AS(synthetic_grid(10, 8, 1), InvalidModel);   // fewer lines than a tree
  CHECK_THROWS_AS(synthetic_grid(4, 7, 1), InvalidModel);    // more lines than pairs
  CHECK_THROWS_AS(synthetic_grid(1, 0, 1), InvalidModel);

  const PowerSystemModel a = synthetic_grid(30, 45, 11);
  const PowerSystemModel b = synthetic_grid(30, 45, 11);
  std::ostringstream sa, sb;
  save_case_file(sa, a);
  save_case_file(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.n_buses == 30);
  CHECK(a.lines.size() == 45);
  CHECK_NOTHROW(susceptance_graph(a));

  const PowerSystemModel c = synthetic_grid(30, 45, 12);
  std::ostringstream sc;
  save_case_file(sc, c);
  CHECK(sa.str() != sc.str());
}

TEST_CASE("case files round trip exactly") {
  const PowerSystemModel m = synthetic_grid(17, 28, 6);
  std::ostringstream out;
  save_case_file(out, m);
  std::istringstream in(out.str());
  const PowerSystemModel back = load_case_file(in);
  REQUIRE(back.n_buses == m.n_buses);
  REQUIRE(back.lines.size() == m.lines.size());
  for (std::size_t i = 0; i < m.lines.size(); ++i) {
    CHECK(back.lines[i].m == m.lines[i].m);
    CHECK(back.lines[i].k == m.lines[i].k);
    CHECK(back.lines[i].admittance == m.lines[i].admittance);
  }
  std::ostringstream again;
  save_case_file(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("malformed case files report the offending line") {
  auto load_from = [](const std::string& text) {
    std::istringstream in(text);
    return load_case_file(in);
  };
  CHECK_THROWS_AS(load_from("N=3\n0,1,-0.5,3\n"), ConfigError);
  CHECK_THROWS_AS(load_from("# gspwl grid case v1\nbuses=3\n"), ConfigError);
  CHECK_THROWS_AS(load_from("# gspwl grid case v1\nN=1\n"), ConfigError);
  CHECK_THROWS_WITH(load_from("# gspwl grid case v1\nN=3\n0,1,-0.5\n"),
                    Catch::Matchers::ContainsSubstring("line 3"));
  CHECK_THROWS_WITH(load_from("# gspwl grid case v1\nN=3\n0,1,-0.5,3\n1,x,-0.2,4\n"),
                    Catch::Matchers::ContainsSubstring("line 4"));
  // structural problems surface through model validation
  CHECK_THROWS_AS(load_from("# gspwl grid case v1\nN=3\n0,1,0.5,3\n"), InvalidModel);
  CHECK_THROWS_AS(load_from("# gspwl grid case v1\nN=3\n0,1,-0.5,3\n1,0,-0.2,4\n"),
                  InvalidModel);
}
