#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "gspwl/errors.hpp"
#include "gspwl/estimators.hpp"
#include "gspwl/graph.hpp"
#include "gspwl/graph_filters.hpp"
#include "gspwl/rng.hpp"
#include "gspwl/stats.hpp"

namespace gspwl {

/// Synthetic improper-signal benchmark on a random graph:
///   x = sqrt(1 - eta^2) e_r + j eta e_i          (e_r, e_i iid standard normal)
///   y = V psi(Lambda) V^T x + n                  (n proper Gaussian, sigma^2 I)
/// so gamma_xx = I and c_xx = (1 - 2 eta^2) I.  eta = 1/sqrt(2) makes x
/// proper; eta near 0 or 1 makes it maximally improper.
struct Example1Config {
  double eta = 0.1;
  double sigma = 1.0;
  ArmaFilterParams psi;
  int n_vertices = 100;
  double edge_probability = 0.07;
  std::uint64_t seed = 1;
};

inline void validate(const Example1Config& c) {
  if (c.eta < 0.0 || c.eta > 1.0) throw ConfigError("eta must lie in [0, 1]");
  if (c.sigma < 0.0) throw ConfigError("sigma must be nonnegative");
  if (c.n_vertices <= 1) throw ConfigError("n_vertices must exceed one");
  if (c.psi.numerator.size() == 0) throw ConfigError("psi numerator is empty");
}

/// Random rational measurement response with positive coefficients
/// (numerator degree 2, denominator degree 3), which keeps psi positive and
/// pole-free on the entire nonnegative axis.
inline ArmaFilterParams default_measurement_response(std::uint64_t seed) {
  Rng rng(seed);
  ArmaFilterParams p;
  p.numerator.resize(3);
  p.denominator.resize(3);
  for (Eigen::Index i = 0; i < 3; ++i) p.numerator[i] = rng.uniform(0.5, 1.5);
  for (Eigen::Index i = 0; i < 3; ++i) p.denominator[i] = rng.uniform(0.05, 0.3);
  return p;
}

inline Example1Config default_example1_config(std::uint64_t seed = 1) {
  Example1Config c;
  c.seed = seed;
  c.psi = default_measurement_response(substream_seed(seed, stream::response));
  return c;
}

inline WeightedGraph example1_graph(const Example1Config& c) {
  validate(c);
  Rng rng(substream_seed(c.seed, stream::graph));
  return random_connected_graph(c.n_vertices, c.edge_probability, rng);
}

/// Model statistics: all frequency-domain covariances are diagonal, so the
/// full matrices are V diag(.) V^T embeddings of the stored diagonals.
struct Example1Stats {
  JointSecondOrder joint;        ///< vertex-domain covariance blocks
  SpectralDiagonalStats diag;    ///< the same information per frequency
  Eigen::VectorXd psi_values;    ///< psi(lambda_n)
  Eigen::VectorXd inv_snr;       ///< sigma^2 / psi(lambda_n)^2
};

inline Example1Stats example1_theoretical_stats(const Example1Config& c,
                                                const GraphSpectrum& s) {
  validate(c);
  if (s.n_vertices() != c.n_vertices)
    throw DimensionMismatch("spectrum does not match n_vertices");
  const Eigen::Index n = s.n_vertices();
  const double delta = 1.0 - 2.0 * c.eta * c.eta;  // E[x^2] scale
  Example1Stats out;
  out.psi_values = arma_response(c.psi, s.eigenvalues);
  out.inv_snr.resize(n);
  Eigen::VectorXcd a(n), b(n), cyy(n);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double psi = out.psi_values[i];
    if (psi * psi <= kSingularDiagonalTol && c.sigma == 0.0)
      throw SingularSpectrum("response and noise both vanish at frequency " +
                             std::to_string(i));
    out.inv_snr[i] = psi == 0.0 ? std::numeric_limits<double>::infinity()
                                : c.sigma * c.sigma / (psi * psi);
    a[i] = psi;
    g[i] = psi * psi + c.sigma * c.sigma;
    b[i] = delta * psi;
    cyy[i] = delta * psi * psi;
  }
  out.diag = detail::finalize_diagonals(a, g, b, cyy);
  const Eigen::MatrixXcd v = s.eigenvectors.cast<Complex>();
  auto embed = [&](const Eigen::VectorXcd& d) {
    return Eigen::MatrixXcd(v * d.asDiagonal() * v.transpose());
  };
  const Eigen::Index nn = n;
  out.joint.xx.gamma = Eigen::MatrixXcd::Identity(nn, nn);
  out.joint.xx.c = delta * Eigen::MatrixXcd::Identity(nn, nn);
  out.joint.xy = {embed(a), embed(b)};
  out.joint.yy = {embed(g.cast<Complex>()), embed(cyy)};
  return out;
}

/// Closed-form pair of responses at one frequency: with u = 1/(1 + inv_snr)
/// and delta = 1 - 2 eta^2,
///   f1 = (1/psi) u (1 - delta^2 u) / (1 - delta^2 u^2)
///   f2 = (1/psi) delta u (1 - u)   / (1 - delta^2 u^2).
/// Requires psi(lambda) != 0.  Defined for every lambda >= 0, so it can also
/// back a continuous approximation of the filter pair.
inline std::pair<Complex, Complex> example1_closed_form_response(const Example1Config& c,
                                                                 double lambda) {
  const double psi = arma_response_at(c.psi, lambda);
  if (psi == 0.0) throw SingularSpectrum("closed form requires psi(lambda) != 0");
  const double delta = 1.0 - 2.0 * c.eta * c.eta;
  const double u = 1.0 / (1.0 + c.sigma * c.sigma / (psi * psi));
  const double den = 1.0 - delta * delta * u * u;
  // maximally improper frequency: degenerate to the linear solution
  if (den == 0.0) return {Complex(u / psi), Complex(0.0)};
  return {Complex(u * (1.0 - delta * delta * u) / (psi * den)),
          Complex(delta * u * (1.0 - u) / (psi * den))};
}

/// Closed-form GSP-WLMMSE filter pair over the whole spectrum.
inline WidelyLinearGraphFilterPair example1_closed_form_filters(const Example1Config& c,
                                                                const GraphSpectrum& s) {
  validate(c);
  const Eigen::Index n = s.n_vertices();
  WidelyLinearGraphFilterPair f;
  f.f1.resize(n);
  f.f2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [f1, f2] = example1_closed_form_response(c, s.eigenvalues[i]);
    f.f1[i] = f1;
    f.f2[i] = f2;
  }
  return f;
}

/// Closed-form GSP-LMMSE response: f[n] = (1/psi_n) / (1 + inv_snr_n).
inline Eigen::VectorXcd example1_closed_form_gsp_lmmse(const Example1Config& c,
                                                       const GraphSpectrum& s) {
  validate(c);
  const Eigen::VectorXd psi = arma_response(c.psi, s.eigenvalues);
  Eigen::VectorXcd f(s.n_vertices());
  for (Eigen::Index i = 0; i < s.n_vertices(); ++i) {
    if (psi[i] == 0.0)
      throw SingularSpectrum("closed form requires psi(lambda) != 0");
    f[i] = 1.0 / (psi[i] * (1.0 + c.sigma * c.sigma / (psi[i] * psi[i])));
  }
  return f;
}

/// Closed-form MSE gap between GSP-LMMSE and GSP-WLMMSE:
///   sum_n delta^2 u_n (1 - u_n)^2 / (1 - delta^2 u_n^2).
inline double example1_gap_closed_form(const Example1Config& c, const GraphSpectrum& s) {
  validate(c);
  const Eigen::VectorXd psi = arma_response(c.psi, s.eigenvalues);
  const double delta = 1.0 - 2.0 * c.eta * c.eta;
  double gap = 0.0;
  for (Eigen::Index i = 0; i < s.n_vertices(); ++i) {
    if (psi[i] == 0.0)
      throw SingularSpectrum("closed form requires psi(lambda) != 0");
    const double u = 1.0 / (1.0 + c.sigma * c.sigma / (psi[i] * psi[i]));
    const double den = 1.0 - delta * delta * u * u;
    if (den > 0.0) gap += delta * delta * u * (1.0 - u) * (1.0 - u) / den;
  }
  return gap;
}

/// Closed-form GSP-LMMSE MSE: sum_n inv_snr_n / (1 + inv_snr_n).
inline double example1_gsp_lmmse_mse_closed_form(const Example1Config& c,
                                                 const GraphSpectrum& s) {
  validate(c);
  const Eigen::VectorXd psi = arma_response(c.psi, s.eigenvalues);
  double mse = 0.0;
  for (Eigen::Index i = 0; i < s.n_vertices(); ++i) {
    const double p2 = psi[i] * psi[i];
    mse += c.sigma * c.sigma / (p2 + c.sigma * c.sigma);
  }
  return mse;
}

/// Reusable draw machinery for the model (the measurement operator is built
/// once).  Per sample the stream order is fixed: e_r, e_i, then Re/Im noise.
class Example1Sampler {
 public:
  Example1Sampler(const Example1Config& c, const GraphSpectrum& s)
      : n_(s.n_vertices()),
        eta_(c.eta),
        re_scale_(std::sqrt(1.0 - c.eta * c.eta)),
        noise_scale_(c.sigma * std::numbers::sqrt2 / 2.0) {
    validate(c);
    if (s.n_vertices() != c.n_vertices)
      throw DimensionMismatch("spectrum does not match n_vertices");
    const Eigen::VectorXd psi = arma_response(c.psi, s.eigenvalues);
    response_op_ =
        (s.eigenvectors * psi.asDiagonal() * s.eigenvectors.transpose()).cast<Complex>();
  }

  std::pair<Eigen::VectorXcd, Eigen::VectorXcd> draw(Rng& rng) const {
    Eigen::VectorXcd x(n_);
    for (Eigen::Index i = 0; i < n_; ++i) x[i] = re_scale_ * rng.gaussian();
    for (Eigen::Index i = 0; i < n_; ++i) x[i].imag(eta_ * rng.gaussian());
    Eigen::VectorXcd noise(n_);
    for (Eigen::Index i = 0; i < n_; ++i) noise[i] = noise_scale_ * rng.gaussian();
    for (Eigen::Index i = 0; i < n_; ++i) noise[i].imag(noise_scale_ * rng.gaussian());
    return {x, response_op_ * x + noise};
  }

 private:
  Eigen::Index n_;
  double eta_, re_scale_, noise_scale_;
  Eigen::MatrixXcd response_op_;
};

/// Draws `count` paired samples of the model.
inline TrainingDataset sample_example1(const Example1Config& c, const GraphSpectrum& s,
                                       Eigen::Index count, Rng& rng) {
  const Example1Sampler sampler(c, s);
  TrainingDataset d;
  d.x_samples.resize(s.n_vertices(), count);
  d.y_samples.resize(s.n_vertices(), count);
  for (Eigen::Index k = 0; k < count; ++k) {
    auto [x, y] = sampler.draw(rng);
    d.x_samples.col(k) = x;
    d.y_samples.col(k) = y;
  }
  return d;
}

}  // namespace gspwl
