#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>
#include <utility>

#include "gspwl/errors.hpp"
#include "gspwl/graph.hpp"
#include "gspwl/io.hpp"
#include "gspwl/rng.hpp"

namespace gspwl {

/// Frequency power diagonals at or below this are treated as singular.
inline constexpr double kSingularDiagonalTol = 1e-14;
/// Impropriety coefficients above 1 - kMaxImproperTol count as maximal.
inline constexpr double kMaxImproperTol = 1e-9;
/// Structural checks (Hermitian/symmetric/unitary) use this relative slack.
inline constexpr double kStructureTol = 1e-10;

/// Second-order description of one ordered pair of zero-mean complex
/// vectors (a, b): gamma = E[a b^H] and c = E[a b^T].
struct AugmentedCovariance {
  Eigen::MatrixXcd gamma;
  Eigen::MatrixXcd c;
};

/// Joint second-order description of a zero-mean pair (x, y).
struct JointSecondOrder {
  AugmentedCovariance xx;  ///< gamma Hermitian PSD, c symmetric
  AugmentedCovariance xy;
  AugmentedCovariance yy;  ///< gamma Hermitian PSD, c symmetric

  Eigen::Index nx() const { return xx.gamma.rows(); }
  Eigen::Index ny() const { return yy.gamma.rows(); }
};

/// Checks shapes plus the Hermitian/symmetric structure of the (x,x) and
/// (y,y) blocks within kStructureTol relative error.
inline void validate(const JointSecondOrder& s) {
  const Eigen::Index nx = s.nx();
  const Eigen::Index ny = s.ny();
  auto square = [](const Eigen::MatrixXcd& m, Eigen::Index n, const char* what) {
    if (m.rows() != n || m.cols() != n)
      throw DimensionMismatch(std::string("unexpected shape for ") + what);
  };
  square(s.xx.gamma, nx, "gamma_xx");
  square(s.xx.c, nx, "c_xx");
  square(s.yy.gamma, ny, "gamma_yy");
  square(s.yy.c, ny, "c_yy");
  if (s.xy.gamma.rows() != nx || s.xy.gamma.cols() != ny ||
      s.xy.c.rows() != nx || s.xy.c.cols() != ny)
    throw DimensionMismatch("unexpected shape for cross covariance");
  auto check = [](const Eigen::MatrixXcd& m, bool hermitian, const char* what) {
    const double scale = std::max(1.0, m.norm());
    const double dev = hermitian ? (m - m.adjoint()).norm() : (m - m.transpose()).norm();
    if (dev > kStructureTol * scale)
      throw ConfigError(std::string(what) + (hermitian ? " is not Hermitian" : " is not symmetric"));
  };
  check(s.xx.gamma, true, "gamma_xx");
  check(s.xx.c, false, "c_xx");
  check(s.yy.gamma, true, "gamma_yy");
  check(s.yy.c, false, "c_yy");
}

/// Per-frequency second-order description of a jointly stationary-like pair
/// in the graph frequency domain.  With a_n, g_n, b_n, c_n the diagonals of
/// the transformed gamma_xy, gamma_yy, c_xy, c_yy, the derived quantities
/// are the impropriety coefficient rho_n = |c_n|^2 / g_n^2 in [0, 1] and the
/// Schur diagonal p_n = g_n (1 - rho_n) >= 0.
struct SpectralDiagonalStats {
  Eigen::VectorXcd d_gamma_xy;  ///< a_n
  Eigen::VectorXd d_gamma_yy;   ///< g_n, real positive
  Eigen::VectorXcd d_c_xy;      ///< b_n
  Eigen::VectorXcd d_c_yy;      ///< c_n
  Eigen::VectorXd rho;
  Eigen::VectorXd schur_diag;

  Eigen::Index n() const { return d_gamma_yy.size(); }

  /// Whether frequency n carries a (numerically) maximally improper
  /// observation, where the widely linear augmentation degenerates.
  bool maximally_improper(Eigen::Index i) const { return rho[i] > 1.0 - kMaxImproperTol; }
};

namespace detail {

inline SpectralDiagonalStats finalize_diagonals(Eigen::VectorXcd a, Eigen::VectorXd g,
                                                Eigen::VectorXcd b, Eigen::VectorXcd c) {
  SpectralDiagonalStats d;
  const Eigen::Index n = g.size();
  d.d_gamma_xy = std::move(a);
  d.d_gamma_yy = std::move(g);
  d.d_c_xy = std::move(b);
  d.d_c_yy = std::move(c);
  d.rho.resize(n);
  d.schur_diag.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.d_gamma_yy[i] <= kSingularDiagonalTol)
      throw SingularSpectrum("observation power vanishes at frequency " + std::to_string(i));
    const double raw = std::norm(d.d_c_yy[i]) / (d.d_gamma_yy[i] * d.d_gamma_yy[i]);
    if (raw > 1.0 + 1e-12)
      throw NumericalError("impropriety coefficient exceeds one at frequency " +
                           std::to_string(i));
    d.rho[i] = std::min(raw, 1.0);
    d.schur_diag[i] = d.d_gamma_yy[i] * (1.0 - d.rho[i]);
  }
  return d;
}

}  // namespace detail

/// Transforms all blocks of a joint description into the graph frequency
/// domain (congruence with V^T on the left and V on the right; V is real).
inline JointSecondOrder to_frequency_domain(const GraphSpectrum& s, const JointSecondOrder& joint) {
  validate(joint);
  if (joint.nx() != s.n_vertices() || joint.ny() != s.n_vertices())
    throw DimensionMismatch("statistics do not match the vertex count");
  const Eigen::MatrixXcd v = s.eigenvectors.cast<Complex>();
  auto rot = [&](const Eigen::MatrixXcd& m) {
    return Eigen::MatrixXcd(v.transpose() * m * v);
  };
  JointSecondOrder out;
  out.xx = {rot(joint.xx.gamma), rot(joint.xx.c)};
  out.xy = {rot(joint.xy.gamma), rot(joint.xy.c)};
  out.yy = {rot(joint.yy.gamma), rot(joint.yy.c)};
  return out;
}

/// Extracts the frequency-domain diagonals of a full joint description.
/// The diagonal of the transformed gamma_yy must be real up to relative
/// kStructureTol; its imaginary part is dropped.
inline SpectralDiagonalStats spectral_diagonals_from_full(const GraphSpectrum& s,
                                                          const JointSecondOrder& joint) {
  validate(joint);
  if (joint.nx() != s.n_vertices() || joint.ny() != s.n_vertices())
    throw DimensionMismatch("statistics do not match the vertex count");
  const Eigen::MatrixXcd v = s.eigenvectors.cast<Complex>();
  auto freq_diag = [&](const Eigen::MatrixXcd& m) {
    return Eigen::VectorXcd((v.transpose() * m * v).diagonal());
  };
  const Eigen::VectorXcd a = freq_diag(joint.xy.gamma);
  const Eigen::VectorXcd g_complex = freq_diag(joint.yy.gamma);
  const Eigen::VectorXcd b = freq_diag(joint.xy.c);
  const Eigen::VectorXcd c = freq_diag(joint.yy.c);
  const double scale = std::max(1.0, g_complex.norm());
  if (g_complex.imag().norm() > kStructureTol * scale)
    throw NumericalError("frequency-domain observation power is not real");
  return detail::finalize_diagonals(a, g_complex.real(), b, c);
}

/// K paired draws of (x, y), stored column-wise (x_samples is N x K).
struct TrainingDataset {
  Eigen::MatrixXcd x_samples;
  Eigen::MatrixXcd y_samples;

  Eigen::Index nx() const { return x_samples.rows(); }
  Eigen::Index ny() const { return y_samples.rows(); }
  Eigen::Index k() const { return x_samples.cols(); }
};

inline void validate(const TrainingDataset& d) {
  if (d.x_samples.cols() != d.y_samples.cols())
    throw DimensionMismatch("x and y sample counts differ");
  if (d.k() == 0) throw EmptyDataset("dataset has no samples");
}

/// Plain averages (1/K) sum x_k y_k^H and (1/K) sum x_k y_k^T for every
/// block.  Samples are taken as zero mean: no mean is subtracted.
inline JointSecondOrder sample_full_stats(const TrainingDataset& d) {
  validate(d);
  const double inv_k = 1.0 / static_cast<double>(d.k());
  const Eigen::MatrixXcd& x = d.x_samples;
  const Eigen::MatrixXcd& y = d.y_samples;
  JointSecondOrder s;
  s.xx = {inv_k * (x * x.adjoint()), inv_k * (x * x.transpose())};
  s.xy = {inv_k * (x * y.adjoint()), inv_k * (x * y.transpose())};
  s.yy = {inv_k * (y * y.adjoint()), inv_k * (y * y.transpose())};
  return s;
}

/// Frequency-domain diagonal averages computed directly from the per-sample
/// GFTs; costs O(K N) after the two transforms and never forms full
/// frequency-domain covariance matrices.
inline SpectralDiagonalStats sample_spectral_diagonals(const GraphSpectrum& s,
                                                       const TrainingDataset& d) {
  validate(d);
  if (d.nx() != s.n_vertices() || d.ny() != s.n_vertices())
    throw DimensionMismatch("dataset does not match the vertex count");
  const Eigen::MatrixXcd v = s.eigenvectors.cast<Complex>();
  const Eigen::MatrixXcd xbar = v.transpose() * d.x_samples;
  const Eigen::MatrixXcd ybar = v.transpose() * d.y_samples;
  const double inv_k = 1.0 / static_cast<double>(d.k());
  const Eigen::VectorXcd a = inv_k * (xbar.array() * ybar.array().conjugate()).rowwise().sum();
  const Eigen::VectorXd g = inv_k * ybar.cwiseAbs2().rowwise().sum();
  const Eigen::VectorXcd b = inv_k * (xbar.array() * ybar.array()).rowwise().sum();
  const Eigen::VectorXcd c = inv_k * (ybar.array() * ybar.array()).rowwise().sum();
  return detail::finalize_diagonals(a, g, b, c);
}

// --- dataset file format ----------------------------------------------------
//
// Text/CSV, bit-exact round trip:
//   # gspwl dataset v1
//   # N=<n> K=<k>
//   <Re x[0..N-1]>,<Im x[0..N-1]>,<Re y[0..N-1]>,<Im y[0..N-1]>   (K rows)

inline void save_dataset(std::ostream& out, const TrainingDataset& d) {
  validate(d);
  if (d.nx() != d.ny())
    throw DimensionMismatch("dataset files require equally long x and y");
  const Eigen::Index n = d.nx();
  out << "# gspwl dataset v1\n";
  out << "# N=" << n << " K=" << d.k() << "\n";
  for (Eigen::Index k = 0; k < d.k(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      out << (i ? "," : "") << g17(d.x_samples(i, k).real());
    for (Eigen::Index i = 0; i < n; ++i) out << "," << g17(d.x_samples(i, k).imag());
    for (Eigen::Index i = 0; i < n; ++i) out << "," << g17(d.y_samples(i, k).real());
    for (Eigen::Index i = 0; i < n; ++i) out << "," << g17(d.y_samples(i, k).imag());
    out << "\n";
  }
}

inline void save_dataset(const std::string& path, const TrainingDataset& d) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  save_dataset(out, d);
}

inline TrainingDataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip(line) != "# gspwl dataset v1")
    throw ConfigError("dataset file: missing '# gspwl dataset v1' header");
  long n = 0, k = 0;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# N=%ld K=%ld", &n, &k) != 2)
    throw ConfigError("dataset file: missing '# N=<n> K=<k>' header");
  if (n <= 0) throw ConfigError("dataset file: N must be positive");
  if (k <= 0) throw EmptyDataset("dataset file: K must be positive");
  TrainingDataset d;
  d.x_samples.resize(n, k);
  d.y_samples.resize(n, k);
  for (long row = 0; row < k; ++row) {
    if (!std::getline(in, line))
      throw ConfigError("dataset file: expected " + std::to_string(k) + " rows");
    const std::vector<std::string> f = split(strip(line), ',');
    if (static_cast<long>(f.size()) != 4 * n)
      throw ConfigError("dataset file row " + std::to_string(row) + ": expected " +
                        std::to_string(4 * n) + " fields");
    const std::string ctx = "dataset row " + std::to_string(row);
    for (long i = 0; i < n; ++i) {
      d.x_samples(i, row) = {parse_double(f[i], ctx), parse_double(f[n + i], ctx)};
      d.y_samples(i, row) = {parse_double(f[2 * n + i], ctx), parse_double(f[3 * n + i], ctx)};
    }
  }
  while (std::getline(in, line))
    if (!strip(line).empty())
      throw ConfigError("dataset file: trailing content after declared K rows");
  return d;
}

inline TrainingDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  return load_dataset(in);
}

/// Exact sampler for a zero-mean jointly Gaussian improper pair with the
/// given second-order description, driven by the real composite covariance
/// of (Re x, Im x, Re y, Im y).  Throws InvalidModel when the description is
/// not positive semidefinite (as an augmented covariance).
class ImproperGaussianSampler {
 public:
  explicit ImproperGaussianSampler(const JointSecondOrder& s) : nx_(s.nx()), ny_(s.ny()) {
    validate(s);
    const Eigen::Index m = nx_ + ny_;
    Eigen::MatrixXcd gamma(m, m), c(m, m);
    gamma << s.xx.gamma, s.xy.gamma, s.xy.gamma.adjoint(), s.yy.gamma;
    c << s.xx.c, s.xy.c, s.xy.c.transpose(), s.yy.c;
    // Cov([Re u; Im u]) for u = [x; y]:
    //   [ Re(gamma + c)            Im(c) - Im(gamma) ]
    //   [ Im(c) + Im(gamma)        Re(gamma - c)     ] / 2
    Eigen::MatrixXd sigma(2 * m, 2 * m);
    sigma.topLeftCorner(m, m) = 0.5 * (gamma.real() + c.real());
    sigma.topRightCorner(m, m) = 0.5 * (c.imag() - gamma.imag());
    sigma.bottomLeftCorner(m, m) = 0.5 * (c.imag() + gamma.imag());
    sigma.bottomRightCorner(m, m) = 0.5 * (gamma.real() - c.real());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.info() != Eigen::Success)
      throw NumericalError("composite covariance eigendecomposition failed");
    const double top = std::max(1.0, es.eigenvalues().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10 * top)
      throw InvalidModel("statistics are not a valid (positive semidefinite) "
                         "augmented covariance");
    factor_ = es.eigenvectors() *
              es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::pair<Eigen::VectorXcd, Eigen::VectorXcd> draw(Rng& rng) const {
    const Eigen::Index m = nx_ + ny_;
    const Eigen::VectorXd u = factor_ * rng.gaussian_vector(2 * m);
    Eigen::VectorXcd x(nx_), y(ny_);
    for (Eigen::Index i = 0; i < nx_; ++i) x[i] = {u[i], u[m + i]};
    for (Eigen::Index i = 0; i < ny_; ++i) y[i] = {u[nx_ + i], u[m + nx_ + i]};
    return {std::move(x), std::move(y)};
  }

  TrainingDataset draw_dataset(Rng& rng, Eigen::Index k) const {
    TrainingDataset d;
    d.x_samples.resize(nx_, k);
    d.y_samples.resize(ny_, k);
    for (Eigen::Index col = 0; col < k; ++col) {
      auto [x, y] = draw(rng);
      d.x_samples.col(col) = x;
      d.y_samples.col(col) = y;
    }
    return d;
  }

 private:
  Eigen::Index nx_, ny_;
  Eigen::MatrixXd factor_;
};

/// Builds an observation y = F^{1/2} r from the real part r of `base`, so
/// that y = F conj(y) holds exactly: a maximally improper vector.  F must be
/// unitary and symmetric; F^{1/2} is the principal square root.
inline Eigen::VectorXcd maximally_improper_observation(const GraphSpectrum& s,
                                                       const ComplexGraphSignal& base,
                                                       const Eigen::MatrixXcd& f) {
  const Eigen::Index n = s.n_vertices();
  if (base.values.size() != n || f.rows() != n || f.cols() != n)
    throw DimensionMismatch("base signal or F does not match the vertex count");
  if (base.domain != SignalDomain::vertex)
    throw ConfigError("maximally improper observations live in the vertex domain");
  const double scale = std::max(1.0, f.norm());
  if ((f.adjoint() * f - Eigen::MatrixXcd::Identity(n, n)).norm() > kStructureTol * scale)
    throw NotUnitary("F is not unitary");
  if ((f - f.transpose()).norm() > kStructureTol * scale)
    throw NotUnitary("F is not symmetric");
  const Eigen::MatrixXcd root = f.sqrt();
  const Eigen::VectorXcd y = root * base.values.real().cast<Complex>();
  const double ref = std::max(1.0, y.norm());
  if ((y - f * y.conjugate()).norm() > 1e-10 * ref)
    throw NumericalError("constructed observation fails y = F conj(y)");
  return y;
}

/// Frequency-domain image V^T F V of a vertex-domain conjugation matrix F.
/// When this is diagonal, every frequency of y = F conj(y) is maximally
/// improper (rho_n = 1).
inline Eigen::MatrixXcd spectral_conjugation_matrix(const GraphSpectrum& s,
                                                    const Eigen::MatrixXcd& f) {
  if (f.rows() != s.n_vertices() || f.cols() != s.n_vertices())
    throw DimensionMismatch("F does not match the vertex count");
  const Eigen::MatrixXcd v = s.eigenvectors.cast<Complex>();
  return v.transpose() * f * v;
}

}  // namespace gspwl
