#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>

#include "gspwl/errors.hpp"
#include "gspwl/graph.hpp"
#include "gspwl/stats.hpp"

namespace gspwl {

/// Relative pivot threshold below which a strict solve reports singularity.
inline constexpr double kSingularPivotTol = 1e-13;
/// Relative Frobenius tolerance for the diagonal-coincidence test.
inline constexpr double kCoincidenceTol = 1e-8;

/// Widely linear estimator in operator form: x_hat = h1 y + h2 conj(y).
struct WidelyLinearOperatorPair {
  Eigen::MatrixXcd h1;
  Eigen::MatrixXcd h2;
};

/// Widely linear estimator in graph-filter form:
/// x_hat = V diag(f1) V^T y + V diag(f2) V^T conj(y).
struct WidelyLinearGraphFilterPair {
  Eigen::VectorXcd f1;
  Eigen::VectorXcd f2;
};

/// Equivalent real description of a widely linear graph-filter pair acting
/// on stacked real/imaginary parts:
///   Re x_hat = g11(L) Re y + g12(L) Im y
///   Im x_hat = g21(L) Re y + g22(L) Im y
struct RealFourFilterForm {
  Eigen::VectorXd g11, g12, g21, g22;
};

/// Minimum mean squared errors of the four estimator families plus the two
/// impropriety gap terms.
struct MseReport {
  double lmmse = 0.0;
  double wlmmse = 0.0;
  double gsp_lmmse = 0.0;
  double gsp_wlmmse = 0.0;
  double gap_wl_vs_l = 0.0;  ///< lmmse - wlmmse, from the trace identity
  double gap_gsp = 0.0;      ///< gsp_lmmse - gsp_wlmmse, from the Schur diagonal
};

/// strict: singular systems throw.  permissive: the factorization result is
/// returned as-is so Monte Carlo sweeps can record diverged runs instead of
/// aborting.
enum class SolvePolicy { strict, permissive };

namespace detail {

/// Solves A X = B for Hermitian A via LDLT.
template <typename SingularError>
Eigen::MatrixXcd hermitian_solve(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                 SolvePolicy policy, const char* what) {
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
  if (policy == SolvePolicy::strict) {
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > kSingularPivotTol * dmax))
      throw SingularError(std::string(what) + " is singular to working precision");
  }
  return ldlt.solve(b);
}

}  // namespace detail

/// Linear MMSE operator gamma_xy gamma_yy^{-1}.
inline Eigen::MatrixXcd lmmse_operator(const JointSecondOrder& s,
                                       SolvePolicy policy = SolvePolicy::strict) {
  validate(s);
  return detail::hermitian_solve<SingularCovariance>(s.yy.gamma, s.xy.gamma.adjoint(),
                                                     policy, "observation covariance")
      .adjoint();
}

inline Eigen::VectorXcd lmmse(const JointSecondOrder& s, const Eigen::VectorXcd& y,
                              SolvePolicy policy = SolvePolicy::strict) {
  if (y.size() != s.ny()) throw DimensionMismatch("observation length mismatch");
  return lmmse_operator(s, policy) * y;
}

/// Widely linear MMSE operators.  With T = gamma_yy^{-1} c_yy and the
/// Hermitian Schur complement P = gamma_yy - c_yy conj(T):
///   h1 = (gamma_xy - c_xy conj(T)) P^{-1}
///   h2 = (c_xy - gamma_xy T) conj(P)^{-1}
/// Everything is computed through linear solves; no matrix is inverted.
/// Under SolvePolicy::permissive a singular P yields a least-squares solve of
/// the Schur system only; for fully improper observations (P = 0) that does
/// not solve the original augmented normal equations.  The per-frequency
/// solver handles that regime explicitly; this one targets regular models.
inline WidelyLinearOperatorPair wlmmse_operators(const JointSecondOrder& s,
                                                 SolvePolicy policy = SolvePolicy::strict) {
  validate(s);
  const Eigen::MatrixXcd t = detail::hermitian_solve<SingularCovariance>(
      s.yy.gamma, s.yy.c, policy, "observation covariance");
  const Eigen::MatrixXcd p = s.yy.gamma - s.yy.c * t.conjugate();
  const Eigen::MatrixXcd a1 = s.xy.gamma - s.xy.c * t.conjugate();
  const Eigen::MatrixXcd a2 = s.xy.c - s.xy.gamma * t;
  WidelyLinearOperatorPair h;
  h.h1 = detail::hermitian_solve<SingularSchur>(p, a1.adjoint(), policy,
                                                "observation Schur complement")
             .adjoint();
  h.h2 = detail::hermitian_solve<SingularSchur>(p, a2.transpose(), policy,
                                                "observation Schur complement")
             .transpose();
  return h;
}

inline Eigen::VectorXcd wlmmse(const JointSecondOrder& s, const Eigen::VectorXcd& y,
                               SolvePolicy policy = SolvePolicy::strict) {
  if (y.size() != s.ny()) throw DimensionMismatch("observation length mismatch");
  const WidelyLinearOperatorPair h = wlmmse_operators(s, policy);
  return h.h1 * y + h.h2 * y.conjugate();
}

inline Eigen::VectorXcd apply_operator_pair(const WidelyLinearOperatorPair& h,
                                            const Eigen::VectorXcd& y) {
  if (y.size() != h.h1.cols()) throw DimensionMismatch("observation length mismatch");
  return h.h1 * y + h.h2 * y.conjugate();
}

/// GSP-LMMSE graph-frequency response a_n / g_n.
inline Eigen::VectorXcd gsp_lmmse_filter(const SpectralDiagonalStats& d) {
  return d.d_gamma_xy.array() / d.d_gamma_yy.array().cast<Complex>();
}

/// GSP-WLMMSE graph-frequency response pair, solving the per-frequency
/// augmented normal equations through the scalar Schur complement
/// p_n = g_n (1 - rho_n):
///   f1[n] = (a_n - b_n conj(c_n) / g_n) / p_n
///   f2[n] = (b_n - c_n a_n / g_n) / p_n
/// Maximally improper frequencies (rho_n = 1 numerically) degenerate to the
/// linear solution: f1[n] = a_n / g_n, f2[n] = 0.
inline WidelyLinearGraphFilterPair gsp_wlmmse_filters(const SpectralDiagonalStats& d) {
  const Eigen::Index n = d.n();
  WidelyLinearGraphFilterPair f;
  f.f1.resize(n);
  f.f2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex a = d.d_gamma_xy[i];
    const double g = d.d_gamma_yy[i];
    const Complex b = d.d_c_xy[i];
    const Complex c = d.d_c_yy[i];
    if (d.maximally_improper(i)) {
      f.f1[i] = a / g;
      f.f2[i] = 0.0;
    } else {
      const double p = d.schur_diag[i];
      f.f1[i] = (a - b * std::conj(c) / g) / p;
      f.f2[i] = (b - c * a / g) / p;
    }
  }
  return f;
}

/// Applies a graph-filter pair: V diag(f1) V^T y + V diag(f2) V^T conj(y).
inline Eigen::VectorXcd gsp_wlmmse(const GraphSpectrum& s,
                                   const WidelyLinearGraphFilterPair& f,
                                   const Eigen::VectorXcd& y) {
  if (f.f1.size() != s.n_vertices() || f.f2.size() != s.n_vertices())
    throw DimensionMismatch("filter length does not match the vertex count");
  if (y.size() != s.n_vertices())
    throw DimensionMismatch("observation length does not match the vertex count");
  const Eigen::VectorXcd ybar = s.eigenvectors.transpose() * y;
  return s.eigenvectors * (f.f1.cwiseProduct(ybar) + f.f2.cwiseProduct(ybar.conjugate()));
}

/// lmmse - wlmmse MSE difference through the trace identity
/// tr(h2 conj(P) h2^H); nonnegative for any valid joint description.
inline double mse_gap_wl_vs_l(const JointSecondOrder& s,
                              SolvePolicy policy = SolvePolicy::strict) {
  validate(s);
  const Eigen::MatrixXcd t = detail::hermitian_solve<SingularCovariance>(
      s.yy.gamma, s.yy.c, policy, "observation covariance");
  const Eigen::MatrixXcd p = s.yy.gamma - s.yy.c * t.conjugate();
  const Eigen::MatrixXcd a2 = s.xy.c - s.xy.gamma * t;
  const Eigen::MatrixXcd h2 = detail::hermitian_solve<SingularSchur>(
                                  p, a2.transpose(), policy, "observation Schur complement")
                                  .transpose();
  return (h2 * p.conjugate() * h2.adjoint()).real().trace();
}

/// gsp_lmmse - gsp_wlmmse MSE difference: sum_n p_n |f2[n]|^2.
inline double mse_gap_gsp(const SpectralDiagonalStats& d) {
  const WidelyLinearGraphFilterPair f = gsp_wlmmse_filters(d);
  double gap = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) gap += d.schur_diag[i] * std::norm(f.f2[i]);
  return gap;
}

/// Theoretical MSEs of all four estimators from one joint description and
/// its frequency diagonals.
inline MseReport theoretical_mses(const JointSecondOrder& s, const SpectralDiagonalStats& d,
                                  SolvePolicy policy = SolvePolicy::strict) {
  validate(s);
  if (d.n() != s.ny()) throw DimensionMismatch("diagonal statistics length mismatch");
  const double trace_xx = s.xx.gamma.real().trace();
  MseReport r;
  {
    const Eigen::MatrixXcd z = detail::hermitian_solve<SingularCovariance>(
        s.yy.gamma, s.xy.gamma.adjoint(), policy, "observation covariance");
    r.lmmse = trace_xx - (s.xy.gamma * z).real().trace();
  }
  {
    const WidelyLinearOperatorPair h = wlmmse_operators(s, policy);
    const Eigen::MatrixXcd reduction =
        h.h1 * s.yy.gamma * h.h1.adjoint() + h.h1 * s.yy.c * h.h2.adjoint() +
        h.h2 * s.yy.c.conjugate() * h.h1.adjoint() +
        h.h2 * s.yy.gamma.conjugate() * h.h2.adjoint();
    r.wlmmse = trace_xx - reduction.real().trace();
  }
  {
    double captured = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
      captured += std::norm(d.d_gamma_xy[i]) / d.d_gamma_yy[i];
    r.gsp_lmmse = trace_xx - captured;
  }
  {
    const WidelyLinearGraphFilterPair f = gsp_wlmmse_filters(d);
    double captured = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
      captured += (std::conj(d.d_gamma_xy[i]) * f.f1[i] + std::conj(d.d_c_xy[i]) * f.f2[i])
                      .real();
    r.gsp_wlmmse = trace_xx - captured;
  }
  r.gap_wl_vs_l = mse_gap_wl_vs_l(s, policy);
  r.gap_gsp = mse_gap_gsp(d);
  const double scale = std::max(1.0, trace_xx);
  for (double* v : {&r.lmmse, &r.wlmmse, &r.gsp_lmmse, &r.gsp_wlmmse, &r.gap_wl_vs_l,
                    &r.gap_gsp}) {
    if (!std::isfinite(*v)) throw NumericalError("MSE evaluation is not finite");
    if (*v < -1e-8 * scale) throw NumericalError("MSE evaluation is negative");
    *v = std::max(*v, 0.0);
  }
  return r;
}

/// Inner-product residuals |E[(x_hat - x)^H y]| and |E[(x_hat - x)^H y*]|
/// of a graph-filter pair, evaluated analytically from the frequency
/// diagonals.  Both vanish at the optimum.
inline std::array<double, 2> orthogonality_residuals(const SpectralDiagonalStats& d,
                                                     const WidelyLinearGraphFilterPair& f) {
  if (f.f1.size() != d.n() || f.f2.size() != d.n())
    throw DimensionMismatch("filter length does not match the diagonal statistics");
  Complex r1 = 0.0, r2 = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const Complex a = d.d_gamma_xy[i];
    const double g = d.d_gamma_yy[i];
    const Complex b = d.d_c_xy[i];
    const Complex c = d.d_c_yy[i];
    r1 += std::conj(f.f1[i]) * g + std::conj(f.f2[i]) * c - std::conj(a);
    r2 += std::conj(f.f1[i]) * std::conj(c) + std::conj(f.f2[i]) * g - std::conj(b);
  }
  return {std::abs(r1), std::abs(r2)};
}

/// Real four-filter description of a widely linear graph-filter pair.
inline RealFourFilterForm real_four_filter_form(const WidelyLinearGraphFilterPair& f) {
  RealFourFilterForm g;
  g.g11 = f.f1.real() + f.f2.real();
  g.g12 = -f.f1.imag() + f.f2.imag();
  g.g21 = f.f1.imag() + f.f2.imag();
  g.g22 = f.f1.real() - f.f2.real();
  return g;
}

/// Applies a RealFourFilterForm to the stacked real representation of y and
/// reassembles the complex estimate.
inline Eigen::VectorXcd apply_real_four_filter(const GraphSpectrum& s,
                                               const RealFourFilterForm& g,
                                               const Eigen::VectorXcd& y) {
  if (g.g11.size() != s.n_vertices() || y.size() != s.n_vertices())
    throw DimensionMismatch("filter or observation length mismatch");
  const Eigen::VectorXd ybar_re = s.eigenvectors.transpose() * y.real();
  const Eigen::VectorXd ybar_im = s.eigenvectors.transpose() * y.imag();
  const Eigen::VectorXd x_re =
      s.eigenvectors * (g.g11.cwiseProduct(ybar_re) + g.g12.cwiseProduct(ybar_im));
  const Eigen::VectorXd x_im =
      s.eigenvectors * (g.g21.cwiseProduct(ybar_re) + g.g22.cwiseProduct(ybar_im));
  Eigen::VectorXcd x(s.n_vertices());
  x.real() = x_re;
  x.imag() = x_im;
  return x;
}

/// Residuals of the frequency-domain coincidence conditions between the
/// full widely linear operators and their diagonal (graph-filter) versions.
struct CoincidenceReport {
  double residual_h1 = 0.0;  ///< relative Frobenius deviation, first block
  double residual_h2 = 0.0;  ///< relative Frobenius deviation, second block
  bool coincide = false;     ///< both residuals within kCoincidenceTol
};

/// Evaluates whether the widely linear MMSE operator of frequency-domain
/// statistics is diagonal, i.e. whether WLMMSE and GSP-WLMMSE coincide.
/// `freq` must already be expressed in the graph frequency domain.
inline CoincidenceReport coincidence_check(const JointSecondOrder& freq,
                                           SolvePolicy policy = SolvePolicy::strict) {
  validate(freq);
  const WidelyLinearOperatorPair full = wlmmse_operators(freq, policy);
  const SpectralDiagonalStats d = detail::finalize_diagonals(
      freq.xy.gamma.diagonal(), freq.yy.gamma.diagonal().real(), freq.xy.c.diagonal(),
      freq.yy.c.diagonal());
  const WidelyLinearGraphFilterPair f = gsp_wlmmse_filters(d);
  CoincidenceReport r;
  const double n1 = std::max(full.h1.norm(), 1e-300);
  const double n2 = std::max(full.h2.norm(), 1e-300);
  r.residual_h1 =
      (full.h1 - Eigen::MatrixXcd(f.f1.asDiagonal())).norm() / n1;
  r.residual_h2 =
      (full.h2 - Eigen::MatrixXcd(f.f2.asDiagonal())).norm() / n2;
  r.coincide = r.residual_h1 <= kCoincidenceTol && r.residual_h2 <= kCoincidenceTol;
  return r;
}

// --- serialization -----------------------------------------------------------
//
// Filter form:   {"N": n, "estimator_tag": tag, "f1": [[re, im], ...], "f2": ...}
// Operator form: {"N": n, "estimator_tag": tag,
//                 "H1": [[re, im], ...] (row-major), "H2": ...}

namespace detail {

inline nlohmann::json complex_list(const Eigen::VectorXcd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back({v[i].real(), v[i].imag()});
  return a;
}

inline Eigen::VectorXcd complex_list_from_json(const nlohmann::json& a, Eigen::Index n,
                                               const char* what) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != n)
    throw ConfigError(std::string("estimator file: ") + what + " has unexpected length");
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = a[static_cast<std::size_t>(i)];
    if (!e.is_array() || e.size() != 2)
      throw ConfigError(std::string("estimator file: ") + what +
                        " entries must be [re, im] pairs");
    v[i] = {e[0].get<double>(), e[1].get<double>()};
  }
  return v;
}

}  // namespace detail

/// Serialized estimator: exactly one of the two representations is present.
struct SerializedEstimator {
  Eigen::Index n = 0;
  std::string estimator_tag;
  std::optional<WidelyLinearGraphFilterPair> filters;
  std::optional<WidelyLinearOperatorPair> operators;
};

inline nlohmann::json to_json(const WidelyLinearGraphFilterPair& f, const std::string& tag) {
  return {{"N", f.f1.size()},
          {"estimator_tag", tag},
          {"f1", detail::complex_list(f.f1)},
          {"f2", detail::complex_list(f.f2)}};
}

inline nlohmann::json to_json(const WidelyLinearOperatorPair& h, const std::string& tag) {
  const Eigen::Index n = h.h1.rows();
  Eigen::VectorXcd flat1(n * n), flat2(n * n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      flat1[r * n + c] = h.h1(r, c);
      flat2[r * n + c] = h.h2(r, c);
    }
  return {{"N", n},
          {"estimator_tag", tag},
          {"H1", detail::complex_list(flat1)},
          {"H2", detail::complex_list(flat2)}};
}

inline SerializedEstimator estimator_from_json(const nlohmann::json& j) {
  if (!j.contains("N") || !j.contains("estimator_tag"))
    throw ConfigError("estimator file: missing N or estimator_tag");
  SerializedEstimator e;
  e.n = j.at("N").get<Eigen::Index>();
  if (e.n <= 0) throw ConfigError("estimator file: N must be positive");
  e.estimator_tag = j.at("estimator_tag").get<std::string>();
  if (j.contains("f1") != j.contains("f2") || j.contains("H1") != j.contains("H2") ||
      j.contains("f1") == j.contains("H1"))
    throw ConfigError("estimator file: provide exactly one of (f1, f2) or (H1, H2)");
  if (j.contains("f1")) {
    WidelyLinearGraphFilterPair f;
    f.f1 = detail::complex_list_from_json(j.at("f1"), e.n, "f1");
    f.f2 = detail::complex_list_from_json(j.at("f2"), e.n, "f2");
    e.filters = std::move(f);
  } else {
    const Eigen::VectorXcd flat1 = detail::complex_list_from_json(j.at("H1"), e.n * e.n, "H1");
    const Eigen::VectorXcd flat2 = detail::complex_list_from_json(j.at("H2"), e.n * e.n, "H2");
    WidelyLinearOperatorPair h;
    h.h1.resize(e.n, e.n);
    h.h2.resize(e.n, e.n);
    for (Eigen::Index r = 0; r < e.n; ++r)
      for (Eigen::Index c = 0; c < e.n; ++c) {
        h.h1(r, c) = flat1[r * e.n + c];
        h.h2(r, c) = flat2[r * e.n + c];
      }
    e.operators = std::move(h);
  }
  return e;
}

inline void save_estimator(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

inline SerializedEstimator load_estimator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open estimator file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("estimator file: ") + e.what());
  }
  return estimator_from_json(j);
}

}  // namespace gspwl
