#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <numbers>
#include <string>
#include <vector>

#include "gspwl/errors.hpp"
#include "gspwl/rng.hpp"
#include "gspwl/types.hpp"

namespace gspwl {

/// Rational (ARMA) spectral response
///   h(lambda) = sum_p c_p lambda^p / (1 + sum_q a_q lambda^q),
/// with numerator coefficients c_0..c_{P-1} and denominator coefficients
/// a_1..a_Q (the constant denominator term is fixed at one).
struct ArmaFilterParams {
  Eigen::VectorXd numerator;
  Eigen::VectorXd denominator;
};

inline double arma_response_at(const ArmaFilterParams& p, double lambda) {
  if (p.numerator.size() == 0) throw ConfigError("ARMA numerator is empty");
  double num = 0.0, power = 1.0;
  for (Eigen::Index i = 0; i < p.numerator.size(); ++i) {
    num += p.numerator[i] * power;
    power *= lambda;
  }
  double den = 1.0, den_scale = 1.0;
  power = lambda;
  for (Eigen::Index q = 0; q < p.denominator.size(); ++q) {
    den += p.denominator[q] * power;
    den_scale += std::abs(p.denominator[q] * power);
    power *= lambda;
  }
  if (std::abs(den) <= 1e-12 * den_scale)
    throw PoleOnSpectrum("ARMA denominator vanishes at lambda = " + std::to_string(lambda));
  return num / den;
}

inline Eigen::VectorXd arma_response(const ArmaFilterParams& p, const Eigen::VectorXd& lambdas) {
  Eigen::VectorXd r(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) r[i] = arma_response_at(p, lambdas[i]);
  return r;
}

/// Truncated Chebyshev expansion of a spectral response on [0, lambda_max].
/// coefficients[0] enters evaluation halved (classical convention).
struct ChebyshevFilter {
  Eigen::VectorXcd coefficients;
  double interval_min = 0.0;
  double interval_max = 1.0;

  int order() const { return static_cast<int>(coefficients.size()) - 1; }
};

struct ChebyshevFilterPair {
  ChebyshevFilter g1;  ///< acts on y
  ChebyshevFilter g2;  ///< acts on conj(y)
};

/// Projects `response` onto Chebyshev polynomials of degree <= order via the
/// cosine-node quadrature with M = max(64, 4 (order + 1)) nodes.
inline ChebyshevFilter chebyshev_fit(const std::function<Complex(double)>& response,
                                     int order, double lambda_max) {
  if (order < 0) throw InvalidInterval("Chebyshev order must be nonnegative");
  if (!(lambda_max > 0.0)) throw InvalidInterval("Chebyshev interval upper bound must be positive");
  const int m = std::max(64, 4 * (order + 1));
  std::vector<double> theta(m);
  std::vector<Complex> values(m);
  for (int k = 0; k < m; ++k) {
    theta[k] = std::numbers::pi * (k + 0.5) / m;
    const double t = 0.5 * (std::cos(theta[k]) + 1.0) * lambda_max;
    values[k] = response(t);
  }
  ChebyshevFilter f;
  f.interval_min = 0.0;
  f.interval_max = lambda_max;
  f.coefficients.resize(order + 1);
  for (int j = 0; j <= order; ++j) {
    Complex acc = 0.0;
    for (int k = 0; k < m; ++k) acc += values[k] * std::cos(j * theta[k]);
    f.coefficients[j] = 2.0 * acc / static_cast<double>(m);
  }
  return f;
}

inline ChebyshevFilter chebyshev_fit(const std::function<double(double)>& response,
                                     int order, double lambda_max) {
  return chebyshev_fit(std::function<Complex(double)>(
                           [&response](double t) { return Complex(response(t), 0.0); }),
                       order, lambda_max);
}

/// Least-squares Chebyshev fit pinned to sampled response values.  With
/// order + 1 >= #nodes the minimum-norm solution interpolates the samples,
/// so applying the result to an operator whose spectrum is the node set
/// reproduces the exact spectral application; the minimum-norm choice keeps
/// the polynomial tame between the nodes.
inline ChebyshevFilter chebyshev_fit_samples(const Eigen::VectorXd& nodes,
                                             const Eigen::VectorXcd& values, int order,
                                             double lambda_max) {
  if (nodes.size() != values.size() || nodes.size() == 0)
    throw DimensionMismatch("sample fit needs equally many nodes and values");
  if (order < 0) throw InvalidInterval("Chebyshev order must be nonnegative");
  if (!(lambda_max > 0.0))
    throw InvalidInterval("Chebyshev interval upper bound must be positive");
  Eigen::MatrixXd basis(nodes.size(), order + 1);
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    const double x = 2.0 * nodes[i] / lambda_max - 1.0;
    if (x < -1.0 - 1e-12 || x > 1.0 + 1e-12)
      throw InvalidInterval("sample node outside the Chebyshev interval");
    basis(i, 0) = 0.5;  // evaluation halves the leading coefficient
    double t_prev = 1.0, t_cur = x;
    if (order >= 1) basis(i, 1) = x;
    for (int j = 2; j <= order; ++j) {
      const double t_next = 2.0 * x * t_cur - t_prev;
      basis(i, j) = t_next;
      t_prev = t_cur;
      t_cur = t_next;
    }
  }
  const auto cod = basis.completeOrthogonalDecomposition();
  const Eigen::VectorXd re = cod.solve(Eigen::VectorXd(values.real()));
  const Eigen::VectorXd im = cod.solve(Eigen::VectorXd(values.imag()));
  ChebyshevFilter f;
  f.interval_min = 0.0;
  f.interval_max = lambda_max;
  f.coefficients = re + Complex(0.0, 1.0) * im;
  return f;
}

/// Clenshaw evaluation of the expansion at a scalar point.
inline Complex chebyshev_eval(const ChebyshevFilter& f, double lambda) {
  const double x = 2.0 * (lambda - f.interval_min) / (f.interval_max - f.interval_min) - 1.0;
  Complex b1 = 0.0, b2 = 0.0;
  for (int j = f.order(); j >= 1; --j) {
    const Complex b0 = 2.0 * x * b1 - b2 + f.coefficients[j];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + 0.5 * f.coefficients[0];
}

/// Matrix-vector work performed by chebyshev_apply: the three-term
/// recurrence costs order() products per filter, the spectral-radius guard
/// adds a fixed number more.
struct ChebyshevApplyStats {
  int recurrence_matvecs = 0;
  int guard_matvecs = 0;
};

/// Rayleigh-quotient lower bound on the largest Laplacian eigenvalue from a
/// deterministic power iteration.
inline double spectral_radius_lower_bound(const Eigen::MatrixXd& lap, int iterations = 64) {
  const Eigen::Index n = lap.rows();
  if (n == 0 || lap.rows() != lap.cols()) throw DimensionMismatch("operator must be square");
  Eigen::VectorXd v(n);
  std::uint64_t state = 0x8f1b5ce0a1c4f0d3ULL;
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = 1.0 + static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  v.normalize();
  double bound = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd w = lap * v;
    bound = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  return std::abs(bound);
}

/// Default safe Chebyshev interval upper bound: power-iteration estimate
/// inflated by one percent.
inline double default_chebyshev_upper_bound(const Eigen::MatrixXd& lap) {
  return 1.01 * spectral_radius_lower_bound(lap);
}

namespace detail {

inline Eigen::VectorXcd chebyshev_apply_one(const Eigen::MatrixXd& lap,
                                            const ChebyshevFilter& f,
                                            const Eigen::VectorXcd& v,
                                            ChebyshevApplyStats* stats) {
  const double a = f.interval_min;
  const double b = f.interval_max;
  const double scale = 2.0 / (b - a);
  const double shift = (b + a) / (b - a);
  // mapped operator A = scale * L - shift * I has spectrum in [-1, 1]
  auto apply_mapped = [&](const Eigen::VectorXcd& u) {
    if (stats) ++stats->recurrence_matvecs;
    Eigen::VectorXcd out = scale * (lap * u) - shift * u;
    return out;
  };
  Eigen::VectorXcd sum = 0.5 * f.coefficients[0] * v;
  if (f.order() == 0) return sum;
  Eigen::VectorXcd t_prev = v;
  Eigen::VectorXcd t_cur = apply_mapped(v);
  sum += f.coefficients[1] * t_cur;
  for (int j = 2; j <= f.order(); ++j) {
    const Eigen::VectorXcd t_next = 2.0 * apply_mapped(t_cur) - t_prev;
    sum += f.coefficients[j] * t_next;
    t_prev = t_cur;
    t_cur = t_next;
  }
  return sum;
}

}  // namespace detail

/// Applies x_hat = g1(L) y + g2(L, conj) conj(y) through the Chebyshev
/// recurrence; only multiplications by L are used, no eigendecomposition.
/// Throws IntervalTooSmall when the power-iteration bound already exceeds a
/// filter's declared interval.
inline Eigen::VectorXcd chebyshev_apply(const Eigen::MatrixXd& lap,
                                        const ChebyshevFilterPair& pair,
                                        const Eigen::VectorXcd& y,
                                        ChebyshevApplyStats* stats = nullptr) {
  if (lap.rows() != lap.cols() || lap.rows() != y.size())
    throw DimensionMismatch("Laplacian and observation sizes do not match");
  for (const ChebyshevFilter* f : {&pair.g1, &pair.g2}) {
    if (f->coefficients.size() == 0) throw InvalidInterval("Chebyshev filter has no coefficients");
    if (f->interval_min != 0.0) throw InvalidInterval("Chebyshev interval must start at zero");
    if (!(f->interval_max > f->interval_min)) throw InvalidInterval("Chebyshev interval is empty");
  }
  constexpr int kGuardIterations = 64;
  const double bound = spectral_radius_lower_bound(lap, kGuardIterations);
  if (stats) stats->guard_matvecs += kGuardIterations;
  const double declared = std::min(pair.g1.interval_max, pair.g2.interval_max);
  if (bound > declared * (1.0 + 1e-9))
    throw IntervalTooSmall("operator spectral radius exceeds the declared interval");
  return detail::chebyshev_apply_one(lap, pair.g1, y, stats) +
         detail::chebyshev_apply_one(lap, pair.g2, y.conjugate(), stats);
}

/// Continuous piecewise-linear interpolant through sorted sample points,
/// extended by its end values outside their range.  Sample abscissae closer
/// than 1e-12 relative are merged by averaging their values.
class PiecewiseLinear {
 public:
  PiecewiseLinear(const Eigen::VectorXd& xs, const Eigen::VectorXcd& values) {
    if (xs.size() != values.size() || xs.size() == 0)
      throw DimensionMismatch("interpolant needs equally many points and values");
    const double span = std::max(std::abs(xs[xs.size() - 1]), 1.0);
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      if (i > 0 && xs[i] < xs[i - 1]) throw ConfigError("interpolant abscissae must ascend");
      if (!xs_.empty() && xs[i] - xs_.back() <= 1e-12 * span) {
        // merge a (near-)duplicate abscissa
        const std::size_t runs = ++merge_count_.back();
        vals_.back() += (values[i] - vals_.back()) / static_cast<double>(runs + 1);
      } else {
        xs_.push_back(xs[i]);
        vals_.push_back(values[i]);
        merge_count_.push_back(0);
      }
    }
  }

  Complex operator()(double x) const {
    if (x <= xs_.front()) return vals_.front();
    if (x >= xs_.back()) return vals_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs_.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
    return vals_[lo] + t * (vals_[hi] - vals_[lo]);
  }

 private:
  std::vector<double> xs_;
  std::vector<Complex> vals_;
  std::vector<std::size_t> merge_count_;
};

// --- serialization -----------------------------------------------------------
//
// Chebyshev: {"order": L, "interval": [0, lambda_max],
//             "coeffs_re": [...], "coeffs_im": [...]}
// ARMA:      {"c": [...], "a": [...]}

inline nlohmann::json to_json(const ChebyshevFilter& f) {
  std::vector<double> re(f.coefficients.size()), im(f.coefficients.size());
  for (Eigen::Index i = 0; i < f.coefficients.size(); ++i) {
    re[static_cast<std::size_t>(i)] = f.coefficients[i].real();
    im[static_cast<std::size_t>(i)] = f.coefficients[i].imag();
  }
  return {{"order", f.order()},
          {"interval", {f.interval_min, f.interval_max}},
          {"coeffs_re", re},
          {"coeffs_im", im}};
}

inline ChebyshevFilter chebyshev_from_json(const nlohmann::json& j) {
  ChebyshevFilter f;
  const auto re = j.at("coeffs_re").get<std::vector<double>>();
  const auto im = j.at("coeffs_im").get<std::vector<double>>();
  if (re.size() != im.size() || re.empty())
    throw ConfigError("Chebyshev file: coefficient arrays are inconsistent");
  if (j.at("order").get<int>() != static_cast<int>(re.size()) - 1)
    throw ConfigError("Chebyshev file: order does not match coefficient count");
  const auto interval = j.at("interval").get<std::vector<double>>();
  if (interval.size() != 2) throw ConfigError("Chebyshev file: interval must have two bounds");
  f.interval_min = interval[0];
  f.interval_max = interval[1];
  if (f.interval_min != 0.0 || !(f.interval_max > 0.0))
    throw InvalidInterval("Chebyshev file: interval must be [0, lambda_max]");
  f.coefficients.resize(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i)
    f.coefficients[static_cast<Eigen::Index>(i)] = {re[i], im[i]};
  return f;
}

inline nlohmann::json to_json(const ArmaFilterParams& p) {
  return {{"c", std::vector<double>(p.numerator.begin(), p.numerator.end())},
          {"a", std::vector<double>(p.denominator.begin(), p.denominator.end())}};
}

inline ArmaFilterParams arma_from_json(const nlohmann::json& j) {
  const auto c = j.at("c").get<std::vector<double>>();
  const auto a = j.at("a").get<std::vector<double>>();
  if (c.empty()) throw ConfigError("ARMA file: numerator must not be empty");
  ArmaFilterParams p;
  p.numerator = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  p.denominator =
      Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  return p;
}

}  // namespace gspwl
