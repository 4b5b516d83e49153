#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace gspwl {

/// One SplitMix64 step: advances `state` and returns a mixed output word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream tags used to split one top-level seed into independent substreams.
/// Every randomized stage derives its generator through substream_seed with
/// one of these tags, so a single seed reproduces an entire run.
namespace stream {
inline constexpr std::uint64_t graph = 1;     ///< random graph topology
inline constexpr std::uint64_t response = 2;  ///< random filter coefficients
inline constexpr std::uint64_t train = 3;     ///< training-set draws
inline constexpr std::uint64_t test = 4;      ///< Monte Carlo test draws
inline constexpr std::uint64_t grid = 5;      ///< synthetic power grid
inline constexpr std::uint64_t perturb = 6;   ///< topology perturbations
}  // namespace stream

/// Deterministic substream seed for (master seed, stream tag, index).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t index = 0) {
  std::uint64_t s = master;
  s = splitmix64(s) ^ (tag * 0xd1342543de82ef95ULL);
  s = splitmix64(s) ^ (index * 0xaf251af3b0f025b5ULL);
  return splitmix64(s);
}

/// Combines a per-K index and a trial index into one substream index.
inline std::uint64_t trial_index(std::uint64_t block, std::uint64_t trial) {
  return (block << 32) + trial;
}

/// Deterministic random generator.  Gaussian variates use Box-Muller on top
/// of mt19937_64 so streams are identical across standard library
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, bound), unbiased.  bound must be positive.
  std::uint64_t integer(std::uint64_t bound) {
    const std::uint64_t top = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (top % bound + 1) % bound;  // 2^64 mod bound
    const std::uint64_t limit = top - rem;
    std::uint64_t v = engine_();
    while (v > limit) v = engine_();
    return v % bound;
  }

  /// Standard normal variate.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  /// Proper complex Gaussian with E|z|^2 = 1 and E z^2 = 0.
  std::complex<double> proper_gaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

  Eigen::VectorXcd proper_gaussian_vector(Eigen::Index n) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = proper_gaussian();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gspwl
