#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gspwl/errors.hpp"
#include "gspwl/graph.hpp"
#include "gspwl/io.hpp"
#include "gspwl/rng.hpp"
#include "gspwl/stats.hpp"

namespace gspwl {

/// One transmission line between buses m and k.  Convention: the stored
/// admittance has nonpositive real part and positive imaginary part, so the
/// bus matrix Y (see admittance_matrix) decomposes as Y = G + jB with both G
/// and -B real Laplacians; -B serves as the graph Laplacian of the grid.
struct PowerLine {
  int m = 0;
  int k = 0;
  Complex admittance;
};

/// Grid model for noisy complex power-flow observations
///   y = diag(x) conj(Y) conj(x) + n
/// of a random voltage phasor state x_n = (1 + 0.1 mu_n) exp(j phi_n) with
/// mu_n standard normal and phi_n uniform on [0, theta_max].
struct PowerSystemModel {
  int n_buses = 0;
  std::vector<PowerLine> lines;
  double theta_max = 0.2;
  double noise_sigma = 0.01;
};

inline void validate(const PowerSystemModel& m) {
  if (m.n_buses <= 1) throw InvalidModel("grid needs at least two buses");
  if (m.theta_max < 0.0 || m.theta_max > 2.0 * std::numbers::pi)
    throw InvalidModel("theta_max must lie in [0, 2 pi]");
  if (m.noise_sigma < 0.0) throw InvalidModel("noise_sigma must be nonnegative");
  std::set<std::pair<int, int>> seen;
  for (const PowerLine& l : m.lines) {
    if (l.m < 0 || l.m >= m.n_buses || l.k < 0 || l.k >= m.n_buses)
      throw InvalidModel("line endpoint out of range");
    if (l.m == l.k) throw InvalidModel("line connects a bus to itself");
    if (l.admittance.real() > 0.0)
      throw InvalidModel("line admittance must have nonpositive real part");
    if (!(l.admittance.imag() > 0.0))
      throw InvalidModel("line admittance must have positive imaginary part");
    if (!seen.insert(std::minmax(l.m, l.k)).second)
      throw InvalidModel("duplicate line between a bus pair");
  }
}

/// Bus admittance matrix: [Y]_mk = y_mk off the diagonal and
/// [Y]_mm = -sum_{k in N(m)} y_mk, so every row sums to zero.
inline Eigen::MatrixXcd admittance_matrix(const PowerSystemModel& m) {
  validate(m);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(m.n_buses, m.n_buses);
  for (const PowerLine& l : m.lines) {
    y(l.m, l.k) += l.admittance;
    y(l.k, l.m) += l.admittance;
    y(l.m, l.m) -= l.admittance;
    y(l.k, l.k) -= l.admittance;
  }
  return y;
}

/// Graph underlying the grid, weighted by line susceptances Im(y_mk); its
/// combinatorial Laplacian equals -Im(Y).
inline WeightedGraph susceptance_graph(const PowerSystemModel& m) {
  validate(m);
  std::vector<WeightedEdge> edges;
  edges.reserve(m.lines.size());
  for (const PowerLine& l : m.lines) edges.push_back({l.m, l.k, l.admittance.imag()});
  return WeightedGraph(m.n_buses, std::move(edges));
}

/// Noiseless complex power injections of state x: diag(x) conj(Y) conj(x).
inline Eigen::VectorXcd power_flow(const Eigen::MatrixXcd& ybus, const Eigen::VectorXcd& x) {
  if (ybus.rows() != ybus.cols() || ybus.rows() != x.size())
    throw DimensionMismatch("bus matrix and state sizes do not match");
  return x.cwiseProduct(ybus.conjugate() * x.conjugate());
}

/// Reusable draw machinery for the grid model (the bus matrix is built
/// once).  Per sample the stream order is fixed: mu, phi, then Re/Im noise.
class PsseSampler {
 public:
  explicit PsseSampler(const PowerSystemModel& m)
      : n_(m.n_buses),
        theta_max_(m.theta_max),
        noise_scale_(m.noise_sigma * std::numbers::sqrt2 / 2.0),
        ybus_(admittance_matrix(m)) {}

  std::pair<Eigen::VectorXcd, Eigen::VectorXcd> draw(Rng& rng) const {
    Eigen::VectorXcd x(n_);
    for (Eigen::Index i = 0; i < n_; ++i) x[i] = 1.0 + 0.1 * rng.gaussian();
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double phi = rng.uniform(0.0, theta_max_);
      x[i] *= Complex(std::cos(phi), std::sin(phi));
    }
    Eigen::VectorXcd noise(n_);
    for (Eigen::Index i = 0; i < n_; ++i) noise[i] = noise_scale_ * rng.gaussian();
    for (Eigen::Index i = 0; i < n_; ++i) noise[i].imag(noise_scale_ * rng.gaussian());
    return {x, power_flow(ybus_, x) + noise};
  }

 private:
  Eigen::Index n_;
  double theta_max_, noise_scale_;
  Eigen::MatrixXcd ybus_;
};

/// Draws `count` paired (state, measurement) samples.
inline TrainingDataset sample_psse(const PowerSystemModel& m, Eigen::Index count, Rng& rng) {
  const PsseSampler sampler(m);
  TrainingDataset d;
  d.x_samples.resize(m.n_buses, count);
  d.y_samples.resize(m.n_buses, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    auto [x, y] = sampler.draw(rng);
    d.x_samples.col(k) = x;
    d.y_samples.col(k) = y;
  }
  return d;
}

/// Synthetic connected grid: a random recursive tree plus extra random
/// lines, with admittances y = -g + jb, g in [0.3, 1], b in [2, 8].
inline PowerSystemModel synthetic_grid(int n_buses = 30, int n_lines = 45,
                                       std::uint64_t seed = 1) {
  if (n_buses <= 1) throw InvalidModel("grid needs at least two buses");
  if (n_lines < n_buses - 1) throw InvalidModel("too few lines for a connected grid");
  const long max_lines = static_cast<long>(n_buses) * (n_buses - 1) / 2;
  if (n_lines > max_lines) throw InvalidModel("more lines than bus pairs");
  Rng rng(substream_seed(seed, stream::grid));
  PowerSystemModel m;
  m.n_buses = n_buses;
  std::set<std::pair<int, int>> used;
  auto draw_admittance = [&rng]() {
    const double g = rng.uniform(0.3, 1.0);
    const double b = rng.uniform(2.0, 8.0);
    return Complex(-g, b);
  };
  for (int i = 1; i < n_buses; ++i) {
    const int parent = static_cast<int>(rng.integer(static_cast<std::uint64_t>(i)));
    used.insert(std::minmax(parent, i));
    m.lines.push_back({parent, i, draw_admittance()});
  }
  while (static_cast<int>(m.lines.size()) < n_lines) {
    const int a = static_cast<int>(rng.integer(static_cast<std::uint64_t>(n_buses)));
    const int b = static_cast<int>(rng.integer(static_cast<std::uint64_t>(n_buses)));
    if (a == b) continue;
    const auto key = std::minmax(a, b);
    if (!used.insert(key).second) continue;
    m.lines.push_back({key.first, key.second, draw_admittance()});
  }
  validate(m);
  return m;
}

enum class TopologyChange { add, remove };

/// Changes the topology at `n_changes` randomly chosen buses: each selected
/// bus loses one incident line (remove) or gains a line to a non-neighbor
/// (add).  The changed lines are vertex-disjoint, so the Laplacian differs
/// in exactly 4 n_changes entries, and connectivity is preserved; draws that
/// violate either are retried a bounded number of times.
inline PowerSystemModel perturb_topology(const PowerSystemModel& m, int n_changes,
                                         TopologyChange mode, Rng& rng) {
  validate(m);
  if (n_changes < 0) throw InvalidModel("n_changes must be nonnegative");
  if (n_changes == 0) return m;
  if (2 * n_changes > m.n_buses)
    throw InvalidModel("vertex-disjoint changes require n_changes <= n_buses / 2");
  if (mode == TopologyChange::remove &&
      static_cast<int>(m.lines.size()) - n_changes < m.n_buses - 1)
    throw DisconnectionRisk("not enough lines to stay connected after removal");
  const int max_attempts = 200 * n_changes;
  std::set<std::pair<int, int>> pairs;
  for (const PowerLine& l : m.lines) pairs.insert(std::minmax(l.m, l.k));
  auto connected_without = [&](const std::set<std::pair<int, int>>& removed) {
    std::vector<std::vector<int>> adj(m.n_buses);
    for (const PowerLine& l : m.lines) {
      if (removed.count(std::minmax(l.m, l.k))) continue;
      adj[l.m].push_back(l.k);
      adj[l.k].push_back(l.m);
    }
    std::vector<char> seen(m.n_buses, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : adj[v])
        if (!seen[u]) {
          seen[u] = 1;
          ++count;
          stack.push_back(u);
        }
    }
    return count == m.n_buses;
  };
  std::set<std::pair<int, int>> removed, added;
  std::set<int> touched;
  auto draw_admittance = [&rng]() {
    const double g = rng.uniform(0.3, 1.0);
    const double b = rng.uniform(2.0, 8.0);
    return Complex(-g, b);
  };
  std::vector<PowerLine> additions;
  int done = 0;
  for (int attempt = 0; attempt < max_attempts && done < n_changes; ++attempt) {
    const int bus = static_cast<int>(rng.integer(static_cast<std::uint64_t>(m.n_buses)));
    if (touched.count(bus)) continue;
    if (mode == TopologyChange::remove) {
      std::vector<std::pair<int, int>> candidates;
      for (const PowerLine& l : m.lines) {
        if (l.m != bus && l.k != bus) continue;
        const auto key = std::minmax(l.m, l.k);
        const int other = l.m == bus ? l.k : l.m;
        if (removed.count(key) || touched.count(other)) continue;
        candidates.push_back(key);
      }
      bool ok = false;
      while (!candidates.empty() && !ok) {
        const std::size_t pick = rng.integer(candidates.size());
        const auto key = candidates[pick];
        candidates.erase(candidates.begin() + static_cast<long>(pick));
        removed.insert(key);
        if (connected_without(removed)) {
          touched.insert(key.first);
          touched.insert(key.second);
          ok = true;
        } else {
          removed.erase(key);
        }
      }
      if (ok) ++done;
    } else {
      std::vector<int> candidates;
      for (int other = 0; other < m.n_buses; ++other) {
        if (other == bus || touched.count(other)) continue;
        const auto key = std::minmax(bus, other);
        if (pairs.count(key) || added.count(key)) continue;
        candidates.push_back(other);
      }
      if (candidates.empty()) continue;
      const int other = candidates[rng.integer(candidates.size())];
      const auto key = std::minmax(bus, other);
      added.insert(key);
      touched.insert(bus);
      touched.insert(other);
      additions.push_back({key.first, key.second, draw_admittance()});
      ++done;
    }
  }
  if (done < n_changes)
    throw DisconnectionRisk("could not realize the requested topology changes");
  PowerSystemModel out;
  out.n_buses = m.n_buses;
  out.theta_max = m.theta_max;
  out.noise_sigma = m.noise_sigma;
  for (const PowerLine& l : m.lines)
    if (!removed.count(std::minmax(l.m, l.k))) out.lines.push_back(l);
  for (const PowerLine& l : additions) out.lines.push_back(l);
  validate(out);
  return out;
}

// --- case file format --------------------------------------------------------
//
//   # gspwl grid case v1
//   N=<buses>
//   m,k,g_mk,b_mk        (one line per transmission line, 0-based)

inline void save_case_file(std::ostream& out, const PowerSystemModel& m) {
  validate(m);
  out << "# gspwl grid case v1\n";
  out << "N=" << m.n_buses << "\n";
  for (const PowerLine& l : m.lines)
    out << l.m << "," << l.k << "," << g17(l.admittance.real()) << ","
        << g17(l.admittance.imag()) << "\n";
}

inline void save_case_file(const std::string& path, const PowerSystemModel& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  save_case_file(out, m);
}

inline PowerSystemModel load_case_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip(line) != "# gspwl grid case v1")
    throw ConfigError("case file: missing '# gspwl grid case v1' header");
  long n = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "N=%ld", &n) != 1 || n <= 1)
    throw ConfigError("case file: missing 'N=<buses>' header");
  PowerSystemModel m;
  m.n_buses = static_cast<int>(n);
  long line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(line);
    if (body.empty() || body[0] == '#') continue;
    const std::vector<std::string> f = split(body, ',');
    const std::string ctx = "case file line " + std::to_string(line_no);
    if (f.size() != 4) throw ConfigError(ctx + ": expected m,k,g_mk,b_mk");
    PowerLine l;
    l.m = static_cast<int>(parse_long(strip(f[0]), ctx));
    l.k = static_cast<int>(parse_long(strip(f[1]), ctx));
    l.admittance = {parse_double(strip(f[2]), ctx), parse_double(strip(f[3]), ctx)};
    m.lines.push_back(l);
  }
  validate(m);
  return m;
}

inline PowerSystemModel load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open case file: " + path);
  return load_case_file(in);
}

}  // namespace gspwl
