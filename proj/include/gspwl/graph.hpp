#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gspwl/errors.hpp"
#include "gspwl/rng.hpp"
#include "gspwl/types.hpp"

namespace gspwl {

/// Zero-eigenvalue multiplicity guard: the second-smallest Laplacian
/// eigenvalue must exceed this for the graph to count as connected.
inline constexpr double kConnectivityTol = 1e-9;

enum class SignalDomain { vertex, frequency };

/// Complex-valued signal indexed by vertex or by graph frequency.  The
/// domain tag guards against mixing the two index spaces in arithmetic.
struct ComplexGraphSignal {
  Eigen::VectorXcd values;
  SignalDomain domain = SignalDomain::vertex;
};

struct WeightedEdge {
  int i = 0;
  int j = 0;
  double w = 1.0;
};

/// Undirected weighted graph: no self-loops, nonnegative weights, each
/// vertex pair listed at most once, connected through positive weights.
class WeightedGraph {
 public:
  WeightedGraph(int n_vertices, std::vector<WeightedEdge> edges)
      : n_(n_vertices), edges_(std::move(edges)) {
    if (n_ <= 0) throw ConfigError("graph must have at least one vertex");
    std::map<std::pair<int, int>, double> seen;
    for (const WeightedEdge& e : edges_) {
      if (e.i < 0 || e.i >= n_ || e.j < 0 || e.j >= n_)
        throw ConfigError("edge endpoint out of range: " + describe(e));
      if (e.i == e.j) throw ConfigError("self-loop not allowed: " + describe(e));
      if (e.w < 0.0) throw ConfigError("negative weight: " + describe(e));
      const auto key = std::minmax(e.i, e.j);
      if (!seen.emplace(key, e.w).second)
        throw NonSymmetric("vertex pair listed more than once: " + describe(e));
    }
    if (!connected_by_positive_weights())
      throw DisconnectedGraph("graph is not connected");
  }

  int n_vertices() const { return n_; }
  const std::vector<WeightedEdge>& edges() const { return edges_; }

  /// Combinatorial Laplacian L = diag(W 1) - W.
  Eigen::MatrixXd laplacian() const {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n_, n_);
    for (const WeightedEdge& e : edges_) {
      lap(e.i, e.j) -= e.w;
      lap(e.j, e.i) -= e.w;
      lap(e.i, e.i) += e.w;
      lap(e.j, e.j) += e.w;
    }
    return lap;
  }

 private:
  static std::string describe(const WeightedEdge& e) {
    std::ostringstream os;
    os << "(" << e.i << ", " << e.j << ", w=" << e.w << ")";
    return os.str();
  }

  bool connected_by_positive_weights() const {
    std::vector<std::vector<int>> adj(n_);
    for (const WeightedEdge& e : edges_) {
      if (e.w > 0.0) {
        adj[e.i].push_back(e.j);
        adj[e.j].push_back(e.i);
      }
    }
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : adj[v]) {
        if (!seen[u]) {
          seen[u] = 1;
          ++count;
          stack.push_back(u);
        }
      }
    }
    return count == n_;
  }

  int n_;
  std::vector<WeightedEdge> edges_;
};

/// Eigendecomposition of a graph Laplacian: L = V diag(lambda) V^T with real
/// orthonormal V and eigenvalues ascending from lambda[0] = 0.  Each
/// eigenvector is oriented so its entry of largest magnitude (first such
/// entry on ties) is positive; bases of degenerate eigenvalues are otherwise
/// kept as the solver returns them.
struct GraphSpectrum {
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  int n_vertices() const { return static_cast<int>(eigenvalues.size()); }
  double lambda_max() const { return eigenvalues[eigenvalues.size() - 1]; }
};

/// Builds the Laplacian of `graph` and its ordered eigendecomposition.
/// Throws DisconnectedGraph when the second-smallest eigenvalue is not
/// clearly positive.
inline GraphSpectrum build_laplacian(const WeightedGraph& graph) {
  GraphSpectrum s;
  s.laplacian = graph.laplacian();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.laplacian);
  if (solver.info() != Eigen::Success)
    throw NumericalError("Laplacian eigendecomposition failed");
  s.eigenvalues = solver.eigenvalues();
  s.eigenvectors = solver.eigenvectors();
  const int n = graph.n_vertices();
  for (int c = 0; c < n; ++c) {
    int lead = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(s.eigenvectors(r, c)) > std::abs(s.eigenvectors(lead, c)))
        lead = r;
    if (s.eigenvectors(lead, c) < 0.0) s.eigenvectors.col(c) = -s.eigenvectors.col(c);
  }
  if (std::abs(s.eigenvalues[0]) > kConnectivityTol)
    throw NumericalError("smallest Laplacian eigenvalue is not zero");
  if (s.eigenvalues.minCoeff() < -1e-12)
    throw NumericalError("Laplacian eigenvalue is negative");
  if (n > 1 && s.eigenvalues[1] <= kConnectivityTol)
    throw DisconnectedGraph("zero Laplacian eigenvalue has multiplicity > 1");
  return s;
}

/// Graph Fourier transform of a vertex-domain signal.
inline ComplexGraphSignal gft(const GraphSpectrum& s, const ComplexGraphSignal& x) {
  if (x.domain != SignalDomain::vertex)
    throw ConfigError("gft expects a vertex-domain signal");
  if (x.values.size() != s.n_vertices())
    throw DimensionMismatch("signal length does not match vertex count");
  return {s.eigenvectors.transpose() * x.values, SignalDomain::frequency};
}

/// Inverse graph Fourier transform of a frequency-domain signal.
inline ComplexGraphSignal inverse_gft(const GraphSpectrum& s, const ComplexGraphSignal& xbar) {
  if (xbar.domain != SignalDomain::frequency)
    throw ConfigError("inverse_gft expects a frequency-domain signal");
  if (xbar.values.size() != s.n_vertices())
    throw DimensionMismatch("signal length does not match vertex count");
  return {s.eigenvectors * xbar.values, SignalDomain::vertex};
}

/// Applies the graph filter V diag(response) V^T to a vertex-domain vector.
inline Eigen::VectorXcd apply_graph_filter(const GraphSpectrum& s,
                                           const Eigen::VectorXcd& response,
                                           const Eigen::VectorXcd& x) {
  if (response.size() != s.n_vertices())
    throw DimensionMismatch("response length does not match vertex count");
  if (x.size() != s.n_vertices())
    throw DimensionMismatch("signal length does not match vertex count");
  const Eigen::VectorXcd xbar = s.eigenvectors.transpose() * x;
  return s.eigenvectors * response.cwiseProduct(xbar);
}

inline Eigen::VectorXcd apply_graph_filter(const GraphSpectrum& s,
                                           const Eigen::VectorXd& response,
                                           const Eigen::VectorXcd& x) {
  return apply_graph_filter(s, Eigen::VectorXcd(response.cast<Complex>()), x);
}

inline ComplexGraphSignal apply_graph_filter(const GraphSpectrum& s,
                                             const Eigen::VectorXcd& response,
                                             const ComplexGraphSignal& x) {
  if (x.domain != SignalDomain::vertex)
    throw ConfigError("apply_graph_filter expects a vertex-domain signal");
  return {apply_graph_filter(s, response, x.values), SignalDomain::vertex};
}

/// Reads an edge list: one "i j w" line per undirected edge, 0-based vertex
/// indices, '#' starts a comment.  The vertex count is the largest index
/// plus one.
inline WeightedGraph load_edge_list(std::istream& in) {
  std::vector<WeightedEdge> edges;
  int max_index = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    WeightedEdge e;
    if (!(fields >> e.i)) continue;  // blank or comment-only line
    if (!(fields >> e.j >> e.w))
      throw ConfigError("edge list line " + std::to_string(line_no) +
                        ": expected 'i j w'");
    std::string extra;
    if (fields >> extra)
      throw ConfigError("edge list line " + std::to_string(line_no) +
                        ": trailing content '" + extra + "'");
    max_index = std::max({max_index, e.i, e.j});
    edges.push_back(e);
  }
  if (edges.empty()) throw ConfigError("edge list contains no edges");
  return WeightedGraph(max_index + 1, std::move(edges));
}

inline WeightedGraph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open edge list: " + path);
  return load_edge_list(in);
}

inline void save_edge_list(std::ostream& out, const WeightedGraph& graph) {
  out << "# gspwl edge list: i j w (0-based, undirected)\n";
  char buf[80];
  for (const WeightedEdge& e : graph.edges()) {
    std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", e.i, e.j, e.w);
    out << buf;
  }
}

inline void save_edge_list(const std::string& path, const WeightedGraph& graph) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  save_edge_list(out, graph);
}

/// Erdos-Renyi style random graph with unit weights, redrawn until
/// connected (at most `max_attempts` draws).
inline WeightedGraph random_connected_graph(int n_vertices, double edge_probability,
                                            Rng& rng, int max_attempts = 200) {
  if (n_vertices <= 0) throw ConfigError("graph must have at least one vertex");
  if (edge_probability <= 0.0 || edge_probability > 1.0)
    throw ConfigError("edge probability must lie in (0, 1]");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<WeightedEdge> edges;
    for (int i = 0; i < n_vertices; ++i)
      for (int j = i + 1; j < n_vertices; ++j)
        if (rng.uniform() < edge_probability) edges.push_back({i, j, 1.0});
    if (edges.empty()) continue;
    try {
      return WeightedGraph(n_vertices, std::move(edges));
    } catch (const DisconnectedGraph&) {
      continue;
    }
  }
  throw DisconnectedGraph("no connected draw within attempt budget");
}

}  // namespace gspwl
