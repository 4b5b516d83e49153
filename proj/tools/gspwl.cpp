// Command line front end: benchmark sweeps, estimator application, and a
// Chebyshev approximation study, all emitting deterministic tables.
#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gspwl/benchmark.hpp"
#include "gspwl/graph_filters.hpp"

namespace {

using namespace gspwl;

struct CommonOpts {
  std::string out;       // empty writes to stdout
  std::string manifest;  // empty skips the manifest
  std::string format = "csv";
  std::uint64_t seed = 1;
  long trials = 2000;
  int threads = 0;
  std::vector<std::string> estimators;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--out", o.out, "Write the results table to this file (default stdout)");
  cmd->add_option("--manifest", o.manifest, "Write a JSON run manifest to this file");
  cmd->add_option("--format", o.format, "Results format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Root seed of all random streams")
      ->capture_default_str();
  cmd->add_option("--trials", o.trials, "Monte Carlo trials per estimator")
      ->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();
  cmd->add_option("--estimators", o.estimators,
                  "Estimator tags to include (comma separated; default all)")
      ->delimiter(',');
}

BenchmarkConfig bench_of(const CommonOpts& o, const std::vector<long>& ks) {
  BenchmarkConfig b;
  b.k_values.assign(ks.begin(), ks.end());
  b.n_trials = o.trials;
  b.seed = o.seed;
  b.estimators = o.estimators;
  b.n_threads = o.threads;
  return b;
}

nlohmann::json results_json(const std::vector<McResult>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const McResult& r : rows) {
    nlohmann::json j{{"scenario", r.scenario},   {"estimator", r.estimator},
                     {"K", r.k_train},           {"eta_or_theta", r.sweep_value},
                     {"mse_stderr", r.mse_stderr}, {"n_trials", r.n_trials},
                     {"seed", r.seed},           {"diverged", r.diverged}};
    if (std::isfinite(r.mse))
      j["mse"] = r.mse;
    else
      j["mse"] = nullptr;
    arr.push_back(std::move(j));
  }
  return {{"format", "gspwl-results v1"}, {"rows", arr}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << text;
}

void emit_results(const CommonOpts& o, const std::vector<McResult>& rows) {
  std::string text;
  if (o.format == "json") {
    text = results_json(rows).dump(2) + "\n";
  } else {
    std::ostringstream s;
    write_results_csv(s, rows);
    text = s.str();
  }
  write_text(o.out, text);
}

void emit_manifest(const CommonOpts& o, const std::string& command,
                   nlohmann::json params) {
  if (o.manifest.empty()) return;
  params["seed"] = o.seed;
  params["trials"] = o.trials;
  params["threads"] = o.threads;
  params["estimators"] = o.estimators;
  params["format"] = o.format;
  const nlohmann::json j{{"format", "gspwl-manifest v1"},
                         {"command", command},
                         {"parameters", params},
                         {"results_path", o.out.empty() ? "-" : o.out}};
  write_text(o.manifest, j.dump(2) + "\n");
}

// --- example1 ------------------------------------------------------------

struct Example1Opts {
  CommonOpts common;
  double eta = 0.1;
  double sigma = 1.0;
  int n = 100;
  double edge_prob = 0.07;
  std::uint64_t model_seed = 1;
  std::vector<long> k_values = {100, 1000};
};

void run_example1_cmd(const Example1Opts& o) {
  Example1Config cfg = default_example1_config(o.model_seed);
  cfg.eta = o.eta;
  cfg.sigma = o.sigma;
  cfg.n_vertices = o.n;
  cfg.edge_probability = o.edge_prob;
  const GraphSpectrum s = build_laplacian(example1_graph(cfg));
  const std::vector<McResult> rows =
      run_example1_benchmark(cfg, s, bench_of(o.common, o.k_values));
  emit_results(o.common, rows);
  emit_manifest(o.common, "example1",
                {{"eta", o.eta},
                 {"sigma", o.sigma},
                 {"n_vertices", o.n},
                 {"edge_probability", o.edge_prob},
                 {"model_seed", o.model_seed},
                 {"k_values", o.k_values}});
}

// --- psse / robustness -----------------------------------------------------

struct GridOpts {
  std::string case_file;
  int buses = 30;
  int lines = 45;
  std::uint64_t grid_seed = 1;
  double theta = 0.2;
  double sigma = 0.01;
};

void add_grid(CLI::App* cmd, GridOpts& g) {
  cmd->add_option("--case", g.case_file, "Grid case file (default: synthetic grid)");
  cmd->add_option("--buses", g.buses, "Synthetic grid bus count")->capture_default_str();
  cmd->add_option("--lines", g.lines, "Synthetic grid line count")->capture_default_str();
  cmd->add_option("--grid-seed", g.grid_seed, "Synthetic grid topology seed")
      ->capture_default_str();
  cmd->add_option("--theta", g.theta, "Maximum voltage phase angle")
      ->capture_default_str();
  cmd->add_option("--sigma", g.sigma, "Measurement noise level")->capture_default_str();
}

PowerSystemModel grid_of(const GridOpts& g) {
  PowerSystemModel m = g.case_file.empty()
                           ? synthetic_grid(g.buses, g.lines, g.grid_seed)
                           : load_case_file(g.case_file);
  m.theta_max = g.theta;
  m.noise_sigma = g.sigma;
  validate(m);
  return m;
}

nlohmann::json grid_params(const GridOpts& g) {
  return {{"case", g.case_file},   {"buses", g.buses},
          {"lines", g.lines},      {"grid_seed", g.grid_seed},
          {"theta_max", g.theta},  {"noise_sigma", g.sigma}};
}

struct PsseOpts {
  CommonOpts common;
  GridOpts grid;
  std::vector<long> k_values = {250, 1000};
};

void run_psse_cmd(const PsseOpts& o) {
  const PowerSystemModel m = grid_of(o.grid);
  const std::vector<McResult> rows = run_psse_benchmark(m, bench_of(o.common, o.k_values));
  emit_results(o.common, rows);
  nlohmann::json params = grid_params(o.grid);
  params["k_values"] = o.k_values;
  emit_manifest(o.common, "psse", params);
}

struct RobustnessOpts {
  CommonOpts common;
  GridOpts grid;
  std::vector<int> changes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string mode = "remove";
  long k_train = 1000;
  bool retrain = false;
};

void run_robustness_cmd(const RobustnessOpts& o) {
  const PowerSystemModel m = grid_of(o.grid);
  RobustnessConfig rc;
  rc.change_counts = o.changes;
  rc.mode = o.mode == "add" ? TopologyChange::add : TopologyChange::remove;
  rc.k_train = o.k_train;
  rc.retrain = o.retrain;
  const std::vector<McResult> rows =
      run_psse_robustness(m, rc, bench_of(o.common, {}));
  emit_results(o.common, rows);
  nlohmann::json params = grid_params(o.grid);
  params["changes"] = o.changes;
  params["mode"] = o.mode;
  params["k_train"] = o.k_train;
  params["retrain"] = o.retrain;
  emit_manifest(o.common, "robustness", params);
}

// --- estimate --------------------------------------------------------------

struct EstimateOpts {
  std::string estimator_file;
  std::string data_file;
  std::string graph_file;
  int chebyshev_order = -1;  // negative applies filters through the exact basis
  std::string out;
  std::string manifest;
};

void run_estimate_cmd(const EstimateOpts& o) {
  const SerializedEstimator est = load_estimator(o.estimator_file);
  const TrainingDataset data = load_dataset(o.data_file);
  if (data.ny() != est.n)
    throw DimensionMismatch("estimator size does not match the dataset observations");
  TrainingDataset out;
  out.y_samples = data.y_samples;
  out.x_samples.resize(est.n, data.k());
  if (est.operators) {
    for (Eigen::Index k = 0; k < data.k(); ++k)
      out.x_samples.col(k) = apply_operator_pair(*est.operators, data.y_samples.col(k));
  } else {
    if (o.graph_file.empty())
      throw ConfigError("graph-filter estimators need --graph");
    const GraphSpectrum s = build_laplacian(load_edge_list(o.graph_file));
    if (s.n_vertices() != est.n)
      throw DimensionMismatch("estimator size does not match the graph");
    if (o.chebyshev_order < 0) {
      for (Eigen::Index k = 0; k < data.k(); ++k)
        out.x_samples.col(k) = gsp_wlmmse(s, *est.filters, data.y_samples.col(k));
    } else {
      // polynomials pinned to the per-frequency responses; the application
      // then runs through matrix-vector products only
      const double upper = s.lambda_max();
      ChebyshevFilterPair pair;
      pair.g1 = chebyshev_fit_samples(s.eigenvalues, est.filters->f1,
                                      o.chebyshev_order, upper);
      pair.g2 = chebyshev_fit_samples(s.eigenvalues, est.filters->f2,
                                      o.chebyshev_order, upper);
      for (Eigen::Index k = 0; k < data.k(); ++k)
        out.x_samples.col(k) = chebyshev_apply(s.laplacian, pair, data.y_samples.col(k));
    }
  }
  std::ostringstream s;
  save_dataset(s, out);
  write_text(o.out, s.str());
  if (!o.manifest.empty()) {
    const nlohmann::json j{{"format", "gspwl-manifest v1"},
                           {"command", "estimate"},
                           {"parameters",
                            {{"estimator", o.estimator_file},
                             {"data", o.data_file},
                             {"graph", o.graph_file},
                             {"chebyshev_order", o.chebyshev_order}}},
                           {"results_path", o.out.empty() ? "-" : o.out}};
    write_text(o.manifest, j.dump(2) + "\n");
  }
}

// --- chebyshev-bench ---------------------------------------------------------

struct ChebyBenchOpts {
  double eta = 0.1;
  double sigma = 1.0;
  int n = 50;
  double edge_prob = 0.07;
  std::uint64_t model_seed = 1;
  std::vector<int> orders = {5, 10, 20, 40, 80, 100};
  long draws = 20;
  std::uint64_t seed = 1;
  std::string out;
  std::string manifest;
};

void run_chebyshev_bench_cmd(const ChebyBenchOpts& o) {
  Example1Config cfg = default_example1_config(o.model_seed);
  cfg.eta = o.eta;
  cfg.sigma = o.sigma;
  cfg.n_vertices = o.n;
  cfg.edge_probability = o.edge_prob;
  const GraphSpectrum s = build_laplacian(example1_graph(cfg));
  const WidelyLinearGraphFilterPair exact = example1_closed_form_filters(cfg, s);
  const double upper = default_chebyshev_upper_bound(s.laplacian);
  const Example1Sampler sampler(cfg, s);

  std::ostringstream table;
  table << "# gspwl-chebybench v1\n";
  table << "order,max_rel_error,recurrence_matvecs,guard_matvecs\n";
  for (int order : o.orders) {
    ChebyshevFilterPair pair;
    pair.g1 = chebyshev_fit(std::function<Complex(double)>([&](double t) {
                              return example1_closed_form_response(cfg, t).first;
                            }),
                            order, upper);
    pair.g2 = chebyshev_fit(std::function<Complex(double)>([&](double t) {
                              return example1_closed_form_response(cfg, t).second;
                            }),
                            order, upper);
    double worst = 0.0;
    ChebyshevApplyStats stats;
    for (long t = 0; t < o.draws; ++t) {
      Rng rng(substream_seed(o.seed, stream::test,
                             trial_index(0, static_cast<std::uint64_t>(t))));
      const auto [x, y] = sampler.draw(rng);
      const Eigen::VectorXcd reference = gsp_wlmmse(s, exact, y);
      stats = {};
      const Eigen::VectorXcd approx = chebyshev_apply(s.laplacian, pair, y, &stats);
      worst = std::max(worst, (approx - reference).norm() / reference.norm());
    }
    table << order << ',' << g17(worst) << ',' << stats.recurrence_matvecs << ','
          << stats.guard_matvecs << '\n';
  }
  write_text(o.out, table.str());
  if (!o.manifest.empty()) {
    const nlohmann::json j{{"format", "gspwl-manifest v1"},
                           {"command", "chebyshev-bench"},
                           {"parameters",
                            {{"eta", o.eta},
                             {"sigma", o.sigma},
                             {"n_vertices", o.n},
                             {"edge_probability", o.edge_prob},
                             {"model_seed", o.model_seed},
                             {"orders", o.orders},
                             {"draws", o.draws},
                             {"seed", o.seed}}},
                           {"results_path", o.out.empty() ? "-" : o.out}};
    write_text(o.manifest, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Widely linear MMSE estimation of improper graph signals"};
  app.require_subcommand(1);

  Example1Opts e1;
  CLI::App* cmd_e1 = app.add_subcommand(
      "example1", "Synthetic linear-filter model: closed-form and trained estimators");
  cmd_e1->add_option("--eta", e1.eta, "Impropriety level in [0, 1]")->capture_default_str();
  cmd_e1->add_option("--sigma", e1.sigma, "Measurement noise level")->capture_default_str();
  cmd_e1->add_option("--n", e1.n, "Vertex count")->capture_default_str();
  cmd_e1->add_option("--edge-prob", e1.edge_prob, "Random graph edge probability")
      ->capture_default_str();
  cmd_e1->add_option("--model-seed", e1.model_seed, "Graph and response seed")
      ->capture_default_str();
  cmd_e1->add_option("--K", e1.k_values, "Training set sizes (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  add_common(cmd_e1, e1.common);

  PsseOpts ps;
  CLI::App* cmd_ps =
      app.add_subcommand("psse", "Power grid state estimation from complex power flows");
  add_grid(cmd_ps, ps.grid);
  cmd_ps->add_option("--K", ps.k_values, "Training set sizes (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  add_common(cmd_ps, ps.common);

  RobustnessOpts ro;
  CLI::App* cmd_ro = app.add_subcommand(
      "robustness", "Grid-topology mismatch study with reused training statistics");
  add_grid(cmd_ro, ro.grid);
  cmd_ro->add_option("--changes", ro.changes, "Topology change counts (repeatable)")
      ->delimiter(',');
  cmd_ro->add_option("--mode", ro.mode, "Perturbation kind")
      ->check(CLI::IsMember({"remove", "add"}))
      ->capture_default_str();
  cmd_ro->add_option("--k-train", ro.k_train, "Training set size")->capture_default_str();
  cmd_ro->add_flag("--retrain", ro.retrain,
                   "Redraw the training set from each perturbed grid");
  add_common(cmd_ro, ro.common);

  EstimateOpts es;
  CLI::App* cmd_es =
      app.add_subcommand("estimate", "Apply a saved estimator to a dataset");
  cmd_es->add_option("--estimator", es.estimator_file, "Estimator JSON file")->required();
  cmd_es->add_option("--data", es.data_file, "Dataset file holding the observations")
      ->required();
  cmd_es->add_option("--graph", es.graph_file, "Edge list (needed for filter estimators)");
  cmd_es->add_option("--chebyshev-order", es.chebyshev_order,
                     "Apply filters by Chebyshev polynomials of this order");
  cmd_es->add_option("--out", es.out, "Write estimates to this file (default stdout)");
  cmd_es->add_option("--manifest", es.manifest, "Write a JSON run manifest to this file");

  ChebyBenchOpts cb;
  CLI::App* cmd_cb = app.add_subcommand(
      "chebyshev-bench", "Chebyshev versus exact filter application accuracy");
  cmd_cb->add_option("--eta", cb.eta, "Impropriety level in [0, 1]")->capture_default_str();
  cmd_cb->add_option("--sigma", cb.sigma, "Measurement noise level")->capture_default_str();
  cmd_cb->add_option("--n", cb.n, "Vertex count")->capture_default_str();
  cmd_cb->add_option("--edge-prob", cb.edge_prob, "Random graph edge probability")
      ->capture_default_str();
  cmd_cb->add_option("--model-seed", cb.model_seed, "Graph and response seed")
      ->capture_default_str();
  cmd_cb->add_option("--orders", cb.orders, "Polynomial orders (repeatable)")
      ->delimiter(',');
  cmd_cb->add_option("--draws", cb.draws, "Measurement draws per order")
      ->capture_default_str();
  cmd_cb->add_option("--seed", cb.seed, "Sampling seed")->capture_default_str();
  cmd_cb->add_option("--out", cb.out, "Write the table to this file (default stdout)");
  cmd_cb->add_option("--manifest", cb.manifest, "Write a JSON run manifest to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_e1->parsed()) run_example1_cmd(e1);
    if (cmd_ps->parsed()) run_psse_cmd(ps);
    if (cmd_ro->parsed()) run_robustness_cmd(ro);
    if (cmd_es->parsed()) run_estimate_cmd(es);
    if (cmd_cb->parsed()) run_chebyshev_bench_cmd(cb);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
