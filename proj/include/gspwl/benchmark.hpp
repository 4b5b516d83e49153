#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gspwl/errors.hpp"
#include "gspwl/estimators.hpp"
#include "gspwl/example1.hpp"
#include "gspwl/graph.hpp"
#include "gspwl/io.hpp"
#include "gspwl/psse.hpp"
#include "gspwl/rng.hpp"
#include "gspwl/stats.hpp"

namespace gspwl {

/// One row of a benchmark sweep.  k_train = 0 marks an estimator built from
/// theoretical statistics; n_trials = 0 marks a closed-form MSE (no sampling,
/// mse_stderr = 0).  The empirical MSE is (1/M) sum_m ||xhat_m - x_m||^2.
struct McResult {
  std::string scenario;
  std::string estimator;
  Eigen::Index k_train = 0;
  double sweep_value = 0.0;
  double mse = 0.0;
  double mse_stderr = 0.0;
  long n_trials = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
};

struct BenchmarkConfig {
  std::vector<Eigen::Index> k_values;
  long n_trials = 2000;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators;  // tag filter; empty selects all
  int n_threads = 0;                    // 0 = hardware concurrency
};

inline void validate(const BenchmarkConfig& c) {
  if (c.n_trials < 1) throw ConfigError("n_trials must be at least 1");
  for (Eigen::Index k : c.k_values)
    if (k < 1) throw ConfigError("training sizes must be at least 1");
  if (c.n_threads < 0) throw ConfigError("n_threads must be nonnegative");
}

inline bool tag_selected(const std::vector<std::string>& requested, const std::string& tag) {
  if (requested.empty()) return true;
  return std::find(requested.begin(), requested.end(), tag) != requested.end();
}

/// One estimator under test: a tag plus the map y -> xhat.  A null apply
/// records an estimator whose construction failed; it is reported as a
/// diverged row instead of aborting the sweep.
struct BankEntry {
  std::string tag;
  Eigen::Index k_train = 0;
  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> apply;
};

namespace detail {

/// Runs body(0..n_items-1) on a worker pool.  The first exception thrown by
/// any worker is rethrown after all workers stop.
inline void parallel_for(long n_items, int n_threads,
                         const std::function<void(long)>& body) {
  if (n_items <= 0) return;
  long workers = n_threads > 0 ? n_threads
                               : static_cast<long>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1L, n_items);
  if (workers == 1) {
    for (long i = 0; i < n_items; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (long w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long i = next.fetch_add(1); i < n_items && !failed.load();
             i = next.fetch_add(1))
          body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        failed.store(true);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Builds a bank entry, capturing construction failures as a null apply.
template <typename Builder>
void add_entry(std::vector<BankEntry>& bank, const std::vector<std::string>& requested,
               std::string tag, Eigen::Index k_train, Builder&& build) {
  if (!tag_selected(requested, tag)) return;
  BankEntry e;
  e.tag = std::move(tag);
  e.k_train = k_train;
  try {
    e.apply = build();
  } catch (const Error&) {
    e.apply = nullptr;
  }
  bank.push_back(std::move(e));
}

}  // namespace detail

/// The four estimators built from exact joint statistics, tagged
/// lmmse / wlmmse / gsp-lmmse / gsp-wlmmse (k_train = 0).
inline std::vector<BankEntry> make_theoretical_bank(
    const GraphSpectrum& s, const JointSecondOrder& joint, const SpectralDiagonalStats& diag,
    const std::vector<std::string>& requested = {},
    SolvePolicy policy = SolvePolicy::permissive) {
  std::vector<BankEntry> bank;
  detail::add_entry(bank, requested, "lmmse", 0, [&] {
    return [h = lmmse_operator(joint, policy)](const Eigen::VectorXcd& y) {
      return Eigen::VectorXcd(h * y);
    };
  });
  detail::add_entry(bank, requested, "wlmmse", 0, [&] {
    return [h = wlmmse_operators(joint, policy)](const Eigen::VectorXcd& y) {
      return apply_operator_pair(h, y);
    };
  });
  detail::add_entry(bank, requested, "gsp-lmmse", 0, [&] {
    return [&s, f = gsp_lmmse_filter(diag)](const Eigen::VectorXcd& y) {
      return apply_graph_filter(s, f, y);
    };
  });
  detail::add_entry(bank, requested, "gsp-wlmmse", 0, [&] {
    return [&s, f = gsp_wlmmse_filters(diag)](const Eigen::VectorXcd& y) {
      return gsp_wlmmse(s, f, y);
    };
  });
  return bank;
}

/// The four sample-mean estimators trained on a dataset, tagged
/// slmmse / swlmmse / sgsp-lmmse / sgsp-wlmmse.  With center = true the
/// empirical training means are subtracted before the statistics are formed
/// and the estimate is xhat = mean_x + Est(y - mean_y); used by the power
/// grid pipeline, whose signals are not zero mean.
inline std::vector<BankEntry> make_sample_bank(const GraphSpectrum& s,
                                               const TrainingDataset& dataset, bool center,
                                               const std::vector<std::string>& requested = {},
                                               SolvePolicy policy = SolvePolicy::permissive) {
  validate(dataset);
  const Eigen::Index k = dataset.k();
  Eigen::VectorXcd mean_x = Eigen::VectorXcd::Zero(dataset.nx());
  Eigen::VectorXcd mean_y = Eigen::VectorXcd::Zero(dataset.ny());
  TrainingDataset centered = dataset;
  if (center) {
    mean_x = dataset.x_samples.rowwise().mean();
    mean_y = dataset.y_samples.rowwise().mean();
    centered.x_samples.colwise() -= mean_x;
    centered.y_samples.colwise() -= mean_y;
  }
  const TrainingDataset& ds = centered;
  std::vector<BankEntry> bank;
  auto shifted = [mean_x, mean_y](auto&& core) {
    return [mean_x, mean_y, core = std::forward<decltype(core)>(core)](
               const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
      return mean_x + core(Eigen::VectorXcd(y - mean_y));
    };
  };
  detail::add_entry(bank, requested, "slmmse", k, [&] {
    const JointSecondOrder joint = sample_full_stats(ds);
    return shifted([h = lmmse_operator(joint, policy)](const Eigen::VectorXcd& y) {
      return Eigen::VectorXcd(h * y);
    });
  });
  detail::add_entry(bank, requested, "swlmmse", k, [&] {
    const JointSecondOrder joint = sample_full_stats(ds);
    return shifted([h = wlmmse_operators(joint, policy)](const Eigen::VectorXcd& y) {
      return apply_operator_pair(h, y);
    });
  });
  detail::add_entry(bank, requested, "sgsp-lmmse", k, [&] {
    const SpectralDiagonalStats diag = sample_spectral_diagonals(s, ds);
    return shifted([&s, f = gsp_lmmse_filter(diag)](const Eigen::VectorXcd& y) {
      return apply_graph_filter(s, f, y);
    });
  });
  detail::add_entry(bank, requested, "sgsp-wlmmse", k, [&] {
    const SpectralDiagonalStats diag = sample_spectral_diagonals(s, ds);
    return shifted([&s, f = gsp_wlmmse_filters(diag)](const Eigen::VectorXcd& y) {
      return gsp_wlmmse(s, f, y);
    });
  });
  return bank;
}

using DrawFn = std::function<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>(Rng&)>;

struct EvaluatedEntry {
  double mse = 0.0;
  double mse_stderr = 0.0;
  bool diverged = false;
};

/// Empirical MSE of every bank entry over n_trials independent draws.  Trial
/// t derives its stream from (seed, t), so results do not depend on thread
/// scheduling, and every entry sees the same draws (paired comparisons).
/// A non-finite squared error, or a failed entry, yields mse = inf with the
/// diverged flag set.
inline std::vector<EvaluatedEntry> evaluate_estimators(const std::vector<BankEntry>& bank,
                                                       const DrawFn& draw, long n_trials,
                                                       std::uint64_t seed, int n_threads = 0) {
  if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
  const std::size_t n_entries = bank.size();
  std::vector<double> sq_errors(static_cast<std::size_t>(n_trials) * n_entries, 0.0);
  detail::parallel_for(n_trials, n_threads, [&](long t) {
    Rng rng(substream_seed(seed, stream::test, trial_index(0, static_cast<std::uint64_t>(t))));
    const auto [x, y] = draw(rng);
    for (std::size_t e = 0; e < n_entries; ++e) {
      double se = std::numeric_limits<double>::infinity();
      if (bank[e].apply) {
        const Eigen::VectorXcd xhat = bank[e].apply(y);
        se = (xhat - x).squaredNorm();
      }
      sq_errors[static_cast<std::size_t>(t) * n_entries + e] = se;
    }
  });
  std::vector<EvaluatedEntry> out(n_entries);
  for (std::size_t e = 0; e < n_entries; ++e) {
    // Sequential reduction keeps the result bit-stable across runs.
    double sum = 0.0;
    bool finite = true;
    for (long t = 0; t < n_trials; ++t) {
      const double se = sq_errors[static_cast<std::size_t>(t) * n_entries + e];
      if (!std::isfinite(se)) finite = false;
      sum += se;
    }
    if (!finite) {
      out[e] = {std::numeric_limits<double>::infinity(), 0.0, true};
      continue;
    }
    const double mean = sum / static_cast<double>(n_trials);
    double var = 0.0;
    if (n_trials > 1) {
      for (long t = 0; t < n_trials; ++t) {
        const double d = sq_errors[static_cast<std::size_t>(t) * n_entries + e] - mean;
        var += d * d;
      }
      var /= static_cast<double>(n_trials - 1);
    }
    out[e] = {mean, std::sqrt(var / static_cast<double>(n_trials)), false};
  }
  return out;
}

namespace detail {

inline void append_evaluated(std::vector<McResult>& results, const std::string& scenario,
                             double sweep_value, const std::vector<BankEntry>& bank,
                             const std::vector<EvaluatedEntry>& evaluated, long n_trials,
                             std::uint64_t seed) {
  for (std::size_t e = 0; e < bank.size(); ++e) {
    McResult r;
    r.scenario = scenario;
    r.estimator = bank[e].tag;
    r.k_train = bank[e].k_train;
    r.sweep_value = sweep_value;
    r.mse = evaluated[e].mse;
    r.mse_stderr = evaluated[e].mse_stderr;
    r.n_trials = bank[e].apply ? n_trials : 0;
    r.seed = seed;
    r.diverged = evaluated[e].diverged;
    results.push_back(std::move(r));
  }
}

inline TrainingDataset draw_training_set(const DrawFn& draw, Eigen::Index n_x, Eigen::Index n_y,
                                         Eigen::Index k, std::uint64_t seed) {
  Rng rng(substream_seed(seed, stream::train, static_cast<std::uint64_t>(k)));
  TrainingDataset d;
  d.x_samples.resize(n_x, k);
  d.y_samples.resize(n_y, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto [x, y] = draw(rng);
    d.x_samples.col(i) = x;
    d.y_samples.col(i) = y;
  }
  return d;
}

}  // namespace detail

/// Synthetic linear-filter sweep: closed-form MSE rows for the four
/// theoretical-statistics estimators (k_train = 0, n_trials = 0), then
/// empirical rows for the four sample estimators at each training size.
/// The training set for size K is drawn from the substream indexed by K, so
/// a given (seed, K) pair sees the same data in any sweep.
inline std::vector<McResult> run_example1_benchmark(const Example1Config& cfg,
                                                    const GraphSpectrum& spectrum,
                                                    const BenchmarkConfig& bench) {
  validate(bench);
  const Example1Stats stats = example1_theoretical_stats(cfg, spectrum);
  const Example1Sampler sampler(cfg, spectrum);
  const DrawFn draw = [&sampler](Rng& rng) { return sampler.draw(rng); };
  std::vector<McResult> results;
  const MseReport report = theoretical_mses(stats.joint, stats.diag);
  const std::pair<const char*, double> theory[] = {{"lmmse", report.lmmse},
                                                   {"wlmmse", report.wlmmse},
                                                   {"gsp-lmmse", report.gsp_lmmse},
                                                   {"gsp-wlmmse", report.gsp_wlmmse}};
  for (const auto& [tag, mse] : theory) {
    if (!tag_selected(bench.estimators, tag)) continue;
    results.push_back({"example1", tag, 0, cfg.eta, mse, 0.0, 0, bench.seed, false});
  }
  std::vector<BankEntry> bank;
  for (Eigen::Index k : bench.k_values) {
    const TrainingDataset ds =
        detail::draw_training_set(draw, spectrum.n_vertices(), spectrum.n_vertices(), k,
                                  bench.seed);
    std::vector<BankEntry> trained =
        make_sample_bank(spectrum, ds, /*center=*/false, bench.estimators);
    for (BankEntry& e : trained) bank.push_back(std::move(e));
  }
  if (!bank.empty()) {
    const std::vector<EvaluatedEntry> evaluated =
        evaluate_estimators(bank, draw, bench.n_trials, bench.seed, bench.n_threads);
    detail::append_evaluated(results, "example1", cfg.eta, bank, evaluated, bench.n_trials,
                             bench.seed);
  }
  return results;
}

/// Power-grid sweep: the four sample estimators (with mean centering) at
/// each training size.  No closed-form rows exist for this model.
inline std::vector<McResult> run_psse_benchmark(const PowerSystemModel& model,
                                                const BenchmarkConfig& bench) {
  validate(bench);
  const GraphSpectrum spectrum = build_laplacian(susceptance_graph(model));
  const PsseSampler sampler(model);
  const DrawFn draw = [&sampler](Rng& rng) { return sampler.draw(rng); };
  std::vector<BankEntry> bank;
  for (Eigen::Index k : bench.k_values) {
    const TrainingDataset ds = detail::draw_training_set(
        draw, spectrum.n_vertices(), spectrum.n_vertices(), k, bench.seed);
    std::vector<BankEntry> trained =
        make_sample_bank(spectrum, ds, /*center=*/true, bench.estimators);
    for (BankEntry& e : trained) bank.push_back(std::move(e));
  }
  std::vector<McResult> results;
  if (!bank.empty()) {
    const std::vector<EvaluatedEntry> evaluated =
        evaluate_estimators(bank, draw, bench.n_trials, bench.seed, bench.n_threads);
    detail::append_evaluated(results, "psse", model.theta_max, bank, evaluated, bench.n_trials,
                             bench.seed);
  }
  return results;
}

struct RobustnessConfig {
  std::vector<int> change_counts;  // 0 = unperturbed baseline
  TopologyChange mode = TopologyChange::remove;
  Eigen::Index k_train = 1000;
  bool retrain = false;  // default: reuse statistics trained on the base grid
};

inline void validate(const RobustnessConfig& c) {
  if (c.change_counts.empty()) throw ConfigError("change_counts must be non-empty");
  for (int n : c.change_counts)
    if (n < 0) throw ConfigError("change counts must be nonnegative");
  if (c.k_train < 1) throw ConfigError("k_train must be at least 1");
}

/// Topology-mismatch study: estimators are trained once on the base grid,
/// then evaluated on measurements from a perturbed grid (change count c uses
/// perturbation substream c, so sweeps are reproducible and nested).  All
/// change counts share the test substream, so trial t pairs the same
/// mu/phase/noise draws across the sweep.  With retrain = true the training
/// set is redrawn from each perturbed grid instead.
inline std::vector<McResult> run_psse_robustness(const PowerSystemModel& base,
                                                 const RobustnessConfig& rc,
                                                 const BenchmarkConfig& bench) {
  validate(bench);
  validate(rc);
  const GraphSpectrum base_spectrum = build_laplacian(susceptance_graph(base));
  const Eigen::Index n = base_spectrum.n_vertices();
  std::vector<BankEntry> reused_bank;
  if (!rc.retrain) {
    const PsseSampler base_sampler(base);
    const DrawFn base_draw = [&base_sampler](Rng& rng) { return base_sampler.draw(rng); };
    const TrainingDataset ds =
        detail::draw_training_set(base_draw, n, n, rc.k_train, bench.seed);
    reused_bank = make_sample_bank(base_spectrum, ds, /*center=*/true, bench.estimators);
  }
  const char* mode_name = rc.mode == TopologyChange::remove ? "remove" : "add";
  std::vector<McResult> results;
  for (const int changes : rc.change_counts) {
    Rng perturb_rng(
        substream_seed(bench.seed, stream::perturb, static_cast<std::uint64_t>(changes)));
    const PowerSystemModel perturbed =
        perturb_topology(base, changes, rc.mode, perturb_rng);
    const PsseSampler sampler(perturbed);
    const DrawFn draw = [&sampler](Rng& rng) { return sampler.draw(rng); };
    std::vector<BankEntry> bank;
    if (rc.retrain) {
      const GraphSpectrum spectrum = build_laplacian(susceptance_graph(perturbed));
      const TrainingDataset ds = detail::draw_training_set(draw, n, n, rc.k_train, bench.seed);
      bank = make_sample_bank(spectrum, ds, /*center=*/true, bench.estimators);
    } else {
      bank = reused_bank;
    }
    const std::vector<EvaluatedEntry> evaluated =
        evaluate_estimators(bank, draw, bench.n_trials, bench.seed, bench.n_threads);
    char scenario[48];
    std::snprintf(scenario, sizeof scenario, "psse-robust-%s-%02d", mode_name, changes);
    detail::append_evaluated(results, scenario, base.theta_max, bank, evaluated,
                             bench.n_trials, bench.seed);
  }
  return results;
}

// --- results table -------------------------------------------------------
//
//   # gspwl-results v1
//   scenario,estimator,K,eta_or_theta,mse,mse_stderr,n_trials,seed

inline void write_results_csv(std::ostream& out, const std::vector<McResult>& results) {
  out << "# gspwl-results v1\n";
  out << "scenario,estimator,K,eta_or_theta,mse,mse_stderr,n_trials,seed\n";
  for (const McResult& r : results)
    out << r.scenario << ',' << r.estimator << ',' << r.k_train << ','
        << g17(r.sweep_value) << ',' << g17(r.mse) << ',' << g17(r.mse_stderr) << ','
        << r.n_trials << ',' << r.seed << '\n';
}

inline void write_results_csv(const std::string& path, const std::vector<McResult>& results) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  write_results_csv(out, results);
}

}  // namespace gspwl
