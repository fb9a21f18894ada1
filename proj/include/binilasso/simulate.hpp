#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binilasso/errors.hpp"
#include "binilasso/metrics.hpp"
#include "binilasso/parallel.hpp"
#include "binilasso/pipelines.hpp"
#include "binilasso/rng.hpp"
#include "binilasso/survival_data.hpp"

namespace binilasso {

/// Scenario shapes: 1 = two predictors with sharp cut-points, 2 = the same
/// step relationship in higher dimension with a sparse active set, 3 =
/// gradual cut-regions (no true cut-points), 4 = scenario-1 data evaluated
/// under the at-most-m-cut-points constraint. Features are iid Uniform(0,1);
/// event times are exponential with rate baseline_rate * exp(f(x)); censoring
/// is independent Uniform(0, c) with c calibrated to the target fraction.
struct ScenarioConfig {
  int scenario = 1;
  int n = 300;
  int p = 2;
  std::uint64_t seed = 1;
  std::vector<double> true_cuts = {0.3, 0.7};
  std::vector<double> effect_levels = {0.0, 1.0, 2.0};  // one per interval
  std::vector<std::pair<double, double>> ramp_regions = {{0.25, 0.40}, {0.60, 0.80}};
  double sparsity = 0.2;  // scenario 2: fraction of active features
  double censor_target = 0.30;
  double baseline_rate = 0.1;

  void check() const {
    if (scenario < 1 || scenario > 4) throw InvalidConfig("scenario must be 1..4");
    if (n < 2) throw InvalidConfig("n must be >= 2");
    if (p < 1) throw InvalidConfig("p must be >= 1");
    if (!(sparsity > 0.0) || sparsity > 1.0) throw InvalidConfig("sparsity must be in (0, 1]");
    if (!(censor_target >= 0.0) || censor_target >= 1.0)
      throw InvalidConfig("censor_target must be in [0, 1)");
    if (!(baseline_rate > 0.0)) throw InvalidConfig("baseline_rate must be positive");
    if (scenario == 3) {
      if (ramp_regions.empty() || effect_levels.size() != ramp_regions.size() + 1)
        throw InvalidConfig("need one effect level per plateau (ramp count + 1)");
      double prev_end = 0.0;
      for (const auto& [a, b] : ramp_regions) {
        if (!(a > 0.0) || !(b < 1.0) || !(a < b) || !(a >= prev_end))
          throw InvalidConfig("ramp regions must be increasing, disjoint and inside (0,1)");
        prev_end = b;
      }
    } else {
      if (true_cuts.empty() || effect_levels.size() != true_cuts.size() + 1)
        throw InvalidConfig("need one effect level per interval (cut count + 1)");
      double prev = 0.0;
      for (double c : true_cuts) {
        if (!(c > 0.0) || !(c < 1.0) || !(c > prev))
          throw InvalidConfig("true cuts must be strictly increasing inside (0,1)");
        prev = c;
      }
    }
  }

  int n_active() const {
    if (scenario == 2) return std::max(1, static_cast<int>(std::lround(sparsity * p)));
    return p;
  }

  /// Per-feature contribution to the true log hazard.
  double shape(double x) const {
    if (scenario == 3) {
      for (std::size_t k = ramp_regions.size(); k-- > 0;) {
        const auto& [a, b] = ramp_regions[k];
        if (x >= b) return effect_levels[k + 1];
        if (x > a)
          return effect_levels[k] + (effect_levels[k + 1] - effect_levels[k]) * (x - a) / (b - a);
      }
      return effect_levels[0];
    }
    std::size_t bin = 0;
    while (bin < true_cuts.size() && x > true_cuts[bin]) ++bin;
    return effect_levels[bin];
  }

  nlohmann::json to_json() const {
    nlohmann::json ramps = nlohmann::json::array();
    for (const auto& [a, b] : ramp_regions) ramps.push_back({a, b});
    return {{"scenario", scenario},
            {"n", n},
            {"p", p},
            {"seed", seed},
            {"true_cuts", true_cuts},
            {"effect_levels", effect_levels},
            {"ramp_regions", ramps},
            {"sparsity", sparsity},
            {"censor_target", censor_target},
            {"baseline_rate", baseline_rate}};
  }

  static ScenarioConfig from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    cfg.scenario = j.value("scenario", 1);
    cfg.n = j.value("n", 300);
    cfg.p = j.value("p", 2);
    cfg.seed = j.value("seed", std::uint64_t(1));
    if (j.contains("true_cuts")) cfg.true_cuts = j.at("true_cuts").get<std::vector<double>>();
    if (j.contains("effect_levels"))
      cfg.effect_levels = j.at("effect_levels").get<std::vector<double>>();
    if (j.contains("ramp_regions")) {
      cfg.ramp_regions.clear();
      for (const auto& r : j.at("ramp_regions"))
        cfg.ramp_regions.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    }
    cfg.sparsity = j.value("sparsity", 0.2);
    cfg.censor_target = j.value("censor_target", 0.30);
    cfg.baseline_rate = j.value("baseline_rate", 0.1);
    cfg.check();
    return cfg;
  }
};

struct SimulatedDataset {
  SurvivalDataset data;
  ScenarioConfig config;
  std::vector<int> active_features;
  std::vector<std::vector<double>> true_cuts_per_feature;  // empty for scenario 3 / inactive
  std::vector<double> true_log_hazard;                     // f(X_i), exact
  double censor_upper = 0.0;                               // calibrated c; 0 = none
};

namespace detail {

/// Expected censoring fraction for C ~ U(0, c), T ~ Exp(rate): averaged over
/// the realized rates. Decreasing in c, from 1 at c -> 0 to 0 at c -> inf.
inline double expected_censoring(const std::vector<double>& rates, double c) {
  double total = 0.0;
  for (double r : rates) {
    const double rc = r * c;
    total += rc < 1e-12 ? 1.0 - rc / 2.0 : (1.0 - std::exp(-rc)) / rc;
  }
  return total / rates.size();
}

inline double calibrate_censoring(const std::vector<double>& rates, double target) {
  double lo = 1e-12, hi = 1.0;
  while (expected_censoring(rates, hi) > target && hi < 1e18) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected_censoring(rates, mid) > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline SimulatedDataset simulate(const ScenarioConfig& cfg) {
  cfg.check();
  SimulatedDataset out;
  out.config = cfg;
  Rng rng(cfg.seed);

  out.data.features.resize(cfg.n, cfg.p);
  for (int j = 0; j < cfg.p; ++j) {
    out.data.feature_names.push_back("x" + std::to_string(j + 1));
    for (int i = 0; i < cfg.n; ++i) out.data.features(i, j) = rng.uniform_open();
  }

  const int n_active = cfg.n_active();
  for (int j = 0; j < n_active; ++j) {
    out.active_features.push_back(j);
  }
  out.true_cuts_per_feature.resize(cfg.p);
  if (cfg.scenario != 3)
    for (int j : out.active_features) out.true_cuts_per_feature[j] = cfg.true_cuts;

  out.true_log_hazard.assign(cfg.n, 0.0);
  std::vector<double> rates(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    double f = 0.0;
    for (int j : out.active_features) f += cfg.shape(out.data.features(i, j));
    out.true_log_hazard[i] = f;
    rates[i] = cfg.baseline_rate * std::exp(f);
  }

  std::vector<double> event_times(cfg.n);
  for (int i = 0; i < cfg.n; ++i) event_times[i] = rng.exponential() / rates[i];

  out.data.times.resize(cfg.n);
  out.data.events.resize(cfg.n);
  if (cfg.censor_target > 0.0) {
    out.censor_upper = detail::calibrate_censoring(rates, cfg.censor_target);
    for (int i = 0; i < cfg.n; ++i) {
      const double censor_time = out.censor_upper * rng.uniform_open();
      out.data.events[i] = event_times[i] <= censor_time ? 1 : 0;
      out.data.times[i] = std::min(event_times[i], censor_time);
    }
  } else {
    for (int i = 0; i < cfg.n; ++i) {
      out.data.times[i] = event_times[i];
      out.data.events[i] = 1;
    }
  }
  if (out.data.outcome().n_events() == 0)
    throw InvalidConfig("simulation produced no events; lower censor_target or increase n");
  return out;
}

enum class BenchmarkMetricSet { all };

struct BenchmarkRow {
  int scenario = 0;
  std::string method;
  int replicate = 0;
  int n = 0;
  int p = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

struct BenchmarkAggregate {
  int scenario = 0;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 when count == 1
  int count = 0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;         // deterministic metrics
  std::vector<BenchmarkRow> timing_rows;  // wall times; kept out of rows so
                                          // result files are reproducible
  std::vector<BenchmarkAggregate> aggregates() const {
    std::map<std::tuple<int, std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : rows) groups[{r.scenario, r.method, r.metric}].push_back(r.value);
    std::vector<BenchmarkAggregate> out;
    for (const auto& [key, vals] : groups) {
      BenchmarkAggregate agg;
      agg.scenario = std::get<0>(key);
      agg.method = std::get<1>(key);
      agg.metric = std::get<2>(key);
      agg.count = static_cast<int>(vals.size());
      for (double v : vals) agg.mean += v;
      agg.mean /= agg.count;
      double ss = 0.0;
      for (double v : vals) ss += (v - agg.mean) * (v - agg.mean);
      agg.sd = agg.count > 1 ? std::sqrt(ss / (agg.count - 1)) : 0.0;
      out.push_back(std::move(agg));
    }
    return out;
  }
};

struct BenchmarkOptions {
  int replicates = 200;
  std::vector<Method> methods = {Method::bini, Method::mini};
  GridConfig grid;
  FitConfig fit;
  int limited_m = 2;  // scenario 4: at most m cut-points, one-step selection
  int threads = 1;
  std::string out_dir;  // empty: no files written
};

namespace detail {

inline void append_row(std::vector<BenchmarkRow>& rows, const ScenarioConfig& cfg, int replicate,
                       std::uint64_t seed, const std::string& method, const std::string& metric,
                       double value) {
  rows.push_back({cfg.scenario, method, replicate, cfg.n, cfg.p, metric, value, seed});
}

inline std::string rows_to_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "scenario,method,replicate,n,p,metric,value,seed\n";
  for (const auto& r : rows) {
    out += std::to_string(r.scenario) + "," + r.method + "," + std::to_string(r.replicate) + "," +
           std::to_string(r.n) + "," + std::to_string(r.p) + "," + r.metric + "," +
           format_full(r.value) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

struct ReplicateOutput {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkRow> timing_rows;
};

inline ReplicateOutput run_replicate(const ScenarioConfig& scenario_cfg, int replicate,
                                     const BenchmarkOptions& opts) {
  ReplicateOutput out;
  ScenarioConfig cfg = scenario_cfg;
  cfg.seed = child_seed(scenario_cfg.seed, static_cast<std::uint64_t>(replicate));
  const std::uint64_t seed = cfg.seed;
  auto sim = simulate(cfg);
  const auto outcome = sim.data.outcome();
  const auto time_grid = default_time_grid(outcome);
  const auto censor = censoring_km(outcome);

  // true-model benchmark: the exact generating linear predictor, k = 0
  {
    const double nll_true = cox_nll(outcome, sim.true_log_hazard);
    append_row(out.rows, cfg, replicate, seed, "true", "aic", 2.0 * cfg.n * nll_true);
    auto bh = breslow_baseline_lp(sim.true_log_hazard, outcome);
    append_row(out.rows, cfg, replicate, seed, "true", "ibs",
               ibs(bh, sim.true_log_hazard, outcome, time_grid, &censor).value);
    append_row(out.rows, cfg, replicate, seed, "true", "c_index",
               c_index(sim.true_log_hazard, outcome));
  }

  for (Method method : opts.methods) {
    const std::string name = to_string(method);
    FitConfig fit_cfg = opts.fit;
    fit_cfg.seed = seed;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      CutpointReport report;
      if (cfg.scenario == 4) {
        LimitedCutConfig lim;
        lim.m = opts.limited_m;
        lim.mode = LimitedCutConfig::Mode::one_step;
        report = limited_one_step(sim.data, lim, opts.grid, fit_cfg, method);
      } else if (method == Method::bini) {
        report = fit_binilasso(sim.data, opts.grid, fit_cfg).report;
      } else {
        report = fit_minilasso_pipeline(sim.data, opts.grid, fit_cfg).report;
      }
      const auto t1 = std::chrono::steady_clock::now();
      append_row(out.timing_rows, cfg, replicate, seed, name, "wall_time_seconds",
                 std::chrono::duration<double>(t1 - t0).count());

      append_row(out.rows, cfg, replicate, seed, name, "n_cutpoints", report.total_cutpoints());
      append_row(out.rows, cfg, replicate, seed, name, "max_cutpoints_per_feature",
                 report.max_cutpoints_per_feature());

      if (cfg.scenario != 3) {
        auto acc = cutpoint_accuracy(sim.true_cuts_per_feature,
                                     report.thresholds_by_feature(cfg.p));
        append_row(out.rows, cfg, replicate, seed, name, "mean_abs_bias", acc.mean_abs_bias);
        append_row(out.rows, cfg, replicate, seed, name, "n_matched", acc.n_matched);
        append_row(out.rows, cfg, replicate, seed, name, "n_missed", acc.n_missed);
        append_row(out.rows, cfg, replicate, seed, name, "n_spurious", acc.n_spurious);
      }

      if (report.total_cutpoints() == 0) {
        append_row(out.rows, cfg, replicate, seed, name, "empty_report", 1.0);
      } else {
        auto refit = refit_categorized(sim.data, report);
        append_row(out.rows, cfg, replicate, seed, name, "aic", refit.bundle.aic);
        append_row(out.rows, cfg, replicate, seed, name, "ibs", refit.bundle.ibs);
        append_row(out.rows, cfg, replicate, seed, name, "c_index", refit.bundle.c_index);
      }
    } catch (const Error&) {
      append_row(out.rows, cfg, replicate, seed, name, "failed", 1.0);
    }
  }
  return out;
}

}  // namespace detail

/// Runs every (scenario, method, replicate) combination, collecting accuracy
/// and model-fit metrics per replicate plus the true-model benchmark. Wall
/// times go to separate timing rows/files so the result files are
/// byte-reproducible. Replicates run concurrently; each derives its own child
/// seed, so results are independent of scheduling.
inline BenchmarkReport run_benchmark(const std::vector<ScenarioConfig>& scenarios,
                                     const BenchmarkOptions& opts) {
  if (opts.replicates < 1) throw InvalidConfig("replicates must be >= 1");
  BenchmarkReport report;
  std::vector<detail::ReplicateOutput> slots(scenarios.size() * opts.replicates);
  parallel_for(slots.size(), opts.threads, [&](std::size_t idx) {
    const std::size_t s = idx / opts.replicates;
    const int r = static_cast<int>(idx % opts.replicates);
    slots[idx] = detail::run_replicate(scenarios[s], r, opts);
  });
  for (auto& slot : slots) {
    report.rows.insert(report.rows.end(), slot.rows.begin(), slot.rows.end());
    report.timing_rows.insert(report.timing_rows.end(), slot.timing_rows.begin(),
                              slot.timing_rows.end());
  }

  if (!opts.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(opts.out_dir);
    for (const auto& cfg : scenarios) {
      auto filter = [&](const std::vector<BenchmarkRow>& rows) {
        std::vector<BenchmarkRow> sub;
        for (const auto& r : rows)
          if (r.scenario == cfg.scenario) sub.push_back(r);
        return sub;
      };
      std::ofstream res(fs::path(opts.out_dir) /
                        ("scenario_" + std::to_string(cfg.scenario) + "_results.csv"));
      res << detail::rows_to_csv(filter(report.rows));
      std::ofstream tim(fs::path(opts.out_dir) /
                        ("scenario_" + std::to_string(cfg.scenario) + "_timings.csv"));
      tim << detail::rows_to_csv(filter(report.timing_rows));
    }
    std::ofstream agg(std::filesystem::path(opts.out_dir) / "aggregates.csv");
    agg << "scenario,method,metric,mean,sd,count\n";
    for (const auto& a : report.aggregates())
      agg << a.scenario << ',' << a.method << ',' << a.metric << ',' << detail::format_full(a.mean)
          << ',' << detail::format_full(a.sd) << ',' << a.count << '\n';
  }
  return report;
}

}  // namespace binilasso
