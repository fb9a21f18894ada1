// Command-line surface: fit, simulate, benchmark, screen, evaluate.
// Machine-readable outputs (JSON reports, CSV tables) are byte-reproducible
// for a fixed seed; logs go to stderr; timing and timestamps go to the
// .manifest.json sidecars. Exit codes: 0 success, 1 input error,
// 2 numerical failure under --strict.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "binilasso/binilasso.hpp"

namespace bl = binilasso;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitNumericalFailure = 2;

std::vector<std::string> collect_argv(int argc, char** argv) {
  return std::vector<std::string>(argv, argv + argc);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw bl::Error("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

struct CommonFitArgs {
  std::string input, time_col = "time", event_col = "event";
  std::string method = "bini";
  int bins = 50;
  std::string strategy = "quantile";
  int folds = 10;
  int n_lambdas = 100;
  std::string lambda_rule = "min";
  std::string loo = "exact";
  std::uint64_t seed = 0;
  int threads = 0;
  bool standardize = false;
  bool strict = false;
  int max_cuts = 0;  // 0: unlimited
  std::string mode = "two-step";
  std::string ranking = "entry-order";
  bool evaluate = false;
  std::string out = "report.json";

  bl::GridConfig grid_config() const {
    bl::GridConfig gc;
    gc.bins = bins;
    if (strategy == "quantile")
      gc.strategy = bl::GridStrategy::quantile;
    else if (strategy == "uniform")
      gc.strategy = bl::GridStrategy::uniform;
    else
      throw bl::InvalidConfig("unknown grid strategy: " + strategy);
    return gc;
  }
  bl::FitConfig fit_config() const {
    bl::FitConfig fc;
    fc.n_folds = folds;
    fc.seed = seed;
    fc.n_lambdas = n_lambdas;
    fc.use_1se = lambda_rule == "1se";
    fc.loo = loo == "one-step" ? bl::LooMethod::one_step : bl::LooMethod::exact;
    fc.threads = threads > 0 ? threads : bl::default_threads();
    return fc;
  }
  bl::Method method_enum() const {
    if (method == "bini") return bl::Method::bini;
    if (method == "mini") return bl::Method::mini;
    throw bl::InvalidConfig("unknown method: " + method);
  }
};

void add_common_fit_flags(CLI::App* cmd, CommonFitArgs& args) {
  cmd->add_option("--input", args.input, "input CSV")->required();
  cmd->add_option("--time", args.time_col, "time column name");
  cmd->add_option("--event", args.event_col, "event column name (codes 0/1)");
  cmd->add_option("--bins", args.bins, "candidate bins per feature");
  cmd->add_option("--strategy", args.strategy, "grid strategy: quantile|uniform");
  cmd->add_option("--folds", args.folds, "cross-validation folds");
  cmd->add_option("--lambdas", args.n_lambdas, "path length");
  cmd->add_option("--lambda-rule", args.lambda_rule, "lambda selection: min|1se");
  cmd->add_option("--loo", args.loo, "leave-one-out method: exact|one-step");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--threads", args.threads, "thread cap (0 = hardware)");
  cmd->add_flag("--standardize", args.standardize, "standardize features first");
  cmd->add_flag("--strict", args.strict, "exit 2 on convergence failure");
}

int run_fit(const CommonFitArgs& args, const std::vector<std::string>& argv) {
  bl::RunManifest manifest;
  manifest.command = "fit";
  manifest.argv = argv;
  manifest.seed = args.seed;
  manifest.started_at = bl::iso_utc_now();
  manifest.input_digests[args.input] = bl::fnv1a64_file(args.input);
  const auto t0 = std::chrono::steady_clock::now();

  auto ds = bl::load_csv(args.input, args.time_col, args.event_col);
  if (args.standardize) ds = bl::standardize(ds).first;

  const auto grid_cfg = args.grid_config();
  const auto fit_cfg = args.fit_config();
  const auto method = args.method_enum();

  bl::CutpointReport report;
  bool converged = true;
  if (args.max_cuts > 0) {
    bl::LimitedCutConfig lim;
    lim.m = args.max_cuts;
    lim.mode = args.mode == "one-step" ? bl::LimitedCutConfig::Mode::one_step
                                       : bl::LimitedCutConfig::Mode::two_step;
    lim.ranking_rule = args.ranking == "max-abs-coef"
                           ? bl::LimitedCutConfig::RankingRule::max_abs_coef
                           : bl::LimitedCutConfig::RankingRule::entry_order;
    report = lim.mode == bl::LimitedCutConfig::Mode::one_step
                 ? bl::limited_one_step(ds, lim, grid_cfg, fit_cfg, method)
                 : bl::limited_two_step(ds, lim, grid_cfg, fit_cfg, method);
  } else if (method == bl::Method::bini) {
    auto res = bl::fit_binilasso(ds, grid_cfg, fit_cfg);
    report = std::move(res.report);
    converged = res.fit.converged;
  } else {
    auto res = bl::fit_minilasso_pipeline(ds, grid_cfg, fit_cfg);
    report = std::move(res.report);
    converged = res.fit.stage_fit.converged;
  }

  write_json(args.out, bl::report_to_json(report));
  std::cerr << "binilasso: " << report.total_cutpoints() << " cut-point(s) across "
            << report.features.size() << " feature(s) -> " << args.out << "\n";

  if (args.evaluate) {
    const std::string eval_path =
        (std::filesystem::path(args.out).parent_path() /
         (std::filesystem::path(args.out).stem().string() + ".eval.json"))
            .string();
    if (report.total_cutpoints() == 0) {
      std::cerr << "binilasso: empty report, skipping evaluation\n";
    } else {
      auto refit = bl::refit_categorized(ds, report);
      converged = converged && refit.fit.converged;
      write_json(eval_path, bl::bundle_to_json(refit.bundle));
      std::cerr << "binilasso: evaluation -> " << eval_path << "\n";
    }
  }

  manifest.config = {{"input", args.input},
                     {"time", args.time_col},
                     {"event", args.event_col},
                     {"method", args.method},
                     {"bins", args.bins},
                     {"strategy", args.strategy},
                     {"folds", args.folds},
                     {"lambdas", args.n_lambdas},
                     {"lambda_rule", args.lambda_rule},
                     {"loo", args.loo},
                     {"standardize", args.standardize},
                     {"max_cuts", args.max_cuts},
                     {"mode", args.mode},
                     {"ranking", args.ranking}};
  manifest.finished_at = bl::iso_utc_now();
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(args.out);

  if (!converged) {
    std::cerr << "binilasso: warning: a fit did not converge within the cycle cap\n";
    if (args.strict) return kExitNumericalFailure;
  }
  return kExitOk;
}

int run_simulate(int scenario, int n, int p, std::uint64_t seed, double censoring,
                 const std::string& out, const std::vector<std::string>& argv) {
  bl::RunManifest manifest;
  manifest.command = "simulate";
  manifest.argv = argv;
  manifest.seed = seed;
  manifest.started_at = bl::iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  bl::ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.n = n;
  if (p > 0) cfg.p = p;
  cfg.seed = seed;
  cfg.censor_target = censoring;
  auto sim = bl::simulate(cfg);
  bl::write_csv(sim.data, out);
  std::cerr << "binilasso: wrote " << sim.data.n() << " observations x " << sim.data.p()
            << " features -> " << out << "\n";

  manifest.config = cfg.to_json();
  manifest.config["censor_upper"] = sim.censor_upper;
  manifest.config["active_features"] = sim.active_features;
  manifest.finished_at = bl::iso_utc_now();
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(out);
  return kExitOk;
}

int run_benchmark(std::vector<int> scenarios, std::vector<int> ns, int p, int replicates,
                  const std::string& methods_csv, int bins, int folds, std::uint64_t seed,
                  int max_cuts, int threads, const std::string& config_path,
                  const std::string& out_dir, const std::vector<std::string>& argv) {
  bl::RunManifest manifest;
  manifest.command = "benchmark";
  manifest.argv = argv;
  manifest.seed = seed;
  manifest.started_at = bl::iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<bl::ScenarioConfig> configs;
  bl::BenchmarkOptions opts;
  opts.replicates = replicates;
  opts.grid.bins = bins;
  opts.fit.n_folds = folds;
  opts.limited_m = max_cuts;
  opts.threads = threads > 0 ? threads : bl::default_threads();
  opts.out_dir = out_dir;

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw bl::Error("cannot open config: " + config_path);
    nlohmann::json j;
    in >> j;
    manifest.input_digests[config_path] = bl::fnv1a64_file(config_path);
    for (const auto& sj : j.at("scenarios")) configs.push_back(bl::ScenarioConfig::from_json(sj));
    if (j.contains("replicates")) opts.replicates = j.at("replicates").get<int>();
    if (j.contains("bins")) opts.grid.bins = j.at("bins").get<int>();
    if (j.contains("folds")) opts.fit.n_folds = j.at("folds").get<int>();
    if (j.contains("max_cuts")) opts.limited_m = j.at("max_cuts").get<int>();
  } else {
    if (scenarios.empty()) throw bl::InvalidConfig("need at least one --scenario");
    if (ns.empty()) ns.push_back(300);
    for (int sc : scenarios)
      for (int n : ns) {
        bl::ScenarioConfig cfg;
        cfg.scenario = sc;
        cfg.n = n;
        if (p > 0) cfg.p = p;
        cfg.seed = seed;
        configs.push_back(cfg);
      }
  }

  opts.methods.clear();
  std::stringstream ss(methods_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "bini")
      opts.methods.push_back(bl::Method::bini);
    else if (tok == "mini")
      opts.methods.push_back(bl::Method::mini);
    else
      throw bl::InvalidConfig("unknown method in --methods: " + tok);
  }

  auto report = bl::run_benchmark(configs, opts);
  std::cerr << "binilasso: " << report.rows.size() << " result rows -> " << out_dir << "\n";

  nlohmann::json sc_json = nlohmann::json::array();
  for (const auto& cfg : configs) sc_json.push_back(cfg.to_json());
  manifest.config = {{"scenarios", sc_json},
                     {"replicates", opts.replicates},
                     {"methods", methods_csv},
                     {"bins", opts.grid.bins},
                     {"folds", opts.fit.n_folds},
                     {"max_cuts", opts.limited_m}};
  manifest.finished_at = bl::iso_utc_now();
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write((std::filesystem::path(out_dir) / "benchmark").string());
  return kExitOk;
}

int run_screen(const std::string& input, const std::string& time_col, const std::string& event_col,
               int top, int threads, const std::string& out,
               const std::vector<std::string>& argv) {
  bl::RunManifest manifest;
  manifest.command = "screen";
  manifest.argv = argv;
  manifest.started_at = bl::iso_utc_now();
  manifest.input_digests[input] = bl::fnv1a64_file(input);
  const auto t0 = std::chrono::steady_clock::now();

  auto ds = bl::load_csv(input, time_col, event_col);
  auto screen = bl::screen_features(ds, top, threads > 0 ? threads : bl::default_threads());

  std::ofstream table(out);
  if (!table) throw bl::Error("cannot write file: " + out);
  table << "feature,name,aic,ibs,slope,degenerate,selected\n";
  std::vector<char> selected(ds.p(), 0);
  for (int j : screen.selected) selected[j] = 1;
  for (const auto& row : screen.table) {
    table << row.feature << ',' << row.name << ',' << bl::detail::format_full(row.aic) << ','
          << bl::detail::format_full(row.ibs) << ',' << bl::detail::format_full(row.slope) << ','
          << int(row.degenerate) << ',' << int(selected[row.feature]) << '\n';
  }
  const std::string list_path =
      (std::filesystem::path(out).parent_path() /
       (std::filesystem::path(out).stem().string() + ".selected.txt"))
          .string();
  std::ofstream list(list_path);
  for (int j : screen.selected) list << ds.feature_names[j] << '\n';
  std::cerr << "binilasso: screened " << screen.selected.size() << " feature(s) -> " << out
            << ", " << list_path << "\n";

  manifest.config = {{"input", input}, {"time", time_col}, {"event", event_col}, {"top", top}};
  manifest.finished_at = bl::iso_utc_now();
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(out);
  return kExitOk;
}

int run_evaluate(const std::string& input, const std::string& time_col,
                 const std::string& event_col, const std::string& report_path, bool strict,
                 const std::string& out, const std::vector<std::string>& argv) {
  bl::RunManifest manifest;
  manifest.command = "evaluate";
  manifest.argv = argv;
  manifest.started_at = bl::iso_utc_now();
  manifest.input_digests[input] = bl::fnv1a64_file(input);
  manifest.input_digests[report_path] = bl::fnv1a64_file(report_path);
  const auto t0 = std::chrono::steady_clock::now();

  auto ds = bl::load_csv(input, time_col, event_col);
  std::ifstream rin(report_path);
  if (!rin) throw bl::Error("cannot open report: " + report_path);
  nlohmann::json rj;
  rin >> rj;
  auto report = bl::report_from_json(rj);

  auto refit = bl::refit_categorized(ds, report);
  write_json(out, bl::bundle_to_json(refit.bundle));
  std::cerr << "binilasso: evaluation -> " << out << "\n";

  manifest.config = {{"input", input}, {"report", report_path}};
  manifest.finished_at = bl::iso_utc_now();
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(out);

  if (!refit.fit.converged) {
    std::cerr << "binilasso: warning: refit did not converge\n";
    if (strict) return kExitNumericalFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cut-point detection for right-censored survival data"};
  app.require_subcommand(1);
  const auto argv_copy = collect_argv(argc, argv);

  // fit
  CommonFitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "detect cut-points in a CSV dataset");
  add_common_fit_flags(fit_cmd, fit_args);
  fit_cmd->add_option("--method", fit_args.method, "bini|mini");
  fit_cmd->add_option("--max-cuts", fit_args.max_cuts, "cap on cut-points per feature (0 = off)");
  fit_cmd->add_option("--mode", fit_args.mode, "limited selection mode: one-step|two-step");
  fit_cmd->add_option("--ranking", fit_args.ranking, "ranking rule: entry-order|max-abs-coef");
  fit_cmd->add_flag("--evaluate", fit_args.evaluate, "also write an evaluation bundle");
  fit_cmd->add_option("--out", fit_args.out, "output report JSON");

  // simulate
  int sim_scenario = 1, sim_n = 300, sim_p = 0;
  std::uint64_t sim_seed = 1;
  double sim_censoring = 0.30;
  std::string sim_out = "sim.csv";
  auto* sim_cmd = app.add_subcommand("simulate", "generate a benchmark dataset");
  sim_cmd->add_option("--scenario", sim_scenario, "scenario 1..4")->required();
  sim_cmd->add_option("--n", sim_n, "sample size");
  sim_cmd->add_option("--p", sim_p, "number of features (scenario default if 0)");
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_option("--censoring", sim_censoring, "target censoring fraction");
  sim_cmd->add_option("--out", sim_out, "output CSV");

  // benchmark
  std::vector<int> bench_scenarios;
  std::string bench_ns = "300";
  int bench_p = 0, bench_reps = 200, bench_bins = 50, bench_folds = 10, bench_threads = 0;
  int bench_max_cuts = 2;
  std::uint64_t bench_seed = 1;
  std::string bench_methods = "bini,mini", bench_out = "bench", bench_config;
  auto* bench_cmd = app.add_subcommand("benchmark", "run seeded simulation benchmarks");
  bench_cmd->add_option("--scenario", bench_scenarios, "scenario(s) 1..4");
  bench_cmd->add_option("--n", bench_ns, "comma-separated sample sizes");
  bench_cmd->add_option("--p", bench_p, "number of features (scenario default if 0)");
  bench_cmd->add_option("--replicates", bench_reps, "replicates per configuration");
  bench_cmd->add_option("--methods", bench_methods, "comma-separated: bini,mini");
  bench_cmd->add_option("--bins", bench_bins, "candidate bins per feature");
  bench_cmd->add_option("--folds", bench_folds, "cross-validation folds");
  bench_cmd->add_option("--seed", bench_seed, "master seed");
  bench_cmd->add_option("--max-cuts", bench_max_cuts, "scenario-4 cap per feature");
  bench_cmd->add_option("--threads", bench_threads, "thread cap (0 = hardware)");
  bench_cmd->add_option("--config", bench_config, "benchmark config JSON");
  bench_cmd->add_option("--out", bench_out, "output directory");

  // screen
  std::string screen_input, screen_time = "time", screen_event = "event",
              screen_out = "ranking.csv";
  int screen_top = 50, screen_threads = 0;
  auto* screen_cmd = app.add_subcommand("screen", "univariate Cox feature screening");
  screen_cmd->add_option("--input", screen_input, "input CSV")->required();
  screen_cmd->add_option("--time", screen_time, "time column name");
  screen_cmd->add_option("--event", screen_event, "event column name");
  screen_cmd->add_option("--top", screen_top, "top k per metric");
  screen_cmd->add_option("--threads", screen_threads, "thread cap (0 = hardware)");
  screen_cmd->add_option("--out", screen_out, "output ranking CSV");

  // evaluate
  std::string eval_input, eval_time = "time", eval_event = "event", eval_report,
              eval_out = "eval.json";
  bool eval_strict = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "refit categorized predictors from a report");
  eval_cmd->add_option("--input", eval_input, "input CSV")->required();
  eval_cmd->add_option("--time", eval_time, "time column name");
  eval_cmd->add_option("--event", eval_event, "event column name");
  eval_cmd->add_option("--report", eval_report, "cut-point report JSON")->required();
  eval_cmd->add_flag("--strict", eval_strict, "exit 2 on convergence failure");
  eval_cmd->add_option("--out", eval_out, "output evaluation JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args, argv_copy);
    if (sim_cmd->parsed())
      return run_simulate(sim_scenario, sim_n, sim_p, sim_seed, sim_censoring, sim_out, argv_copy);
    if (bench_cmd->parsed()) {
      std::vector<int> ns;
      std::stringstream ss(bench_ns);
      std::string tok;
      while (std::getline(ss, tok, ',')) ns.push_back(std::stoi(tok));
      return run_benchmark(bench_scenarios, ns, bench_p, bench_reps, bench_methods, bench_bins,
                           bench_folds, bench_seed, bench_max_cuts, bench_threads, bench_config,
                           bench_out, argv_copy);
    }
    if (screen_cmd->parsed()) {
      if (screen_top < 1) {
        std::cerr << "binilasso: --top must be >= 1\n";
        return kExitInputError;
      }
      return run_screen(screen_input, screen_time, screen_event, screen_top, screen_threads,
                        screen_out, argv_copy);
    }
    if (eval_cmd->parsed())
      return run_evaluate(eval_input, eval_time, eval_event, eval_report, eval_strict, eval_out,
                          argv_copy);
  } catch (const bl::Error& e) {
    std::cerr << "binilasso: error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "binilasso: error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
