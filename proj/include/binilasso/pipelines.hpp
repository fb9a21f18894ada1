#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binilasso/binarize.hpp"
#include "binilasso/cox.hpp"
#include "binilasso/metrics.hpp"
#include "binilasso/parallel.hpp"
#include "binilasso/solver.hpp"
#include "binilasso/unilasso.hpp"

namespace binilasso {

struct GridConfig {
  int bins = 50;
  GridStrategy strategy = GridStrategy::quantile;
  bool include_boundary = false;
  std::optional<std::vector<std::vector<double>>> explicit_cuts;
};

struct FitConfig {
  int n_folds = 10;
  std::uint64_t seed = 0;
  int n_lambdas = 100;
  double lambda_ratio = 0.0;  // <= 0: auto
  bool use_1se = false;
  LooMethod loo = LooMethod::exact;
  int threads = 1;
};

enum class Method { bini, mini };

inline std::string to_string(Method m) { return m == Method::bini ? "bini" : "mini"; }

/// The artifact's primary output: selected cut-points per feature with their
/// effect sizes (penalized coefficients for bini, composite effects for
/// mini), plus enough provenance to replay the run.
struct CutpointReport {
  struct FeatureCuts {
    int feature = 0;
    std::string name;
    std::vector<double> thresholds;  // strictly increasing
    std::vector<double> effects;     // aligned with thresholds
  };

  std::string method;
  double lambda = 0.0;
  std::string lambda_rule;  // "min", "1se" or "path_end"
  std::vector<FeatureCuts> features;
  nlohmann::json grid_provenance;
  std::uint64_t seed = 0;
  std::vector<int> dropped_features;

  int total_cutpoints() const {
    int c = 0;
    for (const auto& f : features) c += static_cast<int>(f.thresholds.size());
    return c;
  }
  int max_cutpoints_per_feature() const {
    int m = 0;
    for (const auto& f : features) m = std::max(m, static_cast<int>(f.thresholds.size()));
    return m;
  }
  /// Per-feature threshold lists padded to p features, for accuracy metrics.
  std::vector<std::vector<double>> thresholds_by_feature(int p) const {
    std::vector<std::vector<double>> out(p);
    for (const auto& f : features) out[f.feature] = f.thresholds;
    return out;
  }
};

struct LimitedCutConfig {
  int m = 2;
  enum class Mode { one_step, two_step } mode = Mode::two_step;
  enum class RankingRule { entry_order, max_abs_coef } ranking_rule = RankingRule::entry_order;
};

namespace detail {

inline nlohmann::json grid_provenance_json(const CutGrid& grid, const GridConfig& cfg,
                                           const std::vector<std::string>& names) {
  return {{"strategy", to_string(grid.strategy)},
          {"bins", cfg.bins},
          {"thresholds", grid_to_json(grid, names)}};
}

inline PenaltyWeights design_weights(const CumulativeDesign& design) {
  auto w = PenaltyWeights::uniform(design.d());
  for (int j : design.penalty_exempt) w.weights[j] = 0.0;
  return w;
}

inline CvOptions cv_options(const FitConfig& cfg) {
  CvOptions opts;
  opts.n_folds = cfg.n_folds;
  opts.seed = cfg.seed;
  opts.path.n_lambdas = cfg.n_lambdas;
  opts.path.lambda_ratio = cfg.lambda_ratio;
  opts.threads = cfg.threads;
  return opts;
}

/// Collects nonzero effects into per-feature cut lists, skipping boundary
/// indicator columns.
inline void fill_report_features(CutpointReport& report, const CumulativeDesign& design,
                                 const std::vector<double>& effects) {
  std::map<int, CutpointReport::FeatureCuts> by_feature;
  for (int k = 0; k < design.d(); ++k) {
    if (effects[k] == 0.0 || design.column_meta[k].threshold_index < 0) continue;
    auto& fc = by_feature[design.column_meta[k].feature];
    fc.feature = design.column_meta[k].feature;
    fc.name = design.feature_names[fc.feature];
    fc.thresholds.push_back(design.column_meta[k].threshold);
    fc.effects.push_back(effects[k]);
  }
  for (auto& [f, fc] : by_feature) report.features.push_back(std::move(fc));
}

/// Ranks one feature's columns from a fitted path: entry order (earliest
/// entrants first, ties by largest absolute coefficient along the path, then
/// by lower threshold index) or by largest absolute path coefficient.
/// Columns that never enter are not ranked at all.
inline std::vector<int> rank_columns(const LassoPath& path, const std::vector<int>& columns,
                                     LimitedCutConfig::RankingRule rule) {
  std::vector<double> max_abs(columns.size(), 0.0);
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (const auto& f : path.fits)
      max_abs[c] = std::max(max_abs[c], std::abs(f.beta[columns[c]]));

  std::vector<int> order;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (!std::isnan(path.entry_lambda[columns[c]]) && max_abs[c] > 0.0)
      order.push_back(static_cast<int>(c));

  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (rule == LimitedCutConfig::RankingRule::entry_order) {
      const double ea = path.entry_lambda[columns[a]], eb = path.entry_lambda[columns[b]];
      if (ea != eb) return ea > eb;  // earlier entry = larger lambda
    }
    if (max_abs[a] != max_abs[b]) return max_abs[a] > max_abs[b];
    return a < b;  // lower threshold index
  });
  std::vector<int> ranked(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = columns[order[i]];
  return ranked;
}

}  // namespace detail

struct BiniLassoResult {
  CutpointReport report;
  CoxFit fit;
  CvResult cv;
  CumulativeDesign design;
};

/// biniLasso: cumulative binarization + weighted L1 Cox path, lambda by
/// cross-validation; thresholds with nonzero coefficients are the cut-points.
inline BiniLassoResult fit_binilasso(const SurvivalDataset& ds, const GridConfig& grid_cfg = {},
                                     const FitConfig& fit_cfg = {}) {
  check_dataset(ds);
  BiniLassoResult out;
  auto grid = build_cut_grid(ds, grid_cfg.bins, grid_cfg.strategy,
                             grid_cfg.explicit_cuts ? &*grid_cfg.explicit_cuts : nullptr);
  out.design = cumulative_binarize(ds, grid, grid_cfg.include_boundary);
  const auto outcome = ds.outcome();
  const auto weights = detail::design_weights(out.design);

  out.cv = cross_validate(out.design.matrix, outcome, weights, SignConstraint::none,
                          detail::cv_options(fit_cfg));
  CoxProblem prob(out.design.matrix, outcome);
  PathOptions popts;
  popts.n_lambdas = fit_cfg.n_lambdas;
  popts.lambda_ratio = fit_cfg.lambda_ratio;
  auto path = fit_path(prob, weights, SignConstraint::none, popts, &out.cv.lambdas);
  const int idx = fit_cfg.use_1se ? out.cv.index_1se : out.cv.index_min;
  out.fit = path.fits[idx];

  out.report.method = "bini";
  out.report.lambda = out.fit.lambda;
  out.report.lambda_rule = fit_cfg.use_1se ? "1se" : "min";
  out.report.seed = fit_cfg.seed;
  out.report.grid_provenance = detail::grid_provenance_json(grid, grid_cfg, ds.feature_names);
  out.report.dropped_features = grid.dropped_features;
  detail::fill_report_features(out.report, out.design, out.fit.beta);
  return out;
}

struct MiniLassoResult {
  CutpointReport report;
  MiniLassoFit fit;
  CumulativeDesign design;
};

/// miniLasso: biniLasso's design routed through the univariate / leave-one-out
/// / non-negative lasso stage; reported effects are the composite effects.
inline MiniLassoResult fit_minilasso_pipeline(const SurvivalDataset& ds,
                                              const GridConfig& grid_cfg = {},
                                              const FitConfig& fit_cfg = {}) {
  check_dataset(ds);
  MiniLassoResult out;
  auto grid = build_cut_grid(ds, grid_cfg.bins, grid_cfg.strategy,
                             grid_cfg.explicit_cuts ? &*grid_cfg.explicit_cuts : nullptr);
  out.design = cumulative_binarize(ds, grid, grid_cfg.include_boundary);
  const auto outcome = ds.outcome();

  MiniLassoOptions opts;
  opts.loo = fit_cfg.loo;
  opts.cv = detail::cv_options(fit_cfg);
  opts.use_1se = fit_cfg.use_1se;
  opts.threads = fit_cfg.threads;
  out.fit = fit_minilasso(out.design.matrix, outcome, detail::design_weights(out.design), opts);

  out.report.method = "mini";
  out.report.lambda = out.fit.lambda;
  out.report.lambda_rule = fit_cfg.use_1se ? "1se" : "min";
  out.report.seed = fit_cfg.seed;
  out.report.grid_provenance = detail::grid_provenance_json(grid, grid_cfg, ds.feature_names);
  out.report.dropped_features = grid.dropped_features;
  detail::fill_report_features(out.report, out.design, out.fit.composite_effects);
  return out;
}

/// Two-step limited-cut-point procedure: per-predictor lasso paths rank each
/// predictor's thresholds, the top m per predictor survive, and one combined
/// lasso with CV reports the final (<= m per feature) cut-points.
inline CutpointReport limited_two_step(const SurvivalDataset& ds, const LimitedCutConfig& cfg,
                                       const GridConfig& grid_cfg = {}, const FitConfig& fit_cfg = {},
                                       Method method = Method::bini) {
  check_dataset(ds);
  if (cfg.m < 1) throw InvalidConfig("max cut-points m must be >= 1");
  auto grid = build_cut_grid(ds, grid_cfg.bins, grid_cfg.strategy,
                             grid_cfg.explicit_cuts ? &*grid_cfg.explicit_cuts : nullptr);
  auto design = cumulative_binarize(ds, grid, /*include_boundary=*/false);
  const auto outcome = ds.outcome();

  // Step 1: independent per-predictor paths over that predictor's columns.
  std::vector<std::vector<int>> feature_cols(ds.p());
  for (int k = 0; k < design.d(); ++k) feature_cols[design.column_meta[k].feature].push_back(k);

  std::vector<std::vector<int>> retained(ds.p());
  parallel_for(ds.p(), fit_cfg.threads, [&](std::size_t j) {
    if (feature_cols[j].empty()) return;
    ColumnSet sub;
    sub.n_rows = design.matrix.n_rows;
    for (int k : feature_cols[j]) sub.columns.push_back(design.matrix.columns[k]);
    PathOptions popts;
    popts.n_lambdas = fit_cfg.n_lambdas;
    popts.lambda_ratio = fit_cfg.lambda_ratio;
    auto path = fit_path(sub, outcome, PenaltyWeights::uniform(sub.cols()), SignConstraint::none,
                         popts);
    std::vector<int> local(sub.cols());
    std::iota(local.begin(), local.end(), 0);
    auto ranked = detail::rank_columns(path, local, cfg.ranking_rule);
    for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(cfg.m); ++r)
      retained[j].push_back(feature_cols[j][ranked[r]]);
  });

  std::vector<int> kept;
  for (const auto& cols : retained)
    for (int k : cols) kept.push_back(k);
  std::sort(kept.begin(), kept.end());

  CutpointReport report;
  report.method = to_string(method);
  report.lambda_rule = fit_cfg.use_1se ? "1se" : "min";
  report.seed = fit_cfg.seed;
  report.grid_provenance = detail::grid_provenance_json(grid, grid_cfg, ds.feature_names);
  report.dropped_features = grid.dropped_features;
  if (kept.empty()) return report;

  // Step 2: one combined model over the retained columns.
  CumulativeDesign combined;
  combined.matrix.n_rows = design.matrix.n_rows;
  combined.feature_names = design.feature_names;
  for (int k : kept) {
    combined.matrix.columns.push_back(design.matrix.columns[k]);
    combined.column_meta.push_back(design.column_meta[k]);
  }
  const auto weights = PenaltyWeights::uniform(combined.d());

  std::vector<double> effects(combined.d(), 0.0);
  double lambda_used = 0.0;
  if (method == Method::bini) {
    auto cv = cross_validate(combined.matrix, outcome, weights, SignConstraint::none,
                             detail::cv_options(fit_cfg));
    CoxProblem prob(combined.matrix, outcome);
    PathOptions popts;
    popts.n_lambdas = fit_cfg.n_lambdas;
    popts.lambda_ratio = fit_cfg.lambda_ratio;
    auto path = fit_path(prob, weights, SignConstraint::none, popts, &cv.lambdas);
    const int idx = fit_cfg.use_1se ? cv.index_1se : cv.index_min;
    effects = path.fits[idx].beta;
    lambda_used = cv.lambdas[idx];
  } else {
    MiniLassoOptions opts;
    opts.loo = fit_cfg.loo;
    opts.cv = detail::cv_options(fit_cfg);
    opts.use_1se = fit_cfg.use_1se;
    opts.threads = fit_cfg.threads;
    auto mini = fit_minilasso(combined.matrix, outcome, weights, opts);
    effects = mini.composite_effects;
    lambda_used = mini.lambda;
  }
  report.lambda = lambda_used;
  detail::fill_report_features(report, combined, effects);
  return report;
}

/// One-step variant for one or two competing predictors: a single global
/// path; the top m entrants per feature are read off the coefficient path.
/// Reported effects are the coefficients at the small end of the path.
inline CutpointReport limited_one_step(const SurvivalDataset& ds, const LimitedCutConfig& cfg,
                                       const GridConfig& grid_cfg = {}, const FitConfig& fit_cfg = {},
                                       Method method = Method::bini) {
  check_dataset(ds);
  if (cfg.m < 1) throw InvalidConfig("max cut-points m must be >= 1");
  if (ds.p() > 2)
    std::cerr << "binilasso: one-step limited selection is intended for p <= 2 (got p = " << ds.p()
              << "); consider the two-step mode\n";
  auto grid = build_cut_grid(ds, grid_cfg.bins, grid_cfg.strategy,
                             grid_cfg.explicit_cuts ? &*grid_cfg.explicit_cuts : nullptr);
  auto design = cumulative_binarize(ds, grid, /*include_boundary=*/false);
  const auto outcome = ds.outcome();
  const auto weights = PenaltyWeights::uniform(design.d());

  PathOptions popts;
  popts.n_lambdas = fit_cfg.n_lambdas;
  popts.lambda_ratio = fit_cfg.lambda_ratio;

  LassoPath path;
  // effect scale: 1 for bini coefficients, the univariate slope for mini
  // (whose path coefficients are the nonnegative theta)
  std::vector<double> effect_scale(design.d(), 1.0);
  if (method == Method::bini) {
    path = fit_path(design.matrix, outcome, weights, SignConstraint::none, popts);
  } else {
    auto uni = univariate_fits(design.matrix, outcome, fit_cfg.threads);
    auto loo = loo_predictors(design.matrix, outcome, fit_cfg.loo, uni, fit_cfg.threads);
    path = fit_path(loo.matrix, outcome, weights, SignConstraint::nonnegative, popts);
    for (int k = 0; k < design.d(); ++k) effect_scale[k] = uni.slopes[k];
  }

  std::vector<std::vector<int>> feature_cols(ds.p());
  for (int k = 0; k < design.d(); ++k) feature_cols[design.column_meta[k].feature].push_back(k);

  CutpointReport report;
  report.method = to_string(method);
  report.lambda = path.lambdas.back();
  report.lambda_rule = "path_end";
  report.seed = fit_cfg.seed;
  report.grid_provenance = detail::grid_provenance_json(grid, grid_cfg, ds.feature_names);
  report.dropped_features = grid.dropped_features;

  std::vector<double> selected_effects(design.d(), 0.0);
  for (int j = 0; j < ds.p(); ++j) {
    auto ranked = detail::rank_columns(path, feature_cols[j], cfg.ranking_rule);
    for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(cfg.m); ++r) {
      const int k = ranked[r];
      // a selected threshold whose path-end coefficient is zero still counts:
      // fall back to the largest coefficient it attained along the path
      double coef = path.fits.back().beta[k];
      if (coef == 0.0)
        for (const auto& f : path.fits)
          if (std::abs(f.beta[k]) > std::abs(coef)) coef = f.beta[k];
      selected_effects[k] = coef * effect_scale[k];
    }
  }
  detail::fill_report_features(report, design, selected_effects);
  return report;
}

struct ScreeningRow {
  int feature = 0;
  std::string name;
  double aic = 0.0;
  double ibs = 0.0;
  double slope = 0.0;
  bool degenerate = false;
};

struct ScreeningResult {
  std::vector<ScreeningRow> table;    // one row per feature, feature order
  std::vector<int> selected;          // union of top k by AIC and by IBS
};

/// Univariate continuous-covariate Cox screen: features ranked by AIC and by
/// in-sample IBS (ascending); the screened set is the union of the top k per
/// metric, so at most 2k features survive.
inline ScreeningResult screen_features(const SurvivalDataset& ds, int top_k_per_metric = 50,
                                       int threads = 1) {
  check_dataset(ds);
  if (top_k_per_metric < 1) throw InvalidConfig("top_k_per_metric must be >= 1");
  const auto outcome = ds.outcome();
  const auto grid = default_time_grid(outcome);
  const auto censor = censoring_km(outcome);

  ScreeningResult out;
  out.table.resize(ds.p());
  parallel_for(ds.p(), threads, [&](std::size_t j) {
    ScreeningRow row;
    row.feature = static_cast<int>(j);
    row.name = ds.feature_names[j];
    Eigen::MatrixXd xj = ds.features.col(j);
    const double spread = (xj.array() - xj.mean()).abs().maxCoeff();
    if (spread == 0.0) {
      row.degenerate = true;
      out.table[j] = row;
      return;
    }
    auto cols = ColumnSet::from_dense(xj);
    auto f = fit(cols, outcome, 0.0, PenaltyWeights::uniform(1));
    if (!f.converged || std::abs(f.beta[0]) > 50.0) {
      row.degenerate = true;
      out.table[j] = row;
      return;
    }
    row.slope = f.beta[0];
    row.aic = aic(f, outcome.n());
    std::vector<double> lp(outcome.n());
    for (int i = 0; i < outcome.n(); ++i) lp[i] = f.beta[0] * ds.features(i, j);
    auto bh = breslow_baseline_lp(lp, outcome);
    row.ibs = ibs(bh, lp, outcome, grid, &censor).value;
    out.table[j] = row;
  });

  auto rank_by = [&](auto key) {
    std::vector<int> idx;
    for (int j = 0; j < ds.p(); ++j)
      if (!out.table[j].degenerate) idx.push_back(j);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double ka = key(out.table[a]), kb = key(out.table[b]);
      if (ka != kb) return ka < kb;
      return out.table[a].name < out.table[b].name;  // deterministic tie order
    });
    if (static_cast<int>(idx.size()) > top_k_per_metric) idx.resize(top_k_per_metric);
    return idx;
  };
  auto top_aic = rank_by([](const ScreeningRow& r) { return r.aic; });
  auto top_ibs = rank_by([](const ScreeningRow& r) { return r.ibs; });
  std::vector<char> in_union(ds.p(), 0);
  for (int j : top_aic) in_union[j] = 1;
  for (int j : top_ibs) in_union[j] = 1;
  for (int j = 0; j < ds.p(); ++j)
    if (in_union[j]) out.selected.push_back(j);
  return out;
}

struct RefitResult {
  CoxFit fit;
  EvaluationBundle bundle;
  CumulativeDesign design;
};

/// Rebuilds cumulative indicators at exactly the reported thresholds and fits
/// an unpenalized Cox model, with AIC / IBS / C-index of that refit.
inline RefitResult refit_categorized(const SurvivalDataset& ds, const CutpointReport& report) {
  check_dataset(ds);
  if (report.total_cutpoints() == 0) throw EmptyReport();

  CutGrid grid;
  grid.strategy = GridStrategy::explicit_thresholds;
  grid.thresholds.resize(ds.p());
  for (const auto& fc : report.features) {
    if (fc.feature < 0 || fc.feature >= ds.p()) throw GridMismatch("report feature out of range");
    auto cuts = fc.thresholds;
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 1; k < cuts.size(); ++k)
      if (cuts[k] == cuts[k - 1])
        throw SingularRefit("feature " + fc.name + " repeats threshold " +
                            detail::format_full(cuts[k]));
    grid.thresholds[fc.feature] = std::move(cuts);
  }

  RefitResult out;
  out.design = cumulative_binarize(ds, grid);
  auto rank = design_rank_check(out.design);
  if (!rank.duplicate_column_groups.empty()) {
    std::string what = "thresholds with identical indicator columns:";
    for (int k : rank.duplicate_column_groups.front())
      what += " " + detail::format_full(out.design.column_meta[k].threshold);
    throw SingularRefit(what);
  }

  const auto outcome = ds.outcome();
  out.fit = fit(out.design.matrix, outcome, 0.0, PenaltyWeights::uniform(out.design.d()));

  std::vector<double> lp = out.design.matrix.multiply(out.fit.beta);
  out.bundle.aic = aic(out.fit, outcome.n());
  const auto grid_times = default_time_grid(outcome);
  const auto censor = censoring_km(outcome);
  auto bh = breslow_baseline_lp(lp, outcome);
  out.bundle.ibs = ibs(bh, lp, outcome, grid_times, &censor).value;
  out.bundle.c_index = c_index(lp, outcome);
  out.bundle.n_cutpoints = report.total_cutpoints();
  return out;
}

inline nlohmann::json report_to_json(const CutpointReport& report) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : report.features)
    features.push_back({{"name", f.name},
                        {"feature", f.feature},
                        {"thresholds", f.thresholds},
                        {"effects", f.effects}});
  return {{"method", report.method},
          {"lambda", report.lambda},
          {"lambda_rule", report.lambda_rule},
          {"features", features},
          {"grid", report.grid_provenance},
          {"seed", report.seed},
          {"dropped_features", report.dropped_features}};
}

inline CutpointReport report_from_json(const nlohmann::json& j) {
  CutpointReport report;
  report.method = j.at("method").get<std::string>();
  report.lambda = j.at("lambda").get<double>();
  report.lambda_rule = j.value("lambda_rule", "min");
  report.seed = j.value("seed", std::uint64_t(0));
  if (j.contains("grid")) report.grid_provenance = j.at("grid");
  if (j.contains("dropped_features"))
    report.dropped_features = j.at("dropped_features").get<std::vector<int>>();
  for (const auto& f : j.at("features")) {
    CutpointReport::FeatureCuts fc;
    fc.name = f.at("name").get<std::string>();
    fc.feature = f.at("feature").get<int>();
    fc.thresholds = f.at("thresholds").get<std::vector<double>>();
    fc.effects = f.at("effects").get<std::vector<double>>();
    report.features.push_back(std::move(fc));
  }
  return report;
}

}  // namespace binilasso
