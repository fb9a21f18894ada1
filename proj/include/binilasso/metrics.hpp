#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binilasso/cox.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/solver.hpp"
#include "binilasso/survival_data.hpp"

namespace binilasso {

struct EvaluationBundle {
  double aic = 0.0;
  double ibs = 0.0;
  double c_index = 0.0;
  int n_cutpoints = 0;
  double wall_time_seconds = 0.0;

  /// Ratios against a baseline bundle (relative AIC / IBS / C-index).
  EvaluationBundle relative_to(const EvaluationBundle& base) const {
    EvaluationBundle rel = *this;
    rel.aic = aic / base.aic;
    rel.ibs = ibs / base.ibs;
    rel.c_index = c_index / base.c_index;
    return rel;
  }
};

/// Timing lives in manifests, not in machine-readable results, so repeated
/// runs stay byte-identical; pass include_timing for human-facing dumps.
inline nlohmann::json bundle_to_json(const EvaluationBundle& b, bool include_timing = false) {
  nlohmann::json j{{"aic", b.aic},
                   {"ibs", b.ibs},
                   {"c_index", b.c_index},
                   {"n_cutpoints", b.n_cutpoints}};
  if (include_timing) j["wall_time_seconds"] = b.wall_time_seconds;
  return j;
}

inline std::string bundle_to_csv(const EvaluationBundle& b) {
  std::string out = "aic,ibs,c_index,n_cutpoints\n";
  out += detail::format_full(b.aic) + "," + detail::format_full(b.ibs) + "," +
         detail::format_full(b.c_index) + "," + std::to_string(b.n_cutpoints) + "\n";
  return out;
}

/// AIC of an unpenalized refit: 2k - 2 logPL with logPL = -n * nll and k the
/// number of refit coefficients.
inline double aic(const CoxFit& fit, int n) {
  if (fit.lambda > 0.0) throw PenalizedFitRejected(fit.lambda);
  const double log_pl = -double(n) * fit.nll_value;
  return 2.0 * static_cast<double>(fit.beta.size()) - 2.0 * log_pl;
}

/// Kaplan-Meier step estimate. With flip_events the roles of event and
/// censoring swap, giving the censoring-distribution estimate used by IPCW.
struct KaplanMeier {
  std::vector<double> times;  // step locations, increasing
  std::vector<double> surv;   // value from times[k] (inclusive) onward

  double at(double t) const {  // right-continuous
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[(it - times.begin()) - 1];
  }
  double at_left(double t) const {  // left limit
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[(it - times.begin()) - 1];
  }
};

inline KaplanMeier kaplan_meier(const Outcome& outcome, bool flip_events = false) {
  const int n = outcome.n();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return outcome.time[a] < outcome.time[b]; });
  KaplanMeier km;
  double surv = 1.0;
  int i = 0;
  while (i < n) {
    const double t = outcome.time[order[i]];
    int at_risk = n - i;
    int deaths = 0;
    while (i < n && outcome.time[order[i]] == t) {
      const bool ev = flip_events ? !outcome.event[order[i]] : outcome.event[order[i]] != 0;
      deaths += ev;
      ++i;
    }
    if (deaths > 0) {
      surv *= 1.0 - double(deaths) / at_risk;
      km.times.push_back(t);
      km.surv.push_back(surv);
    }
  }
  return km;
}

inline KaplanMeier censoring_km(const Outcome& outcome) { return kaplan_meier(outcome, true); }

/// Default IBS grid: 100 equally spaced points between the 5th and 95th
/// percentiles of the observed event times, away from the unstable tails.
inline std::vector<double> default_time_grid(const Outcome& outcome, int n_points = 100) {
  std::vector<double> event_times;
  for (int i = 0; i < outcome.n(); ++i)
    if (outcome.event[i]) event_times.push_back(outcome.time[i]);
  if (event_times.empty()) throw NoEvents();
  std::sort(event_times.begin(), event_times.end());
  const double lo = detail::sample_quantile_sorted(event_times, 0.05);
  const double hi = detail::sample_quantile_sorted(event_times, 0.95);
  if (!(hi > lo)) return {lo};
  std::vector<double> grid(n_points);
  for (int g = 0; g < n_points; ++g) grid[g] = lo + (hi - lo) * double(g) / (n_points - 1);
  return grid;
}

struct IbsResult {
  double value = 0.0;
  bool grid_truncated = false;
  double max_time_used = 0.0;
};

/// Censoring-weighted integrated Brier score over precomputed survival
/// curves: surv(i, g) = predicted S_i(grid[g]). Weights follow the standard
/// assignment: 1/G(T-) for subjects with an event by t, 1/G(t) for subjects
/// still at risk, 0 for subjects censored by t. If G reaches 0 inside the
/// grid the grid is truncated and flagged.
inline IbsResult ibs_curves(const Eigen::MatrixXd& surv, const Outcome& test,
                            const std::vector<double>& grid, const KaplanMeier& censor) {
  const int n = test.n();
  if (surv.rows() != n || surv.cols() < static_cast<int>(grid.size()))
    throw DimensionMismatch("survival curve matrix does not cover outcome x grid");

  IbsResult out;
  std::vector<double> bs;
  std::vector<double> used_grid;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid[g];
    const double gt = censor.at(t);
    if (gt <= 0.0) {
      out.grid_truncated = true;
      break;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = surv(i, g);
      if (test.time[i] <= t && test.event[i]) {
        const double gl = censor.at_left(test.time[i]);
        total += s * s / gl;
      } else if (test.time[i] > t) {
        total += (1.0 - s) * (1.0 - s) / gt;
      }
      // censored by t: weight 0
    }
    bs.push_back(total / n);
    used_grid.push_back(t);
  }
  if (bs.empty()) throw InvalidConfig("censoring distribution vanishes before the first grid point");
  out.max_time_used = used_grid.back();
  if (bs.size() == 1) {
    out.value = bs[0];
    return out;
  }
  double area = 0.0;
  for (std::size_t g = 1; g < bs.size(); ++g)
    area += 0.5 * (bs[g] + bs[g - 1]) * (used_grid[g] - used_grid[g - 1]);
  out.value = area / (used_grid.back() - used_grid.front());
  return out;
}

/// IBS of a Cox model: survival curves from the Breslow baseline and the
/// per-subject linear predictors. The censoring distribution defaults to the
/// reverse Kaplan-Meier of the evaluation outcome; pass the training-data
/// estimate explicitly when evaluating out of sample.
inline IbsResult ibs(const BaselineHazard& bh, const std::vector<double>& lp, const Outcome& test,
                     const std::vector<double>& grid, const KaplanMeier* censor = nullptr) {
  if (static_cast<int>(lp.size()) != test.n())
    throw DimensionMismatch("linear predictor length != outcome length");
  Eigen::MatrixXd surv(test.n(), grid.size());
  for (int i = 0; i < test.n(); ++i) {
    const auto s = predict_survival(bh, lp[i], grid);
    for (std::size_t g = 0; g < grid.size(); ++g) surv(i, g) = s[g];
  }
  const KaplanMeier km = censor ? *censor : censoring_km(test);
  return ibs_curves(surv, test, grid, km);
}

/// Harrell's concordance: among pairs whose earlier time is an event, the
/// fraction where the earlier-event subject has the higher risk score; score
/// ties count one half.
inline double c_index(const std::vector<double>& lp, const Outcome& outcome) {
  const int n = outcome.n();
  if (static_cast<int>(lp.size()) != n)
    throw DimensionMismatch("risk score length != outcome length");
  double usable = 0.0, concordant = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!outcome.event[i]) continue;
    for (int j = 0; j < n; ++j) {
      if (outcome.time[j] <= outcome.time[i]) continue;
      usable += 1.0;
      if (lp[i] > lp[j])
        concordant += 1.0;
      else if (lp[i] == lp[j])
        concordant += 0.5;
    }
  }
  if (usable == 0.0) throw NoComparablePairs();
  return concordant / usable;
}

struct CutpointMatch {
  int feature = 0;
  double truth = 0.0;
  std::optional<double> estimate;
  double signed_distance = 0.0;  // estimate - truth, when matched
};

struct CutpointAccuracy {
  std::vector<CutpointMatch> matches;  // one row per true cut-point
  int n_matched = 0;
  int n_missed = 0;
  int n_spurious = 0;
  double mean_abs_bias = 0.0;  // over matched pairs
};

/// Greedy nearest matching per feature, truths processed in index order so an
/// equidistant estimate goes to the lower-index truth. Unmatched truths are
/// missed, unmatched estimates spurious.
inline CutpointAccuracy cutpoint_accuracy(const std::vector<std::vector<double>>& truth,
                                          const std::vector<std::vector<double>>& estimates) {
  if (truth.size() != estimates.size())
    throw DimensionMismatch("truth and estimate feature counts differ");
  CutpointAccuracy acc;
  double abs_sum = 0.0;
  for (std::size_t f = 0; f < truth.size(); ++f) {
    std::vector<char> taken(estimates[f].size(), 0);
    for (double t : truth[f]) {
      int best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < estimates[f].size(); ++e) {
        if (taken[e]) continue;
        const double d = std::abs(estimates[f][e] - t);
        if (d < best_dist) {
          best_dist = d;
          best = static_cast<int>(e);
        }
      }
      CutpointMatch m;
      m.feature = static_cast<int>(f);
      m.truth = t;
      if (best >= 0) {
        taken[best] = 1;
        m.estimate = estimates[f][best];
        m.signed_distance = estimates[f][best] - t;
        abs_sum += std::abs(m.signed_distance);
        ++acc.n_matched;
      } else {
        ++acc.n_missed;
      }
      acc.matches.push_back(m);
    }
    for (std::size_t e = 0; e < estimates[f].size(); ++e)
      if (!taken[e]) ++acc.n_spurious;
  }
  acc.mean_abs_bias = acc.n_matched > 0 ? abs_sum / acc.n_matched : 0.0;
  return acc;
}

}  // namespace binilasso
