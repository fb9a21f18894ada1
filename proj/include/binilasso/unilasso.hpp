#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "binilasso/cox.hpp"
#include "binilasso/design.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/parallel.hpp"
#include "binilasso/solver.hpp"

namespace binilasso {

enum class LooMethod { exact, one_step };

struct UnivariateFits {
  std::vector<double> slopes;            // 0 where degenerate
  std::vector<std::uint8_t> converged;
  std::vector<std::uint8_t> degenerate;  // constant column or monotone likelihood
  std::vector<int> events_with_indicator;
};

/// Leave-one-out linear predictors eta(-i) = slope(-i) * x. The matrix shares
/// the design's sparsity pattern (entries with x = 0 are exactly 0);
/// degenerate columns are all-zero.
struct LooPredictorMatrix {
  ColumnSet matrix;
  LooMethod method = LooMethod::exact;
  std::vector<std::uint8_t> column_degenerate;

  double entry(int row, int col) const {
    const auto& c = matrix.columns[col];
    const auto it = std::lower_bound(c.rows.begin(), c.rows.end(), row);
    if (it == c.rows.end() || *it != row) return 0.0;
    return c.value_at(it - c.rows.begin());
  }
};

struct MiniLassoFit {
  std::vector<double> theta;              // nonnegative second-stage coefficients
  std::vector<double> composite_effects;  // theta_k * univariate slope_k
  double lambda = 0.0;
  CoxFit stage_fit;                       // the nonnegative lasso fit behind theta
  UnivariateFits univariate;
  LooMethod loo_method = LooMethod::exact;
  CvResult cv;
};

struct MiniLassoOptions {
  LooMethod loo = LooMethod::exact;
  CvOptions cv;
  bool use_1se = false;
  int threads = 1;
};

namespace detail {

// Sufficient statistics of one binary indicator column for the univariate
// Breslow partial likelihood: per event group, the at-risk count and event
// count among rows with x = 1. Leave-one-out fits adjust these counts instead
// of rebuilding risk sets: deleting an x = 1 row decrements r1 over the
// prefix of groups the row was at risk for, and the group's event count when
// the row was an event. r0 is untouched by such deletions.
class BinaryColumnLikelihood {
 public:
  BinaryColumnLikelihood(const CoxIndex& index, const std::vector<std::int32_t>& positions)
      : index_(&index) {
    const int K = index.n_groups();
    r1_.assign(K, 0.0);
    e1_ = 0.0;
    int k = K - 1;
    double suffix = 0.0;
    std::size_t idx = positions.size();
    for (; k >= 0; --k) {
      while (idx > 0 && positions[idx - 1] >= index.group_start(k)) {
        --idx;
        suffix += 1.0;
      }
      r1_[k] = suffix;
    }
    for (const auto pos : positions)
      if (index.event_at(pos)) e1_ += 1.0;
  }

  struct Eval {
    double score;  // d nll / d b
    double curv;   // d^2 nll / d b^2
  };

  /// Score and curvature at slope b with an optional deleted row: del_groups
  /// = number of groups the deleted row was at risk for (0 = no deletion),
  /// del_event_group = its event group (-1 when censored). Deleted rows
  /// always have x = 1. Log-free: this is the hot loop of the exact
  /// leave-one-out refits.
  Eval evaluate(double b, int del_groups = 0, int del_event_group = -1) const {
    const int K = index_->n_groups();
    const double n = index_->n() - (del_groups > 0 ? 1.0 : 0.0);
    const double eb = std::exp(b);
    double e1 = e1_ - (del_event_group >= 0 ? 1.0 : 0.0);
    double sum_pi = 0.0, sum_curv = 0.0;
    for (int k = 0; k < K; ++k) {
      double d = index_->group_events(k);
      double r1 = r1_[k];
      const double r0 = (index_->n() - index_->group_start(k)) - r1;
      if (del_groups > k) r1 -= 1.0;
      if (del_event_group == k) d -= 1.0;
      if (d <= 0.0) continue;
      const double pi = r1 * eb / (r0 + r1 * eb);
      sum_pi += d * pi;
      sum_curv += d * pi * (1.0 - pi);
    }
    Eval out;
    out.score = -(e1 - sum_pi) / n;
    out.curv = sum_curv / n;
    return out;
  }

  /// Scaled negative log partial likelihood; only used by the safeguarded
  /// fallback, so the logs stay off the hot path.
  double nll(double b, int del_groups = 0, int del_event_group = -1) const {
    const int K = index_->n_groups();
    const double n = index_->n() - (del_groups > 0 ? 1.0 : 0.0);
    const double eb = std::exp(b);
    double e1 = e1_ - (del_event_group >= 0 ? 1.0 : 0.0);
    double sum_log = 0.0;
    for (int k = 0; k < K; ++k) {
      double d = index_->group_events(k);
      double r1 = r1_[k];
      const double r0 = (index_->n() - index_->group_start(k)) - r1;
      if (del_groups > k) r1 -= 1.0;
      if (del_event_group == k) d -= 1.0;
      if (d <= 0.0) continue;
      sum_log += d * std::log(r0 + r1 * eb);
    }
    return -(b * e1 - sum_log) / n;
  }

  double events_with_indicator() const { return e1_; }

 private:
  const CoxIndex* index_;
  std::vector<double> r1_;
  double e1_;
};

struct Newton1dResult {
  double slope = 0.0;
  bool converged = false;
  bool degenerate = false;
};

constexpr double kSlopeBox = 25.0;
constexpr double kDegenerateSlope = 20.0;

/// Safeguarded 1-D Newton on the univariate partial likelihood (objective
/// halving). Monotone likelihoods (separation) run into the slope box and are
/// flagged.
inline Newton1dResult newton_1d(const BinaryColumnLikelihood& lik, double b0, int del_groups = 0,
                                int del_event_group = -1, int max_iter = 50) {
  Newton1dResult out;
  double b = std::clamp(b0, -kSlopeBox, kSlopeBox);
  auto ev = lik.evaluate(b, del_groups, del_event_group);
  if (ev.curv <= 1e-12 && std::abs(ev.score) <= 1e-12) {
    // flat likelihood: constant column
    out.slope = 0.0;
    out.degenerate = true;
    return out;
  }
  double obj = lik.nll(b, del_groups, del_event_group);
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(ev.score) < 1e-10) {
      out.converged = true;
      break;
    }
    if (ev.curv <= 1e-14) break;
    double step = std::clamp(-ev.score / ev.curv, -4.0, 4.0);
    for (int half = 0; half < 40; ++half) {
      const double cand = std::clamp(b + step, -kSlopeBox, kSlopeBox);
      const double cand_obj = lik.nll(cand, del_groups, del_event_group);
      if (cand_obj <= obj + 1e-15 || half == 39) {
        b = cand;
        obj = cand_obj;
        ev = lik.evaluate(b, del_groups, del_event_group);
        break;
      }
      step *= 0.5;
    }
  }
  out.slope = b;
  if (!out.converged || std::abs(b) >= kDegenerateSlope) out.degenerate = true;
  return out;
}

/// Fast warm-started Newton for the leave-one-out refits: no objective
/// evaluations on the hot path, short iteration budget, safeguarded fallback
/// on the rare non-convergence.
inline double loo_newton(const BinaryColumnLikelihood& lik, double warm, int del_groups,
                         int del_event_group) {
  double b = warm;
  for (int it = 0; it < 10; ++it) {
    const auto ev = lik.evaluate(b, del_groups, del_event_group);
    if (std::abs(ev.score) < 1e-10) return b;
    if (ev.curv <= 1e-14) break;
    const double step = std::clamp(-ev.score / ev.curv, -4.0, 4.0);
    b = std::clamp(b + step, -kSlopeBox, kSlopeBox);
    if (std::abs(b) >= kSlopeBox) break;
  }
  if (std::abs(lik.evaluate(b, del_groups, del_event_group).score) < 1e-10) return b;
  return newton_1d(lik, warm, del_groups, del_event_group).slope;
}

inline void require_binary(const ColumnSet& X) {
  for (const auto& col : X.columns)
    if (!col.binary())
      throw InvalidConfig("univariate indicator fits require 0/1 design columns");
}

}  // namespace detail

/// Fits a univariate Cox model per indicator column by 1-D Newton
/// maximization of the Breslow partial likelihood. Degenerate columns
/// (constant, or monotone likelihood) are flagged and excluded downstream.
inline UnivariateFits univariate_fits(const ColumnSet& X, const Outcome& outcome, int threads = 1) {
  detail::require_binary(X);
  CoxProblem prob(X, outcome);
  const int d = prob.d();
  UnivariateFits out;
  out.slopes.assign(d, 0.0);
  out.converged.assign(d, 0);
  out.degenerate.assign(d, 0);
  out.events_with_indicator.assign(d, 0);

  parallel_for(d, threads, [&](std::size_t j) {
    const auto& col = prob.col(j);
    if (col.positions.empty() || static_cast<int>(col.positions.size()) == prob.n()) {
      out.degenerate[j] = 1;
      return;
    }
    detail::BinaryColumnLikelihood lik(prob.index(), col.positions);
    out.events_with_indicator[j] = static_cast<int>(lik.events_with_indicator());
    auto res = detail::newton_1d(lik, 0.0);
    out.converged[j] = res.converged;
    out.degenerate[j] = res.degenerate;
    out.slopes[j] = res.degenerate ? 0.0 : res.slope;
  });
  return out;
}

/// Leave-one-out univariate predictors. The exact method refits each
/// univariate model with the observation deleted (warm-started at the
/// full-data slope); one_step takes a single Newton step on the case-deleted
/// score. Only rows with x = 1 need refits: the predictor is slope * x.
inline LooPredictorMatrix loo_predictors(const ColumnSet& X, const Outcome& outcome,
                                         LooMethod method, const UnivariateFits& uni,
                                         int threads = 1) {
  detail::require_binary(X);
  CoxProblem prob(X, outcome);
  const int d = prob.d();
  LooPredictorMatrix out;
  out.method = method;
  out.matrix.n_rows = X.n_rows;
  out.matrix.columns.resize(d);
  out.column_degenerate.assign(uni.degenerate.begin(), uni.degenerate.end());

  parallel_for(d, threads, [&](std::size_t j) {
    if (uni.degenerate[j]) return;  // all-zero column
    const auto& col = prob.col(j);
    detail::BinaryColumnLikelihood lik(prob.index(), col.positions);
    const double b_full = uni.slopes[j];

    auto& loo_col = out.matrix.columns[j];
    loo_col.rows.resize(col.positions.size());
    loo_col.values.resize(col.positions.size());
    std::vector<std::pair<std::int32_t, double>> entries(col.positions.size());
    for (std::size_t k = 0; k < col.positions.size(); ++k) {
      const int pos = col.positions[k];
      const int del_groups = prob.index().groups_before(pos);
      const int del_event_group = prob.index().event_at(pos) ? del_groups - 1 : -1;
      double slope_loo;
      if (method == LooMethod::exact) {
        slope_loo = detail::loo_newton(lik, b_full, del_groups, del_event_group);
      } else {
        const auto ev = lik.evaluate(b_full, del_groups, del_event_group);
        const double step = ev.curv > 1e-14 ? std::clamp(-ev.score / ev.curv, -4.0, 4.0) : 0.0;
        slope_loo = std::clamp(b_full + step, -25.0, 25.0);
      }
      entries[k] = {static_cast<std::int32_t>(prob.index().order(pos)), slope_loo};
    }
    std::sort(entries.begin(), entries.end());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      loo_col.rows[k] = entries[k].first;
      loo_col.values[k] = entries[k].second;
    }
  });
  return out;
}

/// The sparsifying second stage: a non-negative lasso Cox fit over the
/// leave-one-out predictor columns (no standardization), lambda chosen by
/// cross-validation. Composite per-indicator effect is theta_k times the
/// full-data univariate slope, so selected effects keep their univariate
/// sign by construction.
inline MiniLassoFit fit_minilasso(const ColumnSet& X, const Outcome& outcome,
                                  const PenaltyWeights& weights, MiniLassoOptions opts = {}) {
  MiniLassoFit out;
  out.loo_method = opts.loo;
  out.univariate = univariate_fits(X, outcome, opts.threads);
  auto loo = loo_predictors(X, outcome, opts.loo, out.univariate, opts.threads);

  CvOptions cv_opts = opts.cv;
  cv_opts.threads = opts.threads;
  out.cv = cross_validate(loo.matrix, outcome, weights, SignConstraint::nonnegative, cv_opts);
  out.lambda = opts.use_1se ? out.cv.lambda_1se : out.cv.lambda_min;

  CoxProblem prob(loo.matrix, outcome);
  LassoPath path = fit_path(prob, weights, SignConstraint::nonnegative, opts.cv.path,
                            &out.cv.lambdas);
  const int idx = opts.use_1se ? out.cv.index_1se : out.cv.index_min;
  out.stage_fit = path.fits[idx];

  out.theta = out.stage_fit.beta;
  out.composite_effects.resize(out.theta.size());
  for (std::size_t k = 0; k < out.theta.size(); ++k)
    out.composite_effects[k] = out.theta[k] * out.univariate.slopes[k];
  return out;
}

}  // namespace binilasso
