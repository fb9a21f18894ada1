#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binilasso/cox.hpp"
#include "binilasso/design.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/parallel.hpp"
#include "binilasso/rng.hpp"

namespace binilasso {

/// Per-coordinate penalty weights. Zero entries mark unpenalized coordinates
/// (boundary indicators); a weighted problem needs at least one positive one.
struct PenaltyWeights {
  std::vector<double> weights;

  static PenaltyWeights uniform(int d) { return {std::vector<double>(d, 1.0)}; }

  bool any_positive() const {
    return std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  }
  void check(int d) const {
    if (static_cast<int>(weights.size()) != d)
      throw DimensionMismatch("penalty weights length != number of columns");
    for (double w : weights)
      if (!(w >= 0.0)) throw InvalidConfig("penalty weights must be nonnegative");
  }
};

enum class SignConstraint { none, nonnegative };

struct FitOptions {
  // Convergence is declared when a full sweep moves no coefficient by more
  // than coef_tol, or when remaining moves are tiny (< flat_delta) while the
  // objective is machine-flat (< flat_obj relative decrease per sweep). The
  // flat clause exits the roundoff-scale wandering that near-collinear
  // nested columns produce; its threshold keeps the worst stationarity
  // violation near sqrt(2 h flat_obj) ~ 1e-8, well inside the KKT
  // certificate tolerance. A loose relative-objective rule alone (the 1e-7
  // that IRLS solvers use) stalls at ~1e-3 coefficient accuracy, far too
  // coarse for the certificates and the Newton agreement promised here.
  double coef_tol = 1e-9;
  double flat_delta = 1e-6;
  double flat_obj = 1e-16;
  int max_cycles = 10000;
  double step_cap = 5.0;  // per-coordinate trust cap on a single update
};

struct CoxFit {
  std::vector<double> beta;
  double lambda = 0.0;
  double nll_value = 0.0;
  double objective_value = 0.0;
  int n_iterations = 0;
  bool converged = false;
  std::vector<int> active_set;  // {k : beta_k != 0}
};

struct LassoPath {
  std::vector<double> lambdas;  // strictly decreasing
  std::vector<CoxFit> fits;
  // First lambda (scanning in decreasing order) at which each coordinate is
  // nonzero; NaN if it never enters.
  std::vector<double> entry_lambda;
};

struct PathOptions {
  int n_lambdas = 100;
  double lambda_ratio = 0.0;  // <= 0: 1e-2 when n > d, else 5e-2
  FitOptions fit;
};

struct CvResult {
  std::vector<double> lambdas;
  std::vector<double> mean_deviance;
  std::vector<double> sd_deviance;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  int index_min = 0;
  int index_1se = 0;
  std::vector<int> fold_of_row;
};

struct CvOptions {
  int n_folds = 10;
  std::uint64_t seed = 0;
  PathOptions path;
  std::vector<double> lambdas;  // reuse an existing sequence when nonempty
  int threads = 1;
};

/// A design/outcome pair prepared for coordinate descent: the Cox index plus
/// every column re-expressed in time-sorted positions. Construction is the
/// only O(nnz log nnz) step; all fitting passes are linear.
class CoxProblem {
 public:
  struct Col {
    std::vector<std::int32_t> positions;  // ascending time order
    std::vector<double> values;           // empty => binary
    double event_sum = 0.0;               // sum of values over event rows
  };

  CoxProblem(const ColumnSet& X, const Outcome& outcome, const std::vector<int>* subset = nullptr)
      : index_(outcome, subset), d_(X.cols()) {
    if (X.n_rows != outcome.n()) throw DimensionMismatch("design rows != outcome length");
    cols_.resize(d_);
    for (int j = 0; j < d_; ++j) {
      auto& col = cols_[j];
      detail::sort_column(index_, X.columns[j], col.positions, col.values);
      for (std::size_t k = 0; k < col.positions.size(); ++k)
        if (index_.event_at(col.positions[k]))
          col.event_sum += col.values.empty() ? 1.0 : col.values[k];
    }
    // cumulative binarized blocks are chains of nested indicator columns;
    // the Hessian assembly exploits that their pairwise intersections are
    // just the sparser column
    chain_start_.resize(d_);
    for (int j = 0; j < d_; ++j) {
      chain_start_[j] = j;
      if (j == 0) continue;
      const auto& prev = cols_[j - 1];
      const auto& cur = cols_[j];
      if (!prev.values.empty() || !cur.values.empty()) continue;
      if (cur.positions.size() > prev.positions.size()) continue;
      if (std::includes(prev.positions.begin(), prev.positions.end(), cur.positions.begin(),
                        cur.positions.end()))
        chain_start_[j] = chain_start_[j - 1];
    }
  }

  /// True when the intersection of (binary) columns a <= b equals column b.
  bool nested_pair(int a, int b) const { return chain_start_[b] <= a; }

  const CoxIndex& index() const { return index_; }
  const Col& col(int j) const { return cols_[j]; }
  int d() const { return d_; }
  int n() const { return index_.n(); }

  /// Linear predictor in sorted-position space for a given beta.
  std::vector<double> sorted_f(const std::vector<double>& beta) const {
    std::vector<double> f(index_.n(), 0.0);
    for (int j = 0; j < d_; ++j) {
      if (beta[j] == 0.0) continue;
      const auto& c = cols_[j];
      for (std::size_t k = 0; k < c.positions.size(); ++k)
        f[c.positions[k]] += beta[j] * (c.values.empty() ? 1.0 : c.values[k]);
    }
    return f;
  }

 private:
  CoxIndex index_;
  int d_;
  std::vector<Col> cols_;
  std::vector<int> chain_start_;
};

namespace detail {

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

class CdEngine {
 public:
  CdEngine(const CoxProblem& prob, double lambda, const PenaltyWeights& w,
           SignConstraint constraint, const FitOptions& opts)
      : prob_(prob),
        lambda_(lambda),
        w_(w.weights),
        constraint_(constraint),
        opts_(opts),
        state_(prob.index()),
        beta_(prob.d(), 0.0) {}

  void warm_start(const std::vector<double>& beta) {
    beta_ = beta;
    state_.set_f(prob_.sorted_f(beta_));
  }

  /// One pass over the given coordinates; returns max |delta beta|.
  double sweep(const std::vector<int>& coords) {
    double max_delta = 0.0;
    for (int j : coords) max_delta = std::max(max_delta, update(j));
    return max_delta;
  }

  double update(int j) {
    const auto& col = prob_.col(j);
    if (col.positions.empty()) return 0.0;
    const auto gc = column_grad_curv(prob_.index(), state_, col.positions, col.values);
    if (gc.curv <= 1e-12) return 0.0;  // no information along this coordinate
    const double z = gc.curv * beta_[j] - gc.grad;
    const double pen = lambda_ * w_[j];
    double target = constraint_ == SignConstraint::nonnegative
                        ? std::max(0.0, z - pen) / gc.curv
                        : soft_threshold(z, pen) / gc.curv;
    double delta = target - beta_[j];
    if (delta == 0.0) return 0.0;
    delta = std::clamp(delta, -opts_.step_cap, opts_.step_cap);
    state_.add_scaled(col.positions, col.values, delta);
    beta_[j] += delta;
    return std::abs(delta);
  }

  double objective() const {
    double pen = 0.0;
    for (int j = 0; j < prob_.d(); ++j) pen += w_[j] * std::abs(beta_[j]);
    return state_.nll() + lambda_ * pen;
  }

  std::vector<int> active_coords() const {
    std::vector<int> coords;
    for (int j = 0; j < prob_.d(); ++j)
      if (beta_[j] != 0.0 || w_[j] == 0.0) coords.push_back(j);
    return coords;
  }

  const std::vector<double>& beta() const { return beta_; }
  double nll() const { return state_.nll(); }

  /// Newton acceleration on the current support. Cyclic descent is exact but
  /// slow on the strongly correlated nested columns, so between sweeps we
  /// solve the smooth orthant-restricted problem on the active set with its
  /// exact Hessian and take a safeguarded step. Convergence is still declared
  /// only by a full coordinate sweep, so certificates are unaffected.
  bool newton_step(const std::vector<int>& candidates) {
    // the smooth orthant system covers the current support only; zero
    // penalized coordinates re-enter through coordinate sweeps
    std::vector<int> active;
    for (int j : candidates)
      if (beta_[j] != 0.0 || w_[j] == 0.0) active.push_back(j);
    const int a = static_cast<int>(active.size());
    if (a == 0 || a > 600) return false;
    const auto& index = prob_.index();
    const int K = index.n_groups();
    const double n = index.n();

    // per-column risk-set partial sums m1[j][k] = sum over the column's rows
    // in risk set k of value * exp(f), plus the weighted diagonal sums
    // q[j] = sum over the column's rows of value^2 exp(f) A
    Eigen::MatrixXd m1(a, K);
    Eigen::VectorXd q(a);
    for (int c = 0; c < a; ++c) {
      const auto& col = prob_.col(active[c]);
      double suffix = 0.0;
      double qa = 0.0;
      std::size_t idx = col.positions.size();
      for (int k = K - 1; k >= 0; --k) {
        const int start = index.group_start(k);
        while (idx > 0 && col.positions[idx - 1] >= start) {
          --idx;
          const int pos = col.positions[idx];
          const double v = col.values.empty() ? 1.0 : col.values[idx];
          const double ve = v * state_.expf_at(pos);
          suffix += ve;
          qa += v * ve * state_.cum_a(index.groups_before(pos));
        }
        m1(c, k) = suffix;
      }
      q[c] = qa;
    }

    Eigen::VectorXd w1(K), w2(K);
    for (int k = 0; k < K; ++k) {
      const double d = index.group_events(k);
      const double s = state_.denom(k);
      w1[k] = d / s;
      w2[k] = d / (s * s);
    }

    Eigen::VectorXd grad(a);
    for (int c = 0; c < a; ++c)
      grad[c] = -(prob_.col(active[c]).event_sum - m1.row(c).dot(w1)) / n;

    Eigen::MatrixXd hess = m1 * w2.asDiagonal() * m1.transpose();
    for (int cj = 0; cj < a; ++cj) {
      const auto& colj = prob_.col(active[cj]);
      for (int cl = cj; cl < a; ++cl) {
        // sum over shared rows of v_j v_l exp(f) A; for a nested pair this is
        // exactly the sparser column's q
        double cross;
        if (cl == cj || prob_.nested_pair(active[cj], active[cl])) {
          cross = q[cl];
        } else {
          const auto& coll = prob_.col(active[cl]);
          cross = 0.0;
          std::size_t pj = 0, pl = 0;
          while (pj < colj.positions.size() && pl < coll.positions.size()) {
            if (colj.positions[pj] < coll.positions[pl]) {
              ++pj;
            } else if (colj.positions[pj] > coll.positions[pl]) {
              ++pl;
            } else {
              const int pos = colj.positions[pj];
              const double vj = colj.values.empty() ? 1.0 : colj.values[pj];
              const double vl = coll.values.empty() ? 1.0 : coll.values[pl];
              cross += vj * vl * state_.expf_at(pos) * state_.cum_a(index.groups_before(pos));
              ++pj;
              ++pl;
            }
          }
        }
        const double h = (cross - hess(cj, cl)) / n;
        hess(cj, cl) = h;
        hess(cl, cj) = h;
      }
    }

    Eigen::VectorXd rhs(a);
    for (int c = 0; c < a; ++c) {
      const int j = active[c];
      double sign_term = 0.0;
      if (beta_[j] != 0.0)
        sign_term = constraint_ == SignConstraint::nonnegative ? 1.0 : (beta_[j] > 0 ? 1.0 : -1.0);
      rhs[c] = -(grad[c] + lambda_ * w_[j] * sign_term);
    }
    const double ridge = 1e-12 * (1.0 + hess.trace() / a);
    hess.diagonal().array() += ridge;
    auto ldlt = hess.ldlt();
    Eigen::VectorXd dir = ldlt.solve(rhs);
    dir += ldlt.solve(rhs - hess * dir);  // one refinement pass; the nested
                                          // columns make this system very
                                          // ill-conditioned
    if (!dir.allFinite() || dir.lpNorm<Eigen::Infinity>() < opts_.coef_tol) return false;
    for (int c = 0; c < a; ++c)
      if (beta_[active[c]] == 0.0 && constraint_ == SignConstraint::nonnegative && dir[c] < 0.0)
        dir[c] = 0.0;

    // backtracking with orthant projection: coordinates whose sign would flip
    // are set exactly to zero, so support shrinkage happens inside the step
    const double base_obj = objective();
    const auto base = state_.snapshot();
    const auto base_beta = beta_;
    double t = 1.0;
    for (int half = 0; half < 14; ++half) {
      for (int c = 0; c < a; ++c) {
        const int j = active[c];
        if (dir[c] == 0.0) continue;
        double target = base_beta[j] + t * dir[c];
        if (base_beta[j] != 0.0 && target * base_beta[j] < 0.0) target = 0.0;
        const double delta = target - beta_[j];
        if (delta == 0.0) continue;
        const auto& col = prob_.col(j);
        state_.touch(col.positions, col.values, delta);
        beta_[j] = target;
      }
      state_.refresh();
      if (objective() < base_obj - 1e-14 * (1.0 + std::abs(base_obj))) return true;
      state_.restore(base);
      beta_ = base_beta;
      t *= 0.5;
    }
    return false;
  }

  /// Full coordinate-descent drive: one full sweep, then active-set sweeps
  /// (with Newton acceleration) to convergence, then another full sweep to
  /// admit violators; repeat until a full sweep moves nothing.
  CoxFit solve(const std::vector<int>& full_order) {
    int cycles = 0;
    bool converged = false;
    double best_obj = objective();
    std::vector<double> best_beta = beta_;
    double best_nll = state_.nll();

    auto note_best = [&](double obj) {
      if (obj < best_obj) {
        best_obj = obj;
        best_beta = beta_;
        best_nll = state_.nll();
      }
    };

    auto quiesced = [&](double delta, double prev_obj, double obj) {
      if (delta < opts_.coef_tol) return true;
      return delta < opts_.flat_delta &&
             prev_obj - obj < opts_.flat_obj * std::max(1.0, std::abs(prev_obj));
    };

    double prev_obj = best_obj;
    while (cycles < opts_.max_cycles) {
      const double full_delta = sweep(full_order);
      ++cycles;
      double obj = objective();
      note_best(obj);
      if (quiesced(full_delta, prev_obj, obj)) {
        converged = true;
        break;
      }
      prev_obj = obj;
      newton_futile_below_ = 0.0;
      auto active = active_coords();
      while (cycles < opts_.max_cycles) {
        const double delta = sweep(active);
        ++cycles;
        obj = objective();
        note_best(obj);
        const bool done = quiesced(delta, prev_obj, obj);
        prev_obj = obj;
        if (done) break;
        // when Newton last produced nothing at this residual scale, let the
        // sweeps work instead of rebuilding the Hessian every cycle
        if (delta > 10.0 * opts_.coef_tol && delta > newton_futile_below_) {
          if (newton_step(active)) {
            newton_futile_below_ = 0.0;
            prev_obj = objective();
            note_best(prev_obj);
          } else {
            newton_futile_below_ = delta;
          }
        }
        // admit coordinates the sweep itself activated
        auto now_active = active_coords();
        if (now_active.size() != active.size()) active = std::move(now_active);
      }
    }

    CoxFit fit;
    fit.lambda = lambda_;
    fit.n_iterations = cycles;
    fit.converged = converged;
    if (converged) {
      fit.beta = beta_;
      fit.nll_value = state_.nll();
      fit.objective_value = objective();
    } else {
      fit.beta = best_beta;  // best iterate under the cycle cap
      fit.nll_value = best_nll;
      fit.objective_value = best_obj;
    }
    for (int j = 0; j < prob_.d(); ++j)
      if (fit.beta[j] != 0.0) fit.active_set.push_back(j);
    return fit;
  }

 private:
  const CoxProblem& prob_;
  double lambda_;
  const std::vector<double>& w_;
  SignConstraint constraint_;
  FitOptions opts_;
  CoxState state_;
  std::vector<double> beta_;
  double newton_futile_below_ = 0.0;
};

/// Optimum over the unpenalized coordinates with everything else held at 0.
inline std::vector<double> fit_unpenalized_subset(const CoxProblem& prob,
                                                  const PenaltyWeights& w,
                                                  SignConstraint constraint,
                                                  const FitOptions& opts) {
  std::vector<int> coords;
  for (int j = 0; j < prob.d(); ++j)
    if (w.weights[j] == 0.0) coords.push_back(j);
  std::vector<double> beta(prob.d(), 0.0);
  if (coords.empty()) return beta;
  CdEngine engine(prob, 0.0, w, constraint, opts);
  for (int cycle = 0; cycle < opts.max_cycles; ++cycle)
    if (engine.sweep(coords) < opts.coef_tol) break;
  return engine.beta();
}

}  // namespace detail

/// Smallest lambda at which every penalized coordinate is zero at the
/// optimum: max over penalized k of |gradient_k| / w_k, with the gradient
/// taken at the unpenalized coordinates' optimum (beta = 0 when there are
/// none).
inline double lambda_max(const CoxProblem& prob, const PenaltyWeights& weights,
                         SignConstraint constraint = SignConstraint::none,
                         std::vector<double>* base_beta_out = nullptr,
                         const FitOptions& opts = {}) {
  weights.check(prob.d());
  if (!weights.any_positive()) throw AllWeightsZero();

  std::vector<double> beta = detail::fit_unpenalized_subset(prob, weights, constraint, opts);
  CoxState state(prob.index());
  state.set_f(prob.sorted_f(beta));
  double lam = 0.0;
  for (int j = 0; j < prob.d(); ++j) {
    if (weights.weights[j] <= 0.0) continue;
    const auto& col = prob.col(j);
    const double g = column_grad_curv(prob.index(), state, col.positions, col.values).grad;
    lam = std::max(lam, std::abs(g) / weights.weights[j]);
  }
  if (base_beta_out) *base_beta_out = std::move(beta);
  return lam;
}

inline double lambda_max(const ColumnSet& X, const Outcome& outcome, const PenaltyWeights& weights,
                         SignConstraint constraint = SignConstraint::none) {
  CoxProblem prob(X, outcome);
  return lambda_max(prob, weights, constraint);
}

/// Weighted L1-penalized Cox fit by cyclic coordinate descent on the exact
/// per-coordinate quadratic model (score + diagonal curvature), with
/// soft-thresholding, a fixed feature-major update order, and the active-set
/// strategy. Nonnegative mode clamps at zero exactly.
inline CoxFit fit(const CoxProblem& prob, double lambda, const PenaltyWeights& weights,
                  SignConstraint constraint = SignConstraint::none,
                  const std::vector<double>* warm_start = nullptr, const FitOptions& opts = {}) {
  weights.check(prob.d());
  if (lambda < 0.0) throw InvalidConfig("lambda must be nonnegative");
  if (lambda > 0.0 && !weights.any_positive()) throw AllWeightsZero();
  if (warm_start && static_cast<int>(warm_start->size()) != prob.d())
    throw DimensionMismatch("warm start length != number of columns");

  detail::CdEngine engine(prob, lambda, weights, constraint, opts);
  if (warm_start) engine.warm_start(*warm_start);
  std::vector<int> order(prob.d());
  std::iota(order.begin(), order.end(), 0);
  return engine.solve(order);
}

inline CoxFit fit(const ColumnSet& X, const Outcome& outcome, double lambda,
                  const PenaltyWeights& weights, SignConstraint constraint = SignConstraint::none,
                  const std::vector<double>* warm_start = nullptr, const FitOptions& opts = {}) {
  CoxProblem prob(X, outcome);
  return fit(prob, lambda, weights, constraint, warm_start, opts);
}

inline std::vector<double> make_lambda_sequence(double lam_max, int n_lambdas, double ratio) {
  if (n_lambdas < 2) throw InvalidConfig("n_lambdas must be >= 2");
  lam_max = std::max(lam_max, 1e-10);
  std::vector<double> lambdas(n_lambdas);
  const double log_max = std::log(lam_max);
  const double log_min = std::log(lam_max * ratio);
  for (int i = 0; i < n_lambdas; ++i)
    lambdas[i] = std::exp(log_max + (log_min - log_max) * double(i) / (n_lambdas - 1));
  return lambdas;
}

/// Log-spaced path from lambda_max down to ratio * lambda_max, each fit
/// warm-started from the previous one.
inline LassoPath fit_path(const CoxProblem& prob, const PenaltyWeights& weights,
                          SignConstraint constraint = SignConstraint::none,
                          PathOptions opts = {}, const std::vector<double>* lambdas_in = nullptr) {
  weights.check(prob.d());
  LassoPath path;
  std::vector<double> warm;
  if (lambdas_in && !lambdas_in->empty()) {
    path.lambdas = *lambdas_in;
    warm = detail::fit_unpenalized_subset(prob, weights, constraint, opts.fit);
  } else {
    double ratio = opts.lambda_ratio;
    if (ratio <= 0.0) ratio = prob.n() > prob.d() ? 1e-2 : 5e-2;
    const double lam_max = lambda_max(prob, weights, constraint, &warm, opts.fit);
    path.lambdas = make_lambda_sequence(lam_max, opts.n_lambdas, ratio);
  }

  path.fits.reserve(path.lambdas.size());
  for (double lam : path.lambdas) {
    CoxFit f = fit(prob, lam, weights, constraint, &warm, opts.fit);
    warm = f.beta;
    path.fits.push_back(std::move(f));
  }

  path.entry_lambda.assign(prob.d(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < path.fits.size(); ++i)
    for (int j : path.fits[i].active_set)
      if (std::isnan(path.entry_lambda[j])) path.entry_lambda[j] = path.lambdas[i];
  return path;
}

inline LassoPath fit_path(const ColumnSet& X, const Outcome& outcome, const PenaltyWeights& weights,
                          SignConstraint constraint = SignConstraint::none, PathOptions opts = {}) {
  CoxProblem prob(X, outcome);
  return fit_path(prob, weights, constraint, opts);
}

/// Event-stratified fold assignment: events and censored observations are
/// shuffled separately and dealt round-robin, so every fold sees events
/// whenever n_events >= n_folds.
inline std::vector<int> stratified_folds(const Outcome& outcome, int n_folds, std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x5afe5eedULL));
  std::vector<int> events, censored;
  for (int i = 0; i < outcome.n(); ++i) (outcome.event[i] ? events : censored).push_back(i);
  auto shuffle = [&rng](std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.uniform_below(i)]);
  };
  shuffle(events);
  shuffle(censored);
  std::vector<int> fold(outcome.n(), 0);
  for (std::size_t k = 0; k < events.size(); ++k) fold[events[k]] = static_cast<int>(k % n_folds);
  for (std::size_t k = 0; k < censored.size(); ++k)
    fold[censored[k]] = static_cast<int>(k % n_folds);
  return fold;
}

/// 10-fold style cross-validation with the cross-validated partial-likelihood
/// deviance: for each fold, 2 * (n_full * nll_full(beta) - n_train *
/// nll_train(beta)) evaluated at the train-only fit, which isolates the
/// held-out contribution without refitting risk sets per subject.
inline CvResult cross_validate(const ColumnSet& X, const Outcome& outcome,
                               const PenaltyWeights& weights,
                               SignConstraint constraint = SignConstraint::none,
                               CvOptions opts = {}) {
  weights.check(X.cols());
  if (opts.n_folds < 2) throw InvalidConfig("n_folds must be >= 2");

  CvResult cv;
  cv.fold_of_row = stratified_folds(outcome, opts.n_folds, opts.seed);
  std::vector<int> fold_events(opts.n_folds, 0);
  for (int i = 0; i < outcome.n(); ++i)
    if (outcome.event[i]) ++fold_events[cv.fold_of_row[i]];
  for (int k = 0; k < opts.n_folds; ++k)
    if (fold_events[k] == 0) throw FoldWithoutEvents(k);

  CoxProblem full_prob(X, outcome);
  if (!opts.lambdas.empty()) {
    cv.lambdas = opts.lambdas;
  } else {
    double ratio = opts.path.lambda_ratio;
    if (ratio <= 0.0) ratio = full_prob.n() > full_prob.d() ? 1e-2 : 5e-2;
    const double lam_max = lambda_max(full_prob, weights, constraint);
    cv.lambdas = make_lambda_sequence(lam_max, opts.path.n_lambdas, ratio);
  }
  const int L = static_cast<int>(cv.lambdas.size());

  const CoxIndex full_index(outcome);
  std::vector<std::vector<double>> fold_dev(opts.n_folds, std::vector<double>(L, 0.0));

  parallel_for(opts.n_folds, opts.threads, [&](std::size_t k) {
    std::vector<int> train_rows;
    for (int i = 0; i < outcome.n(); ++i)
      if (cv.fold_of_row[i] != static_cast<int>(k)) train_rows.push_back(i);
    CoxProblem train_prob(X, outcome, &train_rows);
    PathOptions popts = opts.path;
    LassoPath path = fit_path(train_prob, weights, constraint, popts, &cv.lambdas);
    for (int l = 0; l < L; ++l) {
      const auto& beta = path.fits[l].beta;
      const double nll_full = cox_nll(full_index, X.multiply(beta));
      const double nll_train = path.fits[l].nll_value;
      fold_dev[k][l] =
          2.0 * (full_index.n() * nll_full - train_prob.n() * nll_train);
    }
  });

  cv.mean_deviance.resize(L);
  cv.sd_deviance.resize(L);
  for (int l = 0; l < L; ++l) {
    double mean = 0.0;
    for (int k = 0; k < opts.n_folds; ++k) mean += fold_dev[k][l];
    mean /= opts.n_folds;
    double ss = 0.0;
    for (int k = 0; k < opts.n_folds; ++k) ss += (fold_dev[k][l] - mean) * (fold_dev[k][l] - mean);
    cv.mean_deviance[l] = mean;
    cv.sd_deviance[l] = opts.n_folds > 1 ? std::sqrt(ss / (opts.n_folds - 1)) : 0.0;
  }

  cv.index_min = 0;
  for (int l = 1; l < L; ++l)
    if (cv.mean_deviance[l] < cv.mean_deviance[cv.index_min]) cv.index_min = l;
  cv.lambda_min = cv.lambdas[cv.index_min];

  const double bar = cv.mean_deviance[cv.index_min] + cv.sd_deviance[cv.index_min];
  cv.index_1se = cv.index_min;
  for (int l = 0; l <= cv.index_min; ++l) {
    if (cv.mean_deviance[l] <= bar) {
      cv.index_1se = l;
      break;
    }
  }
  cv.lambda_1se = cv.lambdas[cv.index_1se];
  return cv;
}

struct KktCertificate {
  bool pass = false;
  double tol = 0.0;
  double worst_violation = 0.0;
  int worst_index = -1;
};

/// Stationarity certificate for a fit: |g_k| <= lambda w_k + tol at zero
/// coordinates, g_k = -sign(beta_k) lambda w_k within tol at nonzero ones
/// (one-sided at zero in nonnegative mode).
inline KktCertificate kkt_check(const CoxFit& fit, const ColumnSet& X, const Outcome& outcome,
                                const PenaltyWeights& weights,
                                SignConstraint constraint = SignConstraint::none) {
  weights.check(X.cols());
  auto grad = nll_gradient(X, fit.beta, outcome);
  KktCertificate cert;
  const double wmax = *std::max_element(weights.weights.begin(), weights.weights.end());
  cert.tol = 1e-4 * fit.lambda * wmax + 1e-8;
  for (int j = 0; j < X.cols(); ++j) {
    const double pen = fit.lambda * weights.weights[j];
    double violation = 0.0;
    if (fit.beta[j] == 0.0) {
      violation = constraint == SignConstraint::nonnegative ? std::max(0.0, -grad[j] - pen)
                                                            : std::max(0.0, std::abs(grad[j]) - pen);
    } else {
      violation = std::abs(grad[j] + (constraint == SignConstraint::nonnegative
                                          ? pen
                                          : (fit.beta[j] > 0 ? pen : -pen)));
    }
    if (violation > cert.worst_violation) {
      cert.worst_violation = violation;
      cert.worst_index = j;
    }
  }
  cert.pass = cert.worst_violation <= cert.tol;
  return cert;
}

inline nlohmann::json path_to_json(const LassoPath& path) {
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : path.fits) {
    nlohmann::json nz = nlohmann::json::object();
    for (int j : f.active_set) nz[std::to_string(j)] = f.beta[j];
    fits.push_back({{"lambda", f.lambda},
                    {"nll", f.nll_value},
                    {"objective", f.objective_value},
                    {"converged", f.converged},
                    {"nonzero", nz}});
  }
  return {{"lambdas", path.lambdas}, {"fits", fits}};
}

inline nlohmann::json cv_to_json(const CvResult& cv) {
  return {{"lambdas", cv.lambdas},
          {"mean_deviance", cv.mean_deviance},
          {"sd_deviance", cv.sd_deviance},
          {"lambda_min", cv.lambda_min},
          {"lambda_1se", cv.lambda_1se}};
}

}  // namespace binilasso
