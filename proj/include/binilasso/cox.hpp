#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "binilasso/design.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/survival_data.hpp"

namespace binilasso {

/// Time-sorted view of a right-censored outcome: the event order, the
/// distinct event times (Breslow tie groups), and per-row risk-set lookups.
/// All risk-set sums downstream run in O(n) per pass over this index.
///
/// Positions are indices into the ascending-time sort. Risk set of event
/// group k is the suffix [group_start[k], n). groups_before[s] is the number
/// of event groups with group time <= time at position s, so the cumulative
/// quantities a row participates in are prefix sums up to groups_before.
class CoxIndex {
 public:
  CoxIndex(const Outcome& outcome, const std::vector<int>* subset = nullptr) {
    n_total_ = outcome.n();
    std::vector<int> rows;
    if (subset) {
      rows = *subset;
    } else {
      rows.resize(n_total_);
      std::iota(rows.begin(), rows.end(), 0);
    }
    n_ = static_cast<int>(rows.size());
    order_.assign(rows.begin(), rows.end());
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return outcome.time[a] < outcome.time[b]; });

    time_.resize(n_);
    event_.resize(n_);
    pos_of_row_.assign(n_total_, -1);
    n_events_ = 0;
    for (int s = 0; s < n_; ++s) {
      const int r = order_[s];
      time_[s] = outcome.time[r];
      event_[s] = outcome.event[r];
      pos_of_row_[r] = s;
      n_events_ += event_[s];
    }
    if (n_events_ == 0) throw NoEvents();

    // Distinct event times and tied-event counts.
    for (int s = 0; s < n_; ++s) {
      if (!event_[s]) continue;
      if (group_time_.empty() || group_time_.back() != time_[s]) {
        group_time_.push_back(time_[s]);
        group_start_.push_back(std::lower_bound(time_.begin(), time_.end(), time_[s]) -
                               time_.begin());
        group_events_.push_back(0.0);
      }
      group_events_.back() += 1.0;
    }
    K_ = static_cast<int>(group_time_.size());

    groups_before_.resize(n_);
    int k = 0;
    for (int s = 0; s < n_; ++s) {
      while (k < K_ && group_time_[k] <= time_[s]) ++k;
      groups_before_[s] = k;
    }
  }

  int n() const { return n_; }
  int n_total() const { return n_total_; }
  int n_events() const { return n_events_; }
  int n_groups() const { return K_; }
  int order(int pos) const { return order_[pos]; }
  int pos_of_row(int row) const { return pos_of_row_[row]; }
  double time_at(int pos) const { return time_[pos]; }
  bool event_at(int pos) const { return event_[pos] != 0; }
  int group_start(int k) const { return group_start_[k]; }
  double group_events(int k) const { return group_events_[k]; }
  double group_time(int k) const { return group_time_[k]; }
  int groups_before(int pos) const { return groups_before_[pos]; }

 private:
  int n_ = 0, n_total_ = 0, K_ = 0, n_events_ = 0;
  std::vector<int> order_;
  std::vector<int> pos_of_row_;
  std::vector<double> time_;
  std::vector<std::uint8_t> event_;
  std::vector<double> group_time_;
  std::vector<int> group_start_;
  std::vector<double> group_events_;
  std::vector<int> groups_before_;
};

/// Evaluation state of the partial likelihood at a given linear predictor.
/// Holds the risk-set denominators and the two cumulative-hazard-style
/// prefix arrays that gradient and curvature reads index into.
///
/// Linear predictors are centered before exponentiation (translation
/// invariance of the partial likelihood makes this exact, not approximate).
/// Coordinate updates on indicator columns multiply the affected exp(f)
/// entries by a single exp(delta); f itself is the exact source of truth and
/// exp(f) is recomputed from it periodically to bound multiplicative drift.
class CoxState {
 public:
  explicit CoxState(const CoxIndex& index) : index_(&index) {
    const int n = index.n();
    f_.assign(n, 0.0);
    expf_.assign(n, 1.0);
    denom_.resize(index.n_groups());
    cum_a_.resize(index.n_groups() + 1);
    cum_b_.resize(index.n_groups() + 1);
    center_ = 0.0;
    refresh_denoms();
  }

  /// f given in sorted-position order.
  void set_f(const std::vector<double>& f_sorted) {
    f_ = f_sorted;
    recenter();
    refresh_denoms();
  }

  /// Adds delta * value to f at the given positions, then refreshes the
  /// risk-set state. O(nnz + n + K), with one exp for indicator columns.
  void add_scaled(const std::vector<std::int32_t>& positions, const std::vector<double>& values,
                  double delta) {
    touch(positions, values, delta);
    if (needs_recenter_) recenter();
    refresh_denoms();
  }

  /// Applies several column updates with a single state refresh.
  void touch(const std::vector<std::int32_t>& positions, const std::vector<double>& values,
             double delta) {
    if (values.empty()) {
      const double scale = std::exp(delta);
      for (const int pos : positions) {
        f_[pos] += delta;
        expf_[pos] *= scale;
        if (f_[pos] - center_ > 500.0) needs_recenter_ = true;
      }
    } else {
      for (std::size_t k = 0; k < positions.size(); ++k) {
        const int pos = positions[k];
        f_[pos] += delta * values[k];
        expf_[pos] = std::exp(f_[pos] - center_);
        if (f_[pos] - center_ > 500.0) needs_recenter_ = true;
      }
    }
    ++updates_since_resync_;
  }

  void refresh() {
    if (needs_recenter_ || updates_since_resync_ >= kResyncInterval) recenter();
    refresh_denoms();
  }

  struct Snapshot {
    std::vector<double> f, expf;
    double center;
  };
  Snapshot snapshot() const { return {f_, expf_, center_}; }
  void restore(const Snapshot& s) {
    f_ = s.f;
    expf_ = s.expf;
    center_ = s.center;
    needs_recenter_ = false;
    refresh_denoms();
  }

  /// Scaled negative log partial likelihood at the current f. O(n + K); call
  /// once per sweep, not per coordinate.
  double nll() const {
    const int n = index_->n();
    const int K = index_->n_groups();
    double event_f = 0.0;
    for (int s = 0; s < n; ++s)
      if (index_->event_at(s)) event_f += f_[s];
    double log_denoms = 0.0;
    for (int k = 0; k < K; ++k)
      log_denoms += index_->group_events(k) * (center_ + std::log(denom_[k]));
    return -(event_f - log_denoms) / n;
  }

  double f_at(int pos) const { return f_[pos]; }
  double expf_at(int pos) const { return expf_[pos]; }
  double cum_a(int g) const { return cum_a_[g]; }
  double cum_b(int g) const { return cum_b_[g]; }
  double center() const { return center_; }
  /// Risk-set denominator on the centered scale; multiply by exp(center)
  /// to recover sum over the risk set of exp(f).
  double denom(int k) const { return denom_[k]; }
  const std::vector<double>& f() const { return f_; }

 private:
  static constexpr int kResyncInterval = 4096;

  void recenter() {
    center_ = *std::max_element(f_.begin(), f_.end());
    for (int s = 0; s < index_->n(); ++s) expf_[s] = std::exp(f_[s] - center_);
    needs_recenter_ = false;
    updates_since_resync_ = 0;
  }

  void refresh_denoms() {
    const int n = index_->n();
    const int K = index_->n_groups();
    double running = 0.0;
    int pos = n - 1;
    for (int k = K - 1; k >= 0; --k) {
      const int start = index_->group_start(k);
      for (; pos >= start; --pos) running += expf_[pos];
      denom_[k] = running;
    }
    cum_a_[0] = 0.0;
    cum_b_[0] = 0.0;
    for (int k = 0; k < K; ++k) {
      const double d_inv = index_->group_events(k) / denom_[k];
      cum_a_[k + 1] = cum_a_[k] + d_inv;
      cum_b_[k + 1] = cum_b_[k] + d_inv / denom_[k];
    }
  }

  const CoxIndex* index_;
  std::vector<double> f_, expf_, denom_, cum_a_, cum_b_;
  double center_ = 0.0;
  bool needs_recenter_ = false;
  int updates_since_resync_ = 0;
};

struct ColumnGradCurv {
  double grad = 0.0;  // d nll / d beta_j
  double curv = 0.0;  // exact d^2 nll / d beta_j^2, always >= 0
};

/// Exact gradient and diagonal curvature of the scaled negative log partial
/// likelihood along one column. The column is given in sorted positions.
///
/// grad = -(1/n) sum_i x_i (event_i - exp(f_i) A_i)
/// curv =  (1/n) [ sum_i x_i^2 exp(f_i) A_i - sum_k d_k (m1_k / S_k)^2 ]
/// where A_i cumulates d_k / S_k over event groups at or before row i, and
/// m1_k = sum over the column's rows in risk set k of x exp(f). The quadratic
/// term reduces to a single descending-time pass via the pairwise identity
/// sum_k d_k m1_k^2 / S_k^2 = sum_{i,i'} x_i e^{f_i} x_{i'} e^{f_{i'}} B_{min},
/// with B the d_k / S_k^2 prefix, so each column costs O(nnz) not O(nnz + K).
inline ColumnGradCurv column_grad_curv(const CoxIndex& index, const CoxState& state,
                                       const std::vector<std::int32_t>& positions,
                                       const std::vector<double>& values) {
  double g = 0.0, qa = 0.0, pairsum = 0.0, tail = 0.0;
  const bool binary = values.empty();
  for (std::size_t idx = positions.size(); idx-- > 0;) {
    const int pos = positions[idx];
    const double v = binary ? 1.0 : values[idx];
    const int gb = index.groups_before(pos);
    const double a = state.cum_a(gb);
    const double b = state.cum_b(gb);
    const double e = state.expf_at(pos);
    const double w = v * e;
    g += v * ((index.event_at(pos) ? 1.0 : 0.0) - e * a);
    qa += v * w * a;
    pairsum += w * (w + 2.0 * tail) * b;
    tail += w;
  }
  const double n = index.n();
  ColumnGradCurv out;
  out.grad = -g / n;
  out.curv = std::max(0.0, (qa - pairsum) / n);
  return out;
}

namespace detail {

inline std::vector<double> sorted_f_from_rows(const CoxIndex& index, const std::vector<double>& lp) {
  if (static_cast<int>(lp.size()) != index.n_total())
    throw DimensionMismatch("linear predictor length != number of observations");
  std::vector<double> f(index.n());
  for (int s = 0; s < index.n(); ++s) f[s] = lp[index.order(s)];
  return f;
}

/// Time-sorted copy of a column restricted to the rows the index covers.
inline void sort_column(const CoxIndex& index, const SparseColumn& col,
                        std::vector<std::int32_t>& positions, std::vector<double>& values) {
  positions.clear();
  values.clear();
  const bool binary = col.binary();
  std::vector<std::pair<std::int32_t, double>> tmp;
  tmp.reserve(col.nnz());
  for (std::size_t k = 0; k < col.nnz(); ++k) {
    const int pos = index.pos_of_row(col.rows[k]);
    if (pos >= 0) tmp.emplace_back(pos, binary ? 1.0 : col.values[k]);
  }
  std::sort(tmp.begin(), tmp.end());
  positions.reserve(tmp.size());
  if (!binary) values.reserve(tmp.size());
  for (auto& [pos, v] : tmp) {
    positions.push_back(pos);
    if (!binary) values.push_back(v);
  }
}

}  // namespace detail

/// Scaled negative log partial likelihood (Breslow ties) at the given
/// linear predictors, in original row order.
inline double cox_nll(const CoxIndex& index, const std::vector<double>& lp) {
  CoxState state(index);
  state.set_f(detail::sorted_f_from_rows(index, lp));
  return state.nll();
}

inline double cox_nll(const Outcome& outcome, const std::vector<double>& lp) {
  return cox_nll(CoxIndex(outcome), lp);
}

/// Analytic score of the scaled negative log partial likelihood at beta.
inline std::vector<double> nll_gradient(const ColumnSet& X, const std::vector<double>& beta,
                                        const Outcome& outcome) {
  if (static_cast<int>(beta.size()) != X.cols())
    throw DimensionMismatch("beta length != number of columns");
  CoxIndex index(outcome);
  CoxState state(index);
  state.set_f(detail::sorted_f_from_rows(index, X.multiply(beta)));
  std::vector<double> grad(X.cols());
  std::vector<std::int32_t> positions;
  std::vector<double> values;
  for (int j = 0; j < X.cols(); ++j) {
    detail::sort_column(index, X.columns[j], positions, values);
    grad[j] = column_grad_curv(index, state, positions, values).grad;
  }
  return grad;
}

/// Exact diagonal second partials of the scaled negative log partial
/// likelihood at beta; nonnegative by convexity.
inline std::vector<double> curvature_bounds(const ColumnSet& X, const std::vector<double>& beta,
                                            const Outcome& outcome) {
  if (static_cast<int>(beta.size()) != X.cols())
    throw DimensionMismatch("beta length != number of columns");
  CoxIndex index(outcome);
  CoxState state(index);
  state.set_f(detail::sorted_f_from_rows(index, X.multiply(beta)));
  std::vector<double> curv(X.cols());
  std::vector<std::int32_t> positions;
  std::vector<double> values;
  for (int j = 0; j < X.cols(); ++j) {
    detail::sort_column(index, X.columns[j], positions, values);
    curv[j] = column_grad_curv(index, state, positions, values).curv;
  }
  return curv;
}

/// Breslow cumulative baseline hazard: increment d_k / sum_{R_k} exp(f) at
/// each distinct event time.
struct BaselineHazard {
  std::vector<double> times;              // distinct event times, increasing
  std::vector<double> cumulative_hazard;  // nondecreasing, same length

  /// Right-continuous step evaluation; 0 before the first event time.
  double cumhaz_at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative_hazard[(it - times.begin()) - 1];
  }
};

inline BaselineHazard breslow_baseline_lp(const std::vector<double>& lp, const Outcome& outcome) {
  CoxIndex index(outcome);
  CoxState state(index);
  state.set_f(detail::sorted_f_from_rows(index, lp));
  BaselineHazard bh;
  const int K = index.n_groups();
  bh.times.resize(K);
  bh.cumulative_hazard.resize(K);
  double cum = 0.0;
  const double scale = std::exp(-state.center());
  for (int k = 0; k < K; ++k) {
    cum += index.group_events(k) * scale / state.denom(k);
    bh.times[k] = index.group_time(k);
    bh.cumulative_hazard[k] = cum;
  }
  return bh;
}

inline BaselineHazard breslow_baseline(const ColumnSet& X, const std::vector<double>& beta,
                                       const Outcome& outcome) {
  return breslow_baseline_lp(X.multiply(beta), outcome);
}

/// S(t) = exp(-Lambda0(t) * exp(lp)) on a step-function baseline.
inline std::vector<double> predict_survival(const BaselineHazard& bh, double lp,
                                            const std::vector<double>& eval_times) {
  std::vector<double> out(eval_times.size());
  const double risk = std::exp(lp);
  for (std::size_t i = 0; i < eval_times.size(); ++i)
    out[i] = std::exp(-bh.cumhaz_at(eval_times[i]) * risk);
  return out;
}

}  // namespace binilasso
