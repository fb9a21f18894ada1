#pragma once

// Independent reference implementations used as test oracles. Everything here
// is written the naive O(n^2) way, straight from the definitions, and shares
// no code with the library's risk-set machinery.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "binilasso/rng.hpp"
#include "binilasso/survival_data.hpp"

namespace oracle {

using binilasso::Outcome;

// Breslow partial likelihood by direct risk-set enumeration.
inline double naive_nll(const Outcome& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  const int n = y.n();
  Eigen::VectorXd f = X * beta;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!y.event[i]) continue;
    double denom = 0.0;
    for (int j = 0; j < n; ++j)
      if (y.time[j] >= y.time[i]) denom += std::exp(f[j]);
    total += f[i] - std::log(denom);
  }
  return -total / n;
}

inline Eigen::VectorXd naive_gradient(const Outcome& y, const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& beta) {
  const int n = y.n();
  const int d = static_cast<int>(X.cols());
  Eigen::VectorXd f = X * beta;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    if (!y.event[i]) continue;
    double denom = 0.0;
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < n; ++j) {
      if (y.time[j] >= y.time[i]) {
        const double e = std::exp(f[j]);
        denom += e;
        num += e * X.row(j).transpose();
      }
    }
    grad += X.row(i).transpose() - num / denom;
  }
  return -grad / n;
}

inline Eigen::MatrixXd naive_hessian(const Outcome& y, const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& beta) {
  const int n = y.n();
  const int d = static_cast<int>(X.cols());
  Eigen::VectorXd f = X * beta;
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    if (!y.event[i]) continue;
    double denom = 0.0;
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd num2 = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < n; ++j) {
      if (y.time[j] >= y.time[i]) {
        const double e = std::exp(f[j]);
        denom += e;
        num += e * X.row(j).transpose();
        num2 += e * X.row(j).transpose() * X.row(j);
      }
    }
    Eigen::VectorXd mean = num / denom;
    hess += num2 / denom - mean * mean.transpose();
  }
  return hess / n;
}

// Full-Hessian Newton with step halving; the independent unpenalized fit.
inline Eigen::VectorXd newton_cox(const Outcome& y, const Eigen::MatrixXd& X, int max_iter = 200,
                                  double tol = 1e-12) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  double obj = naive_nll(y, X, beta);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd g = naive_gradient(y, X, beta);
    if (g.lpNorm<Eigen::Infinity>() < tol) break;
    Eigen::MatrixXd H = naive_hessian(y, X, beta);
    Eigen::VectorXd step = H.ldlt().solve(g);
    double scale = 1.0;
    for (int half = 0; half < 60; ++half) {
      Eigen::VectorXd cand = beta - scale * step;
      const double cand_obj = naive_nll(y, X, cand);
      if (cand_obj <= obj) {
        beta = cand;
        obj = cand_obj;
        break;
      }
      scale *= 0.5;
    }
  }
  return beta;
}

// One-dimensional penalized/unpenalized minimum by exhaustive grid scan.
inline double grid_search_1d(const Outcome& y, const Eigen::VectorXd& x, double lo, double hi,
                             double step) {
  Eigen::MatrixXd X = x;
  double best_b = lo, best = std::numeric_limits<double>::infinity();
  for (double b = lo; b <= hi + 1e-15; b += step) {
    Eigen::VectorXd beta(1);
    beta << b;
    const double v = naive_nll(y, X, beta);
    if (v < best) {
      best = v;
      best_b = b;
    }
  }
  return best_b;
}

// Minimum of nll + lambda * sum w|b| over a brute-force grid, d in {1, 2}.
inline double brute_force_min_objective(const Outcome& y, const Eigen::MatrixXd& X, double lambda,
                                        const std::vector<double>& w, double lo, double hi,
                                        double step, bool nonnegative = false) {
  const int d = static_cast<int>(X.cols());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta(d);
  const double start = nonnegative ? 0.0 : lo;
  if (d == 1) {
    for (double b0 = start; b0 <= hi + 1e-15; b0 += step) {
      beta << b0;
      const double v = naive_nll(y, X, beta) + lambda * w[0] * std::abs(b0);
      best = std::min(best, v);
    }
  } else {
    for (double b0 = start; b0 <= hi + 1e-15; b0 += step) {
      for (double b1 = start; b1 <= hi + 1e-15; b1 += step) {
        beta << b0, b1;
        const double v =
            naive_nll(y, X, beta) + lambda * (w[0] * std::abs(b0) + w[1] * std::abs(b1));
        best = std::min(best, v);
      }
    }
  }
  return best;
}

// Random right-censored instances for property tests.
struct RandomInstance {
  Outcome y;
  Eigen::MatrixXd X;
};

inline RandomInstance random_instance(std::uint64_t seed, int n, int d, bool binary_design = false,
                                      double censor_frac = 0.3) {
  binilasso::Rng rng(seed);
  RandomInstance inst;
  inst.X.resize(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i)
      inst.X(i, j) = binary_design ? (rng.uniform_open() < 0.5 ? 0.0 : 1.0)
                                   : 2.0 * rng.uniform_open() - 1.0;
  inst.y.time.resize(n);
  inst.y.event.resize(n);
  int events = 0;
  for (int i = 0; i < n; ++i) {
    inst.y.time[i] = rng.exponential() + 0.05;
    inst.y.event[i] = rng.uniform_open() < censor_frac ? 0 : 1;
    events += inst.y.event[i];
  }
  if (events == 0) inst.y.event[0] = 1;
  // occasional ties to exercise the Breslow handling
  if (n >= 6) {
    inst.y.time[1] = inst.y.time[0];
    inst.y.event[0] = inst.y.event[1] = 1;
  }
  return inst;
}

}  // namespace oracle
