#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "binilasso/metrics.hpp"
#include "support/oracles.hpp"

using namespace binilasso;

TEST_CASE("aic on the two-subject worked example") {
  Outcome y;
  y.time = {1.0, 2.0};
  y.event = {1, 1};
  Eigen::MatrixXd X(2, 1);
  X << 1, 0;
  auto cols = ColumnSet::from_dense(X);

  // logPL(b) = b - log(e^b + 1); AIC = 2k - 2 logPL with k = 1
  for (double b : {0.0, 0.7}) {
    CoxFit f;
    f.beta = {b};
    f.lambda = 0.0;
    f.nll_value = cox_nll(y, cols.multiply(f.beta));
    const double expected = 2.0 - 2.0 * (b - std::log(std::exp(b) + 1.0));
    CHECK(aic(f, 2) == Catch::Approx(expected).epsilon(1e-12));
  }

  SECTION("null model has k = 0") {
    CoxFit null_fit;
    null_fit.nll_value = cox_nll(y, {0.0, 0.0});
    CHECK(aic(null_fit, 2) == Catch::Approx(2.0 * 2.0 * null_fit.nll_value).epsilon(1e-12));
  }

  SECTION("penalized fits are rejected") {
    CoxFit f;
    f.beta = {0.1};
    f.lambda = 0.05;
    CHECK_THROWS_AS(aic(f, 2), PenalizedFitRejected);
  }
}

TEST_CASE("aic differences between nested refits are definitional") {
  auto inst = oracle::random_instance(5, 40, 3);
  auto cols = ColumnSet::from_dense(inst.X);
  auto full = fit(cols, inst.y, 0.0, PenaltyWeights::uniform(3));
  ColumnSet sub;
  sub.n_rows = cols.n_rows;
  sub.columns = {cols.columns[0]};
  auto small = fit(sub, inst.y, 0.0, PenaltyWeights::uniform(1));
  const double d_aic = aic(full, 40) - aic(small, 40);
  const double d_logpl = (-40.0 * full.nll_value) - (-40.0 * small.nll_value);
  CHECK(d_aic == Catch::Approx(2.0 * (3 - 1) - 2.0 * d_logpl).margin(1e-10));
}

TEST_CASE("adding a pure-noise column usually increases AIC") {
  int increased = 0;
  for (int seed = 0; seed < 100; ++seed) {
    auto inst = oracle::random_instance(400 + seed, 60, 1);
    auto cols = ColumnSet::from_dense(inst.X);
    auto with_noise = fit(cols, inst.y, 0.0, PenaltyWeights::uniform(1));
    CoxFit null_fit;
    null_fit.nll_value = cox_nll(inst.y, std::vector<double>(60, 0.0));
    increased += aic(with_noise, 60) > aic(null_fit, 60);
  }
  CHECK(increased >= 80);
}

TEST_CASE("kaplan-meier hand example and censoring flip") {
  Outcome y;
  y.time = {1.0, 2.0, 3.0};
  y.event = {1, 0, 1};
  auto km = kaplan_meier(y);
  CHECK(km.at(0.5) == 1.0);
  CHECK(km.at(1.0) == Catch::Approx(2.0 / 3));
  CHECK(km.at(2.5) == Catch::Approx(2.0 / 3));
  CHECK(km.at(3.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(km.at_left(1.0) == 1.0);
  CHECK(km.at_left(3.0) == Catch::Approx(2.0 / 3));

  auto g = censoring_km(y);
  CHECK(g.at(1.5) == 1.0);
  CHECK(g.at(2.0) == Catch::Approx(0.5));
  CHECK(g.at(10.0) == Catch::Approx(0.5));
}

TEST_CASE("oracle per-subject predictor gives zero IBS without censoring") {
  Outcome y;
  y.time = {1.0, 2.0, 3.0, 4.0, 5.0};
  y.event = {1, 1, 1, 1, 1};
  std::vector<double> grid = {0.5, 1.5, 2.5, 3.5, 4.5};
  Eigen::MatrixXd surv(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int g = 0; g < 5; ++g) surv(i, g) = grid[g] < y.time[i] ? 1.0 : 0.0;
  auto res = ibs_curves(surv, y, grid, censoring_km(y));
  CHECK(res.value == 0.0);
  CHECK_FALSE(res.grid_truncated);
}

TEST_CASE("constant 0.5 predictor at one time with half the subjects dead") {
  Outcome y;
  y.time = {1.0, 1.0, 3.0, 3.0};
  y.event = {1, 1, 1, 1};
  std::vector<double> grid = {2.0};
  Eigen::MatrixXd surv = Eigen::MatrixXd::Constant(4, 1, 0.5);
  auto res = ibs_curves(surv, y, grid, censoring_km(y));
  CHECK(res.value == Catch::Approx(0.25));
}

TEST_CASE("grid is truncated when the censoring distribution vanishes") {
  Outcome y;
  y.time = {1.0, 2.0, 3.0};
  y.event = {1, 1, 0};  // last observation censored: G hits 0 at t = 3
  std::vector<double> grid = {0.5, 1.5, 2.5, 3.5};
  Eigen::MatrixXd surv = Eigen::MatrixXd::Constant(3, 4, 0.5);
  auto res = ibs_curves(surv, y, grid, censoring_km(y));
  CHECK(res.grid_truncated);
  CHECK(res.max_time_used == 2.5);
}

TEST_CASE("c-index endpoints, ties, and monotone invariance") {
  Outcome y;
  y.time = {1, 2, 3, 4};
  y.event = {1, 1, 1, 1};

  // higher risk should fail earlier: perfectly ordered scores
  CHECK(c_index({4, 3, 2, 1}, y) == 1.0);
  CHECK(c_index({1, 2, 3, 4}, y) == 0.0);
  CHECK(c_index({1, 1, 1, 1}, y) == 0.5);

  SECTION("strictly monotone transforms leave C unchanged, exactly") {
    auto inst = oracle::random_instance(9, 50, 1);
    std::vector<double> lp(50);
    Rng rng(4);
    for (auto& v : lp) v = 2 * rng.uniform_open() - 1;
    const double base = c_index(lp, inst.y);
    auto warped = lp;
    for (auto& v : warped) v = std::exp(3.0 * v) + 5.0;
    CHECK(c_index(warped, inst.y) == base);
  }

  SECTION("random scores sit near one half at n = 1000") {
    Rng rng(123);
    Outcome big;
    std::vector<double> lp(1000);
    for (int i = 0; i < 1000; ++i) {
      big.time.push_back(rng.exponential());
      big.event.push_back(rng.uniform_open() < 0.3 ? 0 : 1);
      lp[i] = rng.uniform_open();
    }
    CHECK(std::abs(c_index(lp, big) - 0.5) < 0.05);
  }

  SECTION("no comparable pairs") {
    Outcome none;
    none.time = {2.0, 2.0};
    none.event = {1, 1};  // equal times: no strictly-earlier event
    CHECK_THROWS_AS(c_index({1.0, 2.0}, none), NoComparablePairs);
  }
}

TEST_CASE("cutpoint accuracy matching rules") {
  SECTION("exact estimates give zero bias and no misses") {
    auto acc = cutpoint_accuracy({{0.3, 0.7}}, {{0.3, 0.7}});
    CHECK(acc.mean_abs_bias == 0.0);
    CHECK(acc.n_missed == 0);
    CHECK(acc.n_spurious == 0);
    CHECK(acc.n_matched == 2);
  }

  SECTION("single estimate matches its nearest truth, the other is missed") {
    auto acc = cutpoint_accuracy({{0.3, 0.7}}, {{0.32}});
    REQUIRE(acc.matches.size() == 2);
    CHECK(acc.matches[0].estimate.has_value());
    CHECK(acc.matches[0].signed_distance == Catch::Approx(0.02));
    CHECK_FALSE(acc.matches[1].estimate.has_value());
    CHECK(acc.n_missed == 1);
    CHECK(acc.n_spurious == 0);
  }

  SECTION("equidistant estimate goes to the lower-index truth") {
    auto acc = cutpoint_accuracy({{0.3, 0.7}}, {{0.5}});
    CHECK(acc.matches[0].estimate.has_value());
    CHECK(acc.matches[0].truth == 0.3);
    CHECK_FALSE(acc.matches[1].estimate.has_value());
  }

  SECTION("spurious estimates are counted") {
    auto acc = cutpoint_accuracy({{0.5}}, {{0.2, 0.5, 0.9}});
    CHECK(acc.n_matched == 1);
    CHECK(acc.n_spurious == 2);
  }

  SECTION("feature relabeling is symmetric") {
    auto a = cutpoint_accuracy({{0.3}, {0.6, 0.8}}, {{0.31}, {0.59}});
    auto b = cutpoint_accuracy({{0.6, 0.8}, {0.3}}, {{0.59}, {0.31}});
    CHECK(a.mean_abs_bias == Catch::Approx(b.mean_abs_bias));
    CHECK(a.n_missed == b.n_missed);
    CHECK(a.n_spurious == b.n_spurious);
  }
}

TEST_CASE("evaluation bundle serialization and relatives") {
  EvaluationBundle b;
  b.aic = 100.0;
  b.ibs = 0.2;
  b.c_index = 0.7;
  b.n_cutpoints = 3;
  b.wall_time_seconds = 1.5;

  auto j = bundle_to_json(b);
  CHECK_FALSE(j.contains("wall_time_seconds"));  // timing kept out of results
  CHECK(bundle_to_json(b, true).contains("wall_time_seconds"));

  EvaluationBundle base = b;
  base.aic = 50.0;
  base.ibs = 0.4;
  base.c_index = 0.7;
  auto rel = b.relative_to(base);
  CHECK(rel.aic == Catch::Approx(2.0));
  CHECK(rel.ibs == Catch::Approx(0.5));
  CHECK(rel.c_index == Catch::Approx(1.0));
}
