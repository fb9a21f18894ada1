#include <catch2/catch_amalgamated.hpp>

#include "binilasso/survival_data.hpp"
#include "support/tempdir.hpp"

using namespace binilasso;

TEST_CASE("load_csv parses a small file") {
  testutil::TempDir tmp;
  tmp.write("d.csv", "time,event,x1\n1,1,0.1\n2,0,0.5\n3,1,0.9\n");
  auto ds = load_csv(tmp.file("d.csv"), "time", "event");
  REQUIRE(ds.n() == 3);
  REQUIRE(ds.p() == 1);
  CHECK(ds.times == std::vector<double>{1, 2, 3});
  CHECK(ds.events == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(ds.features(0, 0) == 0.1);
  CHECK(ds.features(2, 0) == 0.9);
  CHECK(ds.feature_names == std::vector<std::string>{"x1"});
}

TEST_CASE("load_csv keeps feature columns in file order around outcome columns") {
  testutil::TempDir tmp;
  tmp.write("d.csv", "a,time,b,event,c\n1,1,2,1,3\n4,2,5,0,6\n");
  auto ds = load_csv(tmp.file("d.csv"), "time", "event");
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(ds.features(1, 2) == 6.0);
}

TEST_CASE("load_csv rejects bad inputs") {
  testutil::TempDir tmp;
  SECTION("event code outside {0,1}") {
    tmp.write("d.csv", "time,event,x1\n1,1,0.1\n2,2,0.5\n");
    CHECK_THROWS_AS(load_csv(tmp.file("d.csv"), "time", "event"), InvalidEventCode);
  }
  SECTION("time = 0 reported with its data row") {
    tmp.write("d.csv", "time,event,x1\n1,1,.1\n2,0,.2\n3,1,.3\n0,1,.4\n");
    try {
      load_csv(tmp.file("d.csv"), "time", "event");
      FAIL("expected NonPositiveTime");
    } catch (const NonPositiveTime& e) {
      CHECK(e.row == 4);
    }
  }
  SECTION("missing outcome column") {
    tmp.write("d.csv", "time,x1\n1,0.1\n2,0.5\n");
    CHECK_THROWS_AS(load_csv(tmp.file("d.csv"), "time", "event"), MissingColumn);
  }
  SECTION("non-numeric cell carries row and column") {
    tmp.write("d.csv", "time,event,x1\n1,1,0.1\n2,0,oops\n");
    try {
      load_csv(tmp.file("d.csv"), "time", "event");
      FAIL("expected NonNumericCell");
    } catch (const NonNumericCell& e) {
      CHECK(e.row == 2);
      CHECK(e.col == 3);
    }
  }
  SECTION("no events at all") {
    tmp.write("d.csv", "time,event,x1\n1,0,0.1\n2,0,0.5\n");
    CHECK_THROWS_AS(load_csv(tmp.file("d.csv"), "time", "event"), NoEvents);
  }
}

TEST_CASE("csv round trip preserves values") {
  testutil::TempDir tmp;
  SurvivalDataset ds;
  ds.times = {0.5, 1.25, 3.75, 2.0};
  ds.events = {1, 0, 1, 1};
  ds.feature_names = {"x1", "x2"};
  ds.features.resize(4, 2);
  ds.features << 0.123456789012345, -1.5, 2.718281828459045, 3.3, 1e-7, 9.25, -0.1, 0.0;
  write_csv(ds, tmp.file("out.csv"));
  auto back = load_csv(tmp.file("out.csv"), "time", "event");
  REQUIRE(back.n() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.times[i] == Catch::Approx(ds.times[i]).epsilon(1e-12));
    CHECK(back.events[i] == ds.events[i]);
    for (int j = 0; j < 2; ++j)
      CHECK(back.features(i, j) == Catch::Approx(ds.features(i, j)).margin(1e-12));
  }
}

TEST_CASE("standardize centers and scales with the n-1 denominator") {
  SurvivalDataset ds;
  ds.times = {1, 2, 3};
  ds.events = {1, 0, 1};
  ds.feature_names = {"x1"};
  ds.features.resize(3, 1);
  ds.features << 1, 2, 3;
  auto [std_ds, params] = standardize(ds);
  CHECK(std_ds.features(0, 0) == Catch::Approx(-1.0));
  CHECK(std_ds.features(1, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(std_ds.features(2, 0) == Catch::Approx(1.0));
  CHECK(params.means[0] == Catch::Approx(2.0));
  CHECK(params.sds[0] == Catch::Approx(1.0));

  SECTION("idempotent on standardized input") {
    auto [again, p2] = standardize(std_ds);
    for (int i = 0; i < 3; ++i)
      CHECK(again.features(i, 0) == Catch::Approx(std_ds.features(i, 0)).margin(1e-12));
    CHECK(p2.means[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(p2.sds[0] == Catch::Approx(1.0).epsilon(1e-12));
  }

  SECTION("inverting recovers the input") {
    auto back = unstandardize(std_ds, params);
    for (int i = 0; i < 3; ++i)
      CHECK(back.features(i, 0) == Catch::Approx(ds.features(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("standardize rejects constant features") {
  SurvivalDataset ds;
  ds.times = {1, 2, 3};
  ds.events = {1, 1, 1};
  ds.feature_names = {"x1"};
  ds.features.resize(3, 1);
  ds.features << 5, 5, 5;
  CHECK_THROWS_AS(standardize(ds), ConstantFeature);
}

TEST_CASE("validate reports events, distinct counts and ties") {
  SurvivalDataset ds;
  ds.times = {1.0, 2.0, 3.0, 2.0};
  ds.events = {1, 1, 1, 1};
  ds.feature_names = {"b"};
  ds.features.resize(4, 1);
  ds.features << 0, 1, 0, 1;
  auto rep = validate(ds);
  CHECK(rep.event_rate == 1.0);
  CHECK(rep.distinct_counts[0] == 2);
  REQUIRE(rep.tie_groups.size() == 1);
  CHECK(rep.tie_groups[0] == std::vector<int>{1, 3});
}
