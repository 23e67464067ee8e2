#include <doctest.h>

#include <random>

#include "metric_active/labeling.hpp"

using namespace metric_active;

namespace {

constexpr auto U = LabelValue::unset;
constexpr auto N = LabelValue::negative;
constexpr auto Z = LabelValue::zero;
constexpr auto P = LabelValue::positive;
constexpr auto C = LabelValue::conflict;

LabelSet pl(bool neg, bool pos) { return {neg, pos}; }

}  // namespace

TEST_CASE("possible labels") {
  SUBCASE("incomparable minimal balls with opposite signs") {
    const auto fam = BallFamily::from_member_sets(6, {{0, 1, 2}, {2, 3, 4}});
    EstimateTable t(2, 0.2);
    t.finalize(0, 0.8);
    t.finalize(1, -0.8);
    CHECK(possible_labels(2, 0, fam, t) == pl(true, true));
  }
  SUBCASE("only the inner ball is minimal") {
    const auto fam = BallFamily::from_member_sets(6, {{1, 2, 3, 4}, {2, 3}});
    REQUIRE(fam.level(1) == 1);
    EstimateTable t(2, 0.2);
    t.finalize(0, 0.8);
    t.finalize(1, -0.8);
    CHECK(possible_labels(2, 1, fam, t) == pl(true, false));
    CHECK(possible_labels(2, 0, fam, t) == pl(false, true));
  }
  SUBCASE("single minimal ball estimated 0") {
    const auto fam = BallFamily::from_member_sets(4, {{0, 1, 2, 3}});
    EstimateTable t(1, 0.5);
    t.finalize(0, 0.1);
    CHECK(possible_labels(0, 0, fam, t) == pl(false, false));
  }
  SUBCASE("not ready while any ball in scope is unavailable") {
    const auto fam = BallFamily::from_member_sets(6, {{1, 2, 3, 4}, {2, 3}});
    EstimateTable t(2, 0.2);
    t.finalize(1, -0.8);
    CHECK_FALSE(possible_labels(2, 1, fam, t).has_value());
    EstimateTable only_outer(2, 0.2);
    only_outer.finalize(0, 0.8);
    CHECK(possible_labels(2, 0, fam, only_outer).has_value());
    CHECK_FALSE(possible_labels(2, 1, fam, only_outer).has_value());
  }
}

TEST_CASE("provisional label") {
  CHECK(provisional_label(pl(false, false)) == Z);
  CHECK(provisional_label(pl(false, true)) == P);
  CHECK(provisional_label(pl(true, false)) == N);
  CHECK(provisional_label(pl(true, true)) == C);
}

TEST_CASE("final label") {
  const std::vector<LabelValue> a{P, C, N, U};
  const std::vector<LabelValue> b{C, Z, U};
  const std::vector<LabelValue> c{N, U, U};
  CHECK(final_label(a) == -1);
  CHECK(final_label(b) == 0);
  CHECK(final_label(c) == -1);
  CHECK(final_label(std::vector<LabelValue>{}) == 0);
}

TEST_CASE("mind changes") {
  CHECK(mind_changes(std::vector<LabelValue>{P, C, N, Z, P}) == 2);
  CHECK(mind_changes(std::vector<LabelValue>{P, P, Z, P}) == 0);
  CHECK(mind_changes(std::vector<LabelValue>{U, U}) == 0);
}

TEST_CASE("label table is write-once") {
  LabelTable t(2, 2);
  t.set(0, 1, C);
  CHECK(t.get(0, 1) == C);
  CHECK_THROWS_AS(t.set(0, 1, P), Error);
  CHECK_THROWS_AS(t.set(1, 0, U), Error);
  CHECK_THROWS_AS(t.set(1, 3, P), Error);
}

TEST_CASE("uncertainty regions") {
  LabelTable t(4, 2);
  // point 0: nothing yet; 1: settled at 0; 2: ! at 0; 3: ! at 0 and 1
  t.set(1, 0, P);
  t.set(2, 0, C);
  t.set(3, 0, C);
  t.set(3, 1, C);
  const auto u = uncertainty_regions(t);
  REQUIRE(u.size() == 3);
  CHECK(u[0] == std::vector<PointIndex>{0});
  CHECK(u[1] == std::vector<PointIndex>{2});
  CHECK(u[2] == std::vector<PointIndex>{3});

  // exhaustive check of the defining equations on random tables
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    LabelTable r(6, 3);
    for (PointIndex x = 0; x < 6; ++x) {
      const int filled = static_cast<int>(rng() % 5);
      for (int l = 0; l < filled; ++l) r.set(x, l, static_cast<LabelValue>(1 + rng() % 4));
    }
    const auto got = uncertainty_regions(r);
    for (int l = 0; l <= 3; ++l) {
      std::vector<PointIndex> want;
      for (PointIndex x = 0; x < 6; ++x) {
        const bool unset_here = r.get(x, l) == U;
        if (l == 0 ? unset_here : unset_here && r.get(x, l - 1) == C) want.push_back(x);
      }
      CHECK(got[static_cast<std::size_t>(l)] == want);
    }
  }
}

TEST_CASE("tracked levels") {
  for (std::size_t n = 1; n <= 600; ++n) {
    for (std::size_t k = 1; k <= 40; ++k) {
      // largest l with k * 2^(l+1) <= n, clamped at 0 and the singleton level
      int want = 0;
      while ((k << (want + 2)) <= n) ++want;
      want = std::min(want, deepest_level(n));
      CHECK(tracked_max_level(n, k) == want);
      CHECK(tracked_max_level(n, k, LevelCap::full) == deepest_level(n));
      if (want > 0) CHECK(level_min_size(want, n) >= k);
    }
  }
  CHECK(tracked_max_level(4096, 64) == 5);
  CHECK_THROWS_AS(tracked_max_level(10, 0), Error);
  CHECK(level_cap_from_string("full") == LevelCap::full);
  CHECK(std::string(to_string(LevelCap::analysed)) == "analysed");
  CHECK_THROWS_AS(level_cap_from_string("deep"), ConfigError);
}

TEST_CASE("run result json") {
  std::vector<double> xs{0.1, 0.4, 0.6, 0.9};
  const auto ps = PointSet::from_1d(xs);
  const auto fam = BallFamily::intervals(ps);
  LabelSource labels({-1, -1, 1, 1}, 2);
  const auto r = run(ps, fam, labels, {0.5, 1, 4, 3, LevelCap::full});
  const auto j = r.to_json();
  CHECK(j["queries_used"] == 4);
  CHECK(j["final_labels"] == nlohmann::json({-1, -1, 1, 1}));
  CHECK(j["label_table"].size() == 4);
}
