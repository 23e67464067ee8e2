#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "metric_active/labeling.hpp"
#include "metric_active/synth.hpp"
#include "reference_loop.hpp"

using namespace metric_active;

namespace {

PointSet grid_1d(std::size_t n) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return PointSet::from_1d(xs);
}

std::vector<double> step_eta(const PointSet& ps, double cut, double level) {
  std::vector<double> eta(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) eta[i] = ps.coord(static_cast<PointIndex>(i)) > cut ? level : -level;
  return eta;
}

// Records what the learner exposes after every iteration.
struct Recorder final : RunObserver {
  std::vector<std::size_t> log_size;
  std::vector<std::vector<std::vector<PointIndex>>> regions;
  std::vector<LabelTable> tables;

  void after_iteration(const LabelTable& labels, const QueryState& state,
                       const std::vector<std::vector<PointIndex>>& uncertainty) override {
    log_size.push_back(state.queries_used());
    regions.push_back(uncertainty);
    tables.push_back(labels);
  }
};

struct Instance {
  PointSet ps;
  BallFamily fam;
  std::vector<double> eta;
};

Instance random_instance(std::mt19937_64& rng, bool euclidean) {
  std::uniform_int_distribution<std::size_t> size(euclidean ? 3 : 4, euclidean ? 18 : 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = size(rng);
  std::vector<std::vector<double>> rows(n);
  for (auto& r : rows) {
    r.push_back(unit(rng));
    if (euclidean) r.push_back(unit(rng));
  }
  Instance inst{PointSet::from_rows(rows), {}, {}};
  inst.fam = euclidean ? BallFamily::euclidean(inst.ps) : BallFamily::intervals(inst.ps);
  const double cut = unit(rng);
  const double noise = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : 0.4;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = inst.ps.coord(static_cast<PointIndex>(i));
    inst.eta.push_back((x > cut ? 1.0 : -1.0) * noise * (0.5 + 0.5 * unit(rng)));
  }
  return inst;
}

}  // namespace

TEST_CASE("budget 0 leaves every final label at 0") {
  const auto ps = grid_1d(16);
  const auto fam = BallFamily::intervals(ps);
  LabelSource labels(step_eta(ps, 0.5, 1.0), 7);
  const auto r = run(ps, fam, labels, {0.5, 2, 0, 3});
  CHECK(r.queries_used == 0);
  CHECK(r.iterations == 0);
  CHECK(std::all_of(r.final_labels.begin(), r.final_labels.end(), [](int y) { return y == 0; }));
}

TEST_CASE("budget >= n queries all of X and settles every tracked cell") {
  const auto ps = grid_1d(24);
  const auto fam = BallFamily::intervals(ps);
  for (LevelCap cap : {LevelCap::analysed, LevelCap::full}) {
    LabelSource labels(step_eta(ps, 0.4, 0.7), 11);
    const auto r = run(ps, fam, labels, {0.3, 2, 100, 5, cap});
    CHECK(r.queries_used == 24);
    CHECK(r.labels.max_level() == tracked_max_level(24, 2, cap));
    for (PointIndex x = 0; x < 24; ++x)
      for (LabelValue v : r.labels.row(x)) CHECK(v != LabelValue::unset);
  }
}

TEST_CASE("noiseless step on 64 grid points, k = 4, full level range") {
  const auto ps = grid_1d(64);
  const auto fam = BallFamily::intervals(ps);
  const auto eta = step_eta(ps, 0.5, 1.0);

  SUBCASE("budget 40 matches the straight-line loop and never mislabels") {
    const RunOptions opts{0.5, 4, 40, 2024, LevelCap::full};
    LabelSource a(eta, 99);
    const auto r = run(ps, fam, a, opts);
    LabelSource b(eta, 99);
    const auto ref = testing::reference_run(fam, b, opts);
    CHECK(r.final_labels == ref.final_labels);
    CHECK(r.state.log() == ref.state.log());
    CHECK(r.queries_used == 40);
    std::size_t unlabeled = 0;
    for (std::size_t x = 0; x < 64; ++x) {
      CHECK(r.final_labels[x] != -bayes_label(eta[x]));
      unlabeled += r.final_labels[x] == 0;
    }
    // Level 2 has tau = 1, so the conflicted middle waits for every point
    // of its size-8..15 windows; 40 labels do not cover them.
    CHECK(unlabeled == 12);
  }
  SUBCASE("budget n labels every point with its Bayes label") {
    LabelSource a(eta, 99);
    const auto r = run(ps, fam, a, {0.5, 4, 64, 2024, LevelCap::full});
    for (std::size_t x = 0; x < 64; ++x) CHECK(r.final_labels[x] == bayes_label(eta[x]));
  }
}

TEST_CASE("the analysed cap stops at the last level whose balls hold k points") {
  const auto ps = grid_1d(64);
  const auto fam = BallFamily::intervals(ps);
  const auto eta = step_eta(ps, 0.5, 1.0);
  LabelSource labels(eta, 99);
  const auto r = run(ps, fam, labels, {0.5, 4, 64, 2024});
  CHECK(r.labels.max_level() == 3);
  // The two points flanking the step see conflicting size-4 windows at
  // every level and stay unlabeled; everything else is correct.
  for (std::size_t x = 0; x < 64; ++x) {
    if (x == 31 || x == 32) CHECK(r.final_labels[x] == 0);
    else CHECK(r.final_labels[x] == bayes_label(eta[x]));
  }
}

TEST_CASE("indexed learner and straight-line loop agree") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 160; ++trial) {
    const bool euclidean = trial % 4 == 3;
    auto inst = random_instance(rng, euclidean);
    const std::size_t n = inst.ps.size();
    RunOptions opts;
    opts.gamma = std::uniform_real_distribution<double>(0.05, 0.9)(rng);
    opts.k = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    opts.budget = std::uniform_int_distribution<std::size_t>(0, n + 2)(rng);
    opts.seed = rng();
    opts.cap = trial % 2 ? LevelCap::full : LevelCap::analysed;
    const std::uint64_t label_seed = rng();
    CAPTURE(trial);
    CAPTURE(n);

    LabelSource a(inst.eta, label_seed);
    const auto r = run(inst.ps, inst.fam, a, opts);
    LabelSource b(inst.eta, label_seed);
    const auto ref = testing::reference_run(inst.fam, b, opts);

    CHECK(r.state.log() == ref.state.log());
    CHECK(r.labels == ref.labels);
    CHECK(r.final_labels == ref.final_labels);
    CHECK(r.iterations == ref.iterations);

    const auto est = final_estimates(inst.fam, r.state, opts);
    for (BallId id = 0; id < inst.fam.size(); ++id) CHECK(est.estimate(id) == ref.estimates.estimate(id));
  }
}

TEST_CASE("per-iteration invariants") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_instance(rng, trial % 3 == 2);
    const std::size_t n = inst.ps.size();
    RunOptions opts{0.3, std::uniform_int_distribution<std::size_t>(1, 3)(rng), n, rng(),
                    trial % 2 ? LevelCap::full : LevelCap::analysed};
    LabelSource labels(inst.eta, rng());
    Recorder rec;
    const auto r = run(inst.ps, inst.fam, labels, opts, &rec);
    CAPTURE(trial);

    // uncertainty regions match their definition; cells are write-once
    for (std::size_t it = 0; it < rec.tables.size(); ++it) {
      CHECK(rec.regions[it] == uncertainty_regions(rec.tables[it]));
      if (it == 0) continue;
      for (PointIndex x = 0; x < static_cast<PointIndex>(n); ++x)
        for (int l = 0; l <= rec.tables[it].max_level(); ++l) {
          const auto before = rec.tables[it - 1].get(x, l);
          if (before != LabelValue::unset) CHECK(rec.tables[it].get(x, l) == before);
        }
    }

    // at most once, background in T order
    const auto& log = r.state.log();
    std::set<PointIndex> seen;
    double last_bg = -1.0;
    for (const auto& q : log) {
      CHECK(seen.insert(q.point).second);
      if (q.kind == QueryKind::background) {
        CHECK(r.state.threshold(q.point) > last_bg);
        last_bg = r.state.threshold(q.point);
      }
    }

    // focused queries: T <= tau_l, inside a level-l ball around a point of
    // the uncertainty region in force at the start of the iteration
    const ThresholdSchedule sched{opts.k, n};
    std::size_t start = 0;
    for (std::size_t it = 0; it < rec.log_size.size(); ++it) {
      std::vector<PointIndex> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<PointIndex>(i);
      const auto& u = it == 0 ? std::vector<std::vector<PointIndex>>{all} : rec.regions[it - 1];
      for (std::size_t s = start; s < rec.log_size[it]; ++s) {
        const auto& q = log[s];
        if (q.kind != QueryKind::focused) continue;
        const int l = *q.level;
        CHECK(r.state.threshold(q.point) <= tau(l, sched));
        REQUIRE(static_cast<std::size_t>(l) < u.size());
        bool inside = false;
        for (PointIndex x : u[static_cast<std::size_t>(l)])
          for (BallId b : inst.fam.containing(x))
            inside = inside || (inst.fam.level(b) == l && inst.fam.contains(b, q.point));
        CHECK(inside);
      }
      start = rec.log_size[it];
    }
    CHECK(r.queries_used == log.size());
    CHECK(r.queries_used <= opts.budget);
  }
}

TEST_CASE("runs are deterministic") {
  const auto ps = grid_1d(50);
  const auto fam = BallFamily::intervals(ps);
  const auto eta = step_eta(ps, 0.37, 0.6);
  LabelSource a(eta, 5), b(eta, 5);
  const RunOptions opts{0.25, 3, 30, 8};
  CHECK(run(ps, fam, a, opts).to_json().dump() == run(ps, fam, b, opts).to_json().dump());
}

TEST_CASE("run rejects bad parameters") {
  const auto ps = grid_1d(8);
  const auto fam = BallFamily::intervals(ps);
  LabelSource labels(step_eta(ps, 0.5, 1.0), 1);
  CHECK_THROWS_AS(run(ps, fam, labels, {0.5, 0, 4, 1}), ConfigError);
  CHECK_THROWS_AS(run(ps, fam, labels, {1.0, 2, 4, 1}), ConfigError);
  CHECK_THROWS_AS(run(ps, fam, labels, {0.0, 2, 4, 1}), ConfigError);
  LabelSource short_source(std::vector<double>(5, 1.0), 1);
  CHECK_THROWS_AS(run(ps, fam, short_source, {0.5, 2, 4, 1}), Error);
}
