#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metric_active/harness.hpp"
#include "reference_loop.hpp"

using namespace metric_active;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("metric_active_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error_field(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

json small_monotonic() {
  return json{{"generator", {{"model", "monotonic1d"}, {"n", 48}}}, {"gamma", 0.2}, {"k", 2},
              {"budgets", json::array({0, "all"})}, {"seeds", json::array({1, 2})}};
}

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(config_error_field({{"gamma", 1.5}}) == "gamma");
  CHECK(config_error_field({{"delta", 0}}) == "delta");
  CHECK(config_error_field({{"seeds", json::array()}}) == "seeds");
  CHECK(config_error_field({{"budgets", json::array({10, "lots"})}}) == "budgets[1]");
  CHECK(config_error_field({{"budgets", json::array({-3})}}) == "budgets[0]");
  CHECK(config_error_field({{"k", 0}}) == "k");
  CHECK(config_error_field({{"k", "many"}}) == "k");
  CHECK(config_error_field({{"colour", "red"}}) == "colour");
  CHECK(config_error_field({{"generator", {{"model", "spiral"}}}}) == "generator.model");
  CHECK(config_error_field({{"generator", {{"model", "massart1d"}, {"signs", json::array({1, "x"})}}}}) ==
        "generator.signs[1]");
  CHECK(config_error_field({{"generator", {{"model", "massart1d"}, {"eta0", 0.1}}}, {"gamma", 0.2}}).rfind(
            "generator", 0) == 0);
  CHECK(config_error_field({{"generator", {{"model", "curved2d"}}}}) == "family");
  CHECK(config_error_field({{"generator", {{"model", "curved2d"}}}, {"family", "euclidean"},
                            {"budgets", json::array({"theorem"})}}) == "budgets");
  CHECK(config_error_field({{"level_cap", "deep"}}) == "level_cap");
  CHECK(config_error_field({{"theory", {{"cap", 3}}}}) == "theory.cap");
  CHECK(config_error_field(small_monotonic()).empty());
}

TEST_CASE("overrides merge over the file") {
  const auto dir = scratch("overrides");
  fs::create_directories(dir);
  const auto file = dir / "cfg.json";
  std::ofstream(file) << "// comment\n" << small_monotonic().dump();
  const auto cfg = load_config(file, {{"gamma", 0.3}, {"k", "auto"}, {"generator", {{"n", 20}}}});
  CHECK(cfg.gamma == 0.3);
  CHECK_FALSE(cfg.k.has_value());
  CHECK(cfg.n_values == std::vector<std::size_t>{20});
  CHECK(std::holds_alternative<Monotonic1D>(cfg.model));
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
  const auto inst = build_instance(cfg, 20, 1);
  CHECK(inst.k == inst.required_k);
  CHECK(inst.required_k == required_k(0.3, cfg.delta, static_cast<std::uint64_t>(inst.family.size())));
}

TEST_CASE("budget 0 leaves every in-scope point unlabeled") {
  auto cfg = parse_config(small_monotonic());
  const auto a = run_single(cfg, 48, {BudgetSpec::Kind::fixed, 0}, 1);
  CHECK(a.metrics.queries_used == 0);
  CHECK(a.metrics.mistakes == 0);
  CHECK(a.metrics.unlabeled_in_scope == a.metrics.in_scope);
  CHECK(a.metrics.in_scope > 0);
  CHECK_FALSE(a.metrics.success());
}

TEST_CASE("noiseless labels with budget n") {
  const json j{{"generator", {{"model", "massart1d"}, {"n", 60}, {"boundaries", {0.3, 0.7}},
                              {"signs", {1, -1, 1}}, {"eta0", 1.0}}},
               {"gamma", 0.3}, {"k", 2}, {"budgets", {"all"}}, {"seeds", {4, 5, 6}}};
  for (const char* cap : {"analysed", "full"}) {
    auto jj = j;
    jj["level_cap"] = cap;
    const auto cfg = parse_config(jj);
    for (std::uint64_t seed : cfg.seeds) {
      const auto a = run_single(cfg, 60, cfg.budgets[0], seed);
      CAPTURE(cap);
      CAPTURE(seed);
      CHECK(a.metrics.queries_used == 60);

      // replay with the straight-line loop
      LabelSource replay(a.instance.eta, label_seed_for(seed));
      const auto ref = testing::reference_run(a.instance.family, replay,
                                              {cfg.gamma, a.instance.k, a.budget, seed, cfg.level_cap});
      CHECK(ref.final_labels == a.result.final_labels);

      if (cfg.level_cap == LevelCap::full) {
        // singletons are tracked and exact, so every point is settled
        CHECK(a.metrics.mistakes == 0);
        CHECK(a.metrics.success());
        continue;
      }
      // Under the analysed cap a point that is still '!' at the last
      // tracked level keeps the sign of an earlier, larger ball.
      const int top = a.result.labels.max_level();
      for (PointIndex x = 0; x < 60; ++x) {
        const int y = a.result.final_labels[static_cast<std::size_t>(x)];
        if (y == -bayes_label(a.instance.eta[static_cast<std::size_t>(x)]))
          CHECK(a.result.labels.get(x, top) == LabelValue::conflict);
      }
    }
  }
}

TEST_CASE("experiment rows and files") {
  auto j = small_monotonic();
  const auto dir = scratch("run");
  j["output"] = (dir / "a").string();
  const auto cfg = parse_config(j);
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.mistakes + r.correct + r.unlabeled_in_scope == r.in_scope);
    CHECK(r.queries_used <= r.budget);
    CHECK(r.queries_used == r.focused_queries + r.background_queries);
  }
  // (n, budget, seed) order; two seeds differ only in run columns
  CHECK(rows[0].budget == 0);
  CHECK(rows[0].seed == 1);
  CHECK(rows[1].seed == 2);
  CHECK(rows[0].n == rows[1].n);
  CHECK(rows[0].k == rows[1].k);
  CHECK(rows[0].gamma == rows[1].gamma);

  for (const char* f : {"metrics.csv", "per_point.csv", "query_log.csv", "theory.json", "timings.csv"})
    CHECK(fs::exists(dir / "a" / f));
  const auto metrics = slurp(dir / "a" / "metrics.csv");
  CHECK(metrics.rfind(metrics_header() + "\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
  std::istringstream lines(metrics);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(line.rfind("1,", 0) == 0);
  const auto theory = json::parse(slurp(dir / "a" / "theory.json"));
  CHECK(theory["schema_version"] == 1);
  CHECK(theory["instances"].size() == 2);

  SUBCASE("re-running byte-reproduces the CSVs") {
    j["output"] = (dir / "b").string();
    run_experiment(parse_config(j));
    for (const char* f : {"metrics.csv", "per_point.csv", "query_log.csv", "theory.json"})
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("sweep aggregation") {
  auto row = [](std::size_t n, std::size_t budget, std::uint64_t seed, std::size_t mistakes, bool ok) {
    MetricsRow r;
    r.n = n;
    r.budget = budget;
    r.seed = seed;
    r.in_scope = 10;
    r.mistakes = mistakes;
    r.correct = ok ? 10 : 10 - mistakes - 1;
    r.unlabeled_in_scope = ok ? 0 : 1;
    return r;
  };
  std::vector<MetricsRow> rows;
  for (std::uint64_t s = 0; s < 10; ++s) {
    rows.push_back(row(100, 50, s, s < 5 ? 1 : 0, s >= 5));
    rows.push_back(row(100, 80, s, 0, s != 3));
    rows.push_back(row(200, 80, s, 2, false));
  }
  const auto res = aggregate_sweep(rows);
  REQUIRE(res.cells.size() == 3);
  CHECK(res.cells[0].mean_mistakes == 0.5);
  CHECK(res.cells[0].success_fraction == 0.5);
  CHECK(res.cells[1].success_fraction == 0.9);
  CHECK(res.cells[1].mean_unlabeled == doctest::Approx(0.1));
  REQUIRE(res.min_success_budget.size() == 2);
  CHECK(res.min_success_budget[0] == std::pair<std::size_t, std::optional<std::size_t>>{100, 80});
  CHECK_FALSE(res.min_success_budget[1].second.has_value());

  SUBCASE("a single cell sweep matches run_experiment") {
    auto j = small_monotonic();
    j["budgets"] = {"all"};
    j["seeds"] = {3};
    j["output"] = scratch("sweep").string();
    const auto cfg = parse_config(j);
    const auto sw = sweep(cfg);
    REQUIRE(sw.rows.size() == 1);
    const auto single = run_single(cfg, 48, cfg.budgets[0], 3).metrics;
    CHECK(metrics_csv_row(sw.rows[0]) == metrics_csv_row(single));
    CHECK(fs::exists(cfg.output / "sweep.csv"));
  }
}

TEST_CASE("theorem budget") {
  auto j = small_monotonic();
  j["generator"]["n"] = 256;
  j["budgets"] = {"theorem"};
  const auto cfg = parse_config(j);
  const auto inst = build_instance(cfg, 256, 1);
  const auto b = oned_bounds(inst.model, inst.points, cfg.gamma);
  const double expect = monotonic_theorem_budget(b, 256, inst.k);
  CHECK(resolve_budget(cfg.budgets[0], inst, cfg) ==
        (std::isfinite(expect) ? static_cast<std::size_t>(std::ceil(expect)) : 256));
  CHECK(resolve_budget({BudgetSpec::Kind::all, 0}, inst, cfg) == 256);
  CHECK(resolve_budget({BudgetSpec::Kind::fixed, 17}, inst, cfg) == 17);
}

TEST_CASE("repeat mode replicates points") {
  auto j = small_monotonic();
  j["repeat_queries"] = true;
  j["gamma"] = 0.5;
  const auto cfg = parse_config(j);
  const auto inst = build_instance(cfg, 48, 1);
  CHECK(inst.base_n == 48);
  CHECK(inst.points.size() == 48 * 4);
  CHECK(inst.family.num_points() == 48 * 4);
}

TEST_CASE("verify") {
  auto j = small_monotonic();
  j["generator"]["n"] = 64;
  j["seeds"] = {1};
  j["output"] = scratch("verify").string();
  const auto cfg = parse_config(j);

  SUBCASE("default instance passes") {
    const auto rep = verify(cfg);
    for (const auto& c : rep.checks) {
      CAPTURE(c.name);
      CAPTURE(c.detail);
      CHECK(c.passed);
    }
    CHECK(rep.passed());
    CHECK(fs::exists(cfg.output / "verify_report.json"));
    CHECK(fs::exists(cfg.output / "verify.csv"));
  }
  SUBCASE("an injected fault is reported") {
    VerifyOptions opts;
    opts.inject_fault = true;
    const auto rep = verify(cfg, opts);
    CHECK_FALSE(rep.passed());
    REQUIRE(rep.injected_ball.has_value());
    CHECK(std::find(rep.audit_violations.begin(), rep.audit_violations.end(), *rep.injected_ball) !=
          rep.audit_violations.end());
  }
  SUBCASE("instances over the cost cap are refused") {
    auto small_cap = j;
    small_cap["theory"] = {{"cost_cap", 100}};
    CHECK_THROWS_AS(verify(parse_config(small_cap)), CostCapError);
  }
}

TEST_CASE("audited runs satisfy the conditional guarantees") {
  const std::vector<json> generators{
      {{"model", "monotonic1d"}, {"n", 128}, {"slope", 20.0}},
      {{"model", "massart1d"}, {"n", 256}, {"boundaries", {0.3, 0.6}}, {"signs", {1, -1, 1}}, {"eta0", 0.9}},
  };
  for (const auto& g : generators) {
    const auto cfg = parse_config({{"generator", g}, {"gamma", 0.5}, {"k", 16}, {"budgets", {"all"}}});
    const std::size_t n = cfg.n_values[0];
    std::size_t clean = 0, focused = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto a = run_single(cfg, n, cfg.budgets[0], seed);
      const auto& inst = a.instance;
      const RunOptions opts{cfg.gamma, inst.k, a.budget, seed, cfg.level_cap};
      const BiasOracle oracle(inst.family, inst.eta);
      if (!audit_gamma_accuracy(final_estimates(inst.family, a.result.state, opts), oracle, cfg.gamma).empty()) continue;
      ++clean;
      const auto report = build_theory_report(inst.family, inst.eta, {cfg.gamma, cfg.delta, inst.k, cfg.cost_cap});
      for (const auto& q : a.result.state.log()) focused += q.kind == QueryKind::focused;
      CAPTURE(seed);
      CHECK(focused_region_violations(a.result, report, inst.k).empty());
      CHECK(critical_level_violations(a.result, report).empty());
    }
    // enough clean audits that the checks above are not vacuous
    CHECK(clean >= 5);
    CHECK(focused > 100);
  }
}
