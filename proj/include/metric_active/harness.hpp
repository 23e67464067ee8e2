#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metric_active/labeling.hpp"
#include "metric_active/neighborhoods.hpp"
#include "metric_active/synth.hpp"
#include "metric_active/theory.hpp"

namespace metric_active {

// A budget entry: a fixed count, "all" (= n) or "theorem" (the 1D
// label-complexity expression evaluated on the instance).
struct BudgetSpec {
  enum class Kind { fixed, all, theorem };
  Kind kind = Kind::fixed;
  std::size_t value = 0;

  std::string str() const;
  friend bool operator==(const BudgetSpec&, const BudgetSpec&) = default;
};

struct ExperimentConfig {
  EtaModel model = Monotonic1D{};
  std::vector<std::size_t> n_values{256};
  std::size_t dimension = 1;
  Placement placement = Placement::uniform_random;
  // When unset the point set is redrawn from every run seed.
  std::optional<std::uint64_t> point_seed;
  double cluster_center = 0.5;
  // Explicit points for the custom model.
  std::optional<PointSet> points;

  FamilyKind family = FamilyKind::intervals;
  double gamma = 0.2;
  double delta = 0.1;
  std::optional<std::size_t> k = 16;  // nullopt: required_k on the instance
  std::vector<BudgetSpec> budgets{BudgetSpec{BudgetSpec::Kind::all, 0}};
  std::vector<std::uint64_t> seeds{1};
  bool repeat_queries = false;
  LevelCap level_cap = LevelCap::analysed;
  double epsilon = 0.05;
  std::filesystem::path output = "out";
  std::size_t cost_cap = kDefaultCostCap;
};

// Parses and validates a JSON config. ConfigError names the offending field
// path, e.g. "generator.boundaries[1]".
ExperimentConfig parse_config(const nlohmann::json& j);
// Reads JSON from `path` (empty path: defaults), then applies `overrides`
// (a JSON object merged over the file) before parsing.
ExperimentConfig load_config(const std::filesystem::path& path, const nlohmann::json& overrides = nlohmann::json::object());

// Seeds derived from a run seed.
std::uint64_t label_seed_for(std::uint64_t seed);
std::uint64_t point_seed_for(std::uint64_t seed);

struct Instance {
  PointSet points;
  EtaModel model;
  std::vector<double> eta;
  BallFamily family;
  std::size_t base_n = 0;  // before replication
  std::size_t k = 0;
  std::size_t required_k = 0;
};

Instance build_instance(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed);

// Resolved query budget; "theorem" falls back to n when the expression is
// unbounded.
std::size_t resolve_budget(const BudgetSpec& spec, const Instance& inst, const ExperimentConfig& cfg);

struct MetricsRow {
  std::size_t n = 0;
  std::size_t base_n = 0;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::size_t required_k = 0;
  double gamma = 0.0;
  std::size_t queries_used = 0;
  std::size_t focused_queries = 0;
  std::size_t background_queries = 0;
  std::size_t iterations = 0;
  std::size_t in_scope = 0;  // |{x : |eta(x)| >= gamma}|
  std::size_t correct = 0;
  std::size_t mistakes = 0;            // in scope, labeled with the wrong sign
  std::size_t unlabeled_in_scope = 0;  // in scope, final label 0
  std::size_t mind_changes = 0;
  std::size_t empty_query_sets = 0;

  double correct_fraction() const;
  // Every in-scope point carries its Bayes label.
  bool success() const { return correct == in_scope; }
};

std::string metrics_header();
std::string metrics_csv_row(const MetricsRow& row);
MetricsRow compute_metrics(const Instance& inst, const RunResult& result, std::size_t budget, std::uint64_t seed,
                           double gamma);

struct RunArtifacts {
  Instance instance;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  RunResult result;
  MetricsRow metrics;
};

RunArtifacts run_single(const ExperimentConfig& cfg, std::size_t n, const BudgetSpec& budget, std::uint64_t seed,
                        RunObserver* observer = nullptr);
RunArtifacts run_single(const ExperimentConfig& cfg, const Instance& inst, const BudgetSpec& budget,
                        std::uint64_t seed, RunObserver* observer = nullptr);

// One row per (n, budget, seed), sorted in that order. Writes metrics.csv,
// per_point.csv, query_log.csv, theory.json and timings.csv to cfg.output.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

struct SweepCell {
  std::size_t n = 0;
  std::size_t budget = 0;
  std::size_t runs = 0;
  double mean_mistakes = 0.0;
  double mean_unlabeled = 0.0;
  double success_fraction = 0.0;
};

struct SweepResult {
  std::vector<MetricsRow> rows;
  std::vector<SweepCell> cells;
  // per n: smallest budget whose success fraction is at least 0.9
  std::vector<std::pair<std::size_t, std::optional<std::size_t>>> min_success_budget;
};

inline constexpr double kSweepSuccessShare = 0.9;

SweepResult aggregate_sweep(std::vector<MetricsRow> rows);
// Cross product of n, budgets and seeds. Writes metrics.csv and sweep.csv.
SweepResult sweep(const ExperimentConfig& cfg);

// Focused queries outside {z in Delta_l : T_z <= tau_l}.
std::vector<std::string> focused_region_violations(const RunResult& result, const TheoryReport& report,
                                                   std::size_t k);
// Cells y_l(x) that contradict the critical-level guarantees.
std::vector<std::string> critical_level_violations(const RunResult& result, const TheoryReport& report);

struct CheckResult {
  std::string name;
  std::string cell;  // "n=.. budget=.. seed=.."; empty for global checks
  bool passed = true;
  std::string detail;
};

struct VerifyOptions {
  bool inject_fault = false;
  // Exhaustive cross-checks of the theory oracle are skipped above this n.
  std::size_t literal_check_limit = 128;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::optional<BallId> injected_ball;
  std::vector<BallId> audit_violations;

  bool passed() const;
  nlohmann::json to_json() const;
};

// Runs every (n, budget, seed) cell with invariant checks against the theory
// oracle. CostCapError when an instance is too large for brute force.
// Writes verify_report.json, verify.csv and theory.json.
VerifyReport verify(const ExperimentConfig& cfg, const VerifyOptions& opts = {});

}  // namespace metric_active
