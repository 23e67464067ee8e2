#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metric_active/bias.hpp"
#include "metric_active/core.hpp"
#include "metric_active/neighborhoods.hpp"
#include "metric_active/sampling.hpp"
#include "metric_active/synth.hpp"

namespace metric_active {

// Per-(point, level) label y_l(x): unset (bottom), -1, 0, +1 or "!" (conflict).
enum class LabelValue : std::int8_t { unset, negative, zero, positive, conflict };

char to_char(LabelValue v);  // '_', '-', '0', '+', '!'

// PL_l(x) as a pair of flags.
struct LabelSet {
  bool negative = false;
  bool positive = false;
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// Possible labels at `level`: s is in the set iff some minimal ball of
// B_{<=level}(x) has estimate s. nullopt while any ball of B_{<=level}(x)
// is still unavailable.
std::optional<LabelSet> possible_labels(PointIndex x, int level, const BallFamily& fam, const EstimateTable& table);

// {+1} -> +1, {-1} -> -1, {} -> 0, {-1,+1} -> !
LabelValue provisional_label(LabelSet pl);

// Write-once table of y_l(x) for levels 0..max_level.
class LabelTable {
 public:
  LabelTable() = default;
  LabelTable(std::size_t n, int max_level);

  std::size_t size() const { return n_; }
  int max_level() const { return max_level_; }
  LabelValue get(PointIndex x, int level) const {
    return cells_[static_cast<std::size_t>(x) * stride() + static_cast<std::size_t>(level)];
  }
  std::span<const LabelValue> row(PointIndex x) const {
    return {cells_.data() + static_cast<std::size_t>(x) * stride(), stride()};
  }
  // Throws if the cell already holds a value or `v` is unset.
  void set(PointIndex x, int level, LabelValue v);

  friend bool operator==(const LabelTable&, const LabelTable&) = default;

 private:
  std::size_t stride() const { return static_cast<std::size_t>(max_level_) + 1; }
  std::size_t n_ = 0;
  int max_level_ = 0;
  std::vector<LabelValue> cells_;
};

// Final label: y_l(x) at the largest l where it is -1 or +1, else 0.
int final_label(std::span<const LabelValue> levels);
inline int final_label(PointIndex x, const LabelTable& table) { return final_label(table.row(x)); }

// Number of levels where the signed label differs from the previous signed one.
int mind_changes(std::span<const LabelValue> levels);

// U_0 = {x : y_0(x) unset}; U_l = {x : y_{l-1}(x) = !, y_l(x) unset} for
// 1 <= l <= max_level.
std::vector<std::vector<PointIndex>> uncertainty_regions(const LabelTable& table);

// Which levels the learner tracks.
//   analysed: up to the largest l with n / 2^(l+1) >= k, i.e. floor(lg(n / 2k)),
//             so every ball the learner estimates holds at least k points.
//   full:     down to deepest_level(n), where the singletons live.
enum class LevelCap { analysed, full };

const char* to_string(LevelCap cap);
LevelCap level_cap_from_string(const std::string& s);

// Deepest tracked level, clamped to [0, deepest_level(n)].
int tracked_max_level(std::size_t n, std::size_t k, LevelCap cap = LevelCap::analysed);

struct RunOptions {
  double gamma = 0.1;
  std::size_t k = 1;
  std::size_t budget = 0;
  std::uint64_t seed = 0;  // seeds the thresholds T_x
  LevelCap cap = LevelCap::analysed;
};

struct RunResult {
  std::vector<int> final_labels;
  std::size_t queries_used = 0;
  std::size_t focused_queries = 0;
  std::size_t background_queries = 0;
  std::vector<std::size_t> focused_per_level;
  std::vector<int> mind_change_counts;
  std::size_t iterations = 0;
  // Minimal balls consulted with an empty query set (finalized as 0).
  std::size_t empty_query_sets = 0;
  LabelTable labels;
  QueryState state;

  nlohmann::json to_json() const;
};

// Hook invoked after every main-loop iteration; used by verification.
class RunObserver {
 public:
  virtual ~RunObserver() = default;
  virtual void after_iteration(const LabelTable& labels, const QueryState& state,
                               const std::vector<std::vector<PointIndex>>& uncertainty) = 0;
};

// The active learner's main loop: one focused query at the lowest level with
// a nonempty uncertainty region, one background query, then label updates,
// until `budget` labels are obtained or every point is queried.
RunResult run(const PointSet& ps, const BallFamily& fam, LabelSource& labels, const RunOptions& opts,
              RunObserver* observer = nullptr);

// Ball estimates implied by a finished run: every ball up to the tracked
// level whose query set was fully labeled (none if nothing was queried).
// Matches what the run finalized.
EstimateTable final_estimates(const BallFamily& fam, const QueryState& state, const RunOptions& opts);

}  // namespace metric_active
