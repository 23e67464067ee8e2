#include "metric_active/labeling.hpp"

#include <algorithm>
#include <string>

namespace metric_active {

char to_char(LabelValue v) {
  switch (v) {
    case LabelValue::unset:
      return '_';
    case LabelValue::negative:
      return '-';
    case LabelValue::zero:
      return '0';
    case LabelValue::positive:
      return '+';
    case LabelValue::conflict:
      return '!';
  }
  return '?';
}

std::optional<LabelSet> possible_labels(PointIndex x, int level, const BallFamily& fam, const EstimateTable& table) {
  for (BallId b : fam.containing(x)) {
    if (fam.level(b) <= level && !table.finalized(b)) return std::nullopt;
  }
  LabelSet pl;
  for (BallId b : minimal_balls(x, level, fam)) {
    switch (table.estimate(b)) {
      case BiasEstimate::positive:
        pl.positive = true;
        break;
      case BiasEstimate::negative:
        pl.negative = true;
        break;
      default:
        break;
    }
  }
  return pl;
}

LabelValue provisional_label(LabelSet pl) {
  if (pl.positive && pl.negative) return LabelValue::conflict;
  if (pl.positive) return LabelValue::positive;
  if (pl.negative) return LabelValue::negative;
  return LabelValue::zero;
}

LabelTable::LabelTable(std::size_t n, int max_level)
    : n_(n), max_level_(max_level), cells_(n * (static_cast<std::size_t>(max_level) + 1), LabelValue::unset) {
  if (max_level < 0) throw Error("LabelTable: negative max level");
}

void LabelTable::set(PointIndex x, int level, LabelValue v) {
  if (level < 0 || level > max_level_) throw Error("LabelTable: level out of range");
  if (v == LabelValue::unset) throw Error("LabelTable: cannot reset a cell");
  auto& cell = cells_.at(static_cast<std::size_t>(x) * stride() + static_cast<std::size_t>(level));
  if (cell != LabelValue::unset) {
    throw Error("LabelTable: cell (" + std::to_string(x) + ", " + std::to_string(level) + ") written twice");
  }
  cell = v;
}

int final_label(std::span<const LabelValue> levels) {
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    if (*it == LabelValue::positive) return 1;
    if (*it == LabelValue::negative) return -1;
  }
  return 0;
}

int mind_changes(std::span<const LabelValue> levels) {
  int changes = 0;
  LabelValue last = LabelValue::unset;
  for (LabelValue v : levels) {
    if (v != LabelValue::positive && v != LabelValue::negative) continue;
    if (last != LabelValue::unset && v != last) ++changes;
    last = v;
  }
  return changes;
}

std::vector<std::vector<PointIndex>> uncertainty_regions(const LabelTable& table) {
  std::vector<std::vector<PointIndex>> u(static_cast<std::size_t>(table.max_level()) + 1);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto x = static_cast<PointIndex>(i);
    if (table.get(x, 0) == LabelValue::unset) u[0].push_back(x);
    for (int l = 1; l <= table.max_level(); ++l) {
      if (table.get(x, l - 1) == LabelValue::conflict && table.get(x, l) == LabelValue::unset) {
        u[static_cast<std::size_t>(l)].push_back(x);
      }
    }
  }
  return u;
}

const char* to_string(LevelCap cap) { return cap == LevelCap::full ? "full" : "analysed"; }

LevelCap level_cap_from_string(const std::string& s) {
  if (s == "analysed") return LevelCap::analysed;
  if (s == "full") return LevelCap::full;
  throw ConfigError("level_cap", "expected analysed or full, got '" + s + "'");
}

int tracked_max_level(std::size_t n, std::size_t k, LevelCap cap) {
  if (k == 0) throw Error("k must be at least 1");
  if (cap == LevelCap::full) return deepest_level(n);
  int l = 0;
  while (l + 1 < 62 && (static_cast<std::uint64_t>(k) << (l + 2)) <= n) ++l;
  return std::min(l, deepest_level(n));
}

nlohmann::json RunResult::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string row;
    for (LabelValue v : labels.row(static_cast<PointIndex>(i))) row.push_back(to_char(v));
    table.push_back(std::move(row));
  }
  return {{"final_labels", final_labels},
          {"queries_used", queries_used},
          {"focused_queries", focused_queries},
          {"background_queries", background_queries},
          {"focused_per_level", focused_per_level},
          {"mind_changes", mind_change_counts},
          {"iterations", iterations},
          {"empty_query_sets", empty_query_sets},
          {"max_level", labels.max_level()},
          {"label_table", std::move(table)}};
}

EstimateTable final_estimates(const BallFamily& fam, const QueryState& state, const RunOptions& opts) {
  EstimateTable table(fam.size(), opts.gamma);
  // No query means no iteration, so no estimate was ever updated.
  if (state.queries_used() == 0) return table;
  const ThresholdSchedule sched{opts.k, fam.num_points()};
  update_bias_estimates(table, fam, state, sched, tracked_max_level(fam.num_points(), opts.k, opts.cap));
  return table;
}

}  // namespace metric_active
