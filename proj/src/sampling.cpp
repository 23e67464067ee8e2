#include "metric_active/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "metric_active/csv.hpp"

namespace metric_active {

const char* to_string(QueryKind kind) { return kind == QueryKind::focused ? "focused" : "background"; }

QueryState::QueryState(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)), queried_(thresholds_.size(), 0), labels_(thresholds_.size(), 0) {}

int QueryState::query(PointIndex x, QueryKind kind, std::optional<int> level, LabelSource& labels) {
  auto& q = queried_.at(static_cast<std::size_t>(x));
  if (q) throw Error("point " + std::to_string(x) + " queried twice");
  q = 1;
  const int y = labels.sample(x);
  labels_[static_cast<std::size_t>(x)] = static_cast<std::int8_t>(y);
  log_.push_back({x, kind, kind == QueryKind::focused ? level : std::nullopt});
  return y;
}

QueryState init_state(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("init_state: need at least one point");
  return QueryState(uniform_draws(n, seed));
}

double tau(int level, const ThresholdSchedule& sched) {
  if (level < 0) throw Error("tau: negative level");
  const double v = std::ldexp(static_cast<double>(sched.k), level + 2) / static_cast<double>(sched.n);
  return std::min(v, 1.0);
}

std::optional<PointIndex> focused_query(QueryState& state, const BallFamily& fam, int level,
                                        std::span<const PointIndex> uncertain, LabelSource& labels,
                                        const ThresholdSchedule& sched) {
  const double t = tau(level, sched);
  std::optional<PointIndex> best;
  for (PointIndex x : uncertain) {
    for (BallId b : fam.containing(x)) {
      if (fam.level(b) != level) continue;
      for (PointIndex z : fam.members(b)) {
        if (state.threshold(z) > t || state.is_queried(z)) continue;
        if (!best || state.before(z, *best)) best = z;
      }
    }
  }
  if (best) state.query(*best, QueryKind::focused, level, labels);
  return best;
}

std::optional<PointIndex> background_query(QueryState& state, LabelSource& labels) {
  std::optional<PointIndex> best;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto z = static_cast<PointIndex>(i);
    if (state.is_queried(z)) continue;
    if (!best || state.before(z, *best)) best = z;
  }
  if (best) state.query(*best, QueryKind::background, std::nullopt, labels);
  return best;
}

void write_query_log_csv(std::ostream& out, const QueryState& state, bool with_header) {
  if (with_header) {
    out << csv_header({"schema_version", "step", "point_index", "kind", "level", "T_value", "label"}) << '\n';
  }
  std::size_t step = 0;
  for (const auto& rec : state.log()) {
    CsvRow row;
    row.add(kCsvSchemaVersion).add(static_cast<unsigned long>(++step)).add(rec.point).add(to_string(rec.kind));
    if (rec.level) {
      row.add(*rec.level);
    } else {
      row.empty();
    }
    row.add(state.threshold(rec.point)).add(state.label(rec.point));
    out << row.str() << '\n';
  }
}

}  // namespace metric_active
