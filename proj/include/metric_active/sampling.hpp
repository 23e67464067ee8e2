#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "metric_active/core.hpp"
#include "metric_active/neighborhoods.hpp"
#include "metric_active/synth.hpp"

namespace metric_active {

enum class QueryKind { focused, background };

const char* to_string(QueryKind kind);

struct QueryRecord {
  PointIndex point = 0;
  QueryKind kind = QueryKind::background;
  std::optional<int> level;  // set for focused queries

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

// T_x thresholds, the queried set Q, observed labels and the query log.
class QueryState {
 public:
  QueryState() = default;
  explicit QueryState(std::vector<double> thresholds);

  std::size_t size() const { return thresholds_.size(); }
  double threshold(PointIndex x) const { return thresholds_[static_cast<std::size_t>(x)]; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  bool is_queried(PointIndex x) const { return queried_[static_cast<std::size_t>(x)] != 0; }
  // +1 / -1 for queried points, 0 otherwise.
  int label(PointIndex x) const { return labels_[static_cast<std::size_t>(x)]; }
  const std::vector<QueryRecord>& log() const { return log_; }
  std::size_t queries_used() const { return log_.size(); }
  bool exhausted() const { return log_.size() == thresholds_.size(); }

  // Draws the label of x from `labels` and appends to the log. Querying a
  // point twice is a logic error.
  int query(PointIndex x, QueryKind kind, std::optional<int> level, LabelSource& labels);

  // Orders points by (T, index): the order every query procedure follows.
  bool before(PointIndex a, PointIndex b) const {
    const double ta = threshold(a), tb = threshold(b);
    return ta < tb || (ta == tb && a < b);
  }

 private:
  std::vector<double> thresholds_;
  std::vector<std::uint8_t> queried_;
  std::vector<std::int8_t> labels_;
  std::vector<QueryRecord> log_;
};

// Fresh state with T_x i.i.d. uniform on [0, 1) from mt19937_64(seed).
QueryState init_state(std::size_t n, std::uint64_t seed);

struct ThresholdSchedule {
  std::size_t k = 1;
  std::size_t n = 1;
};

// tau_l = min(2^(l+2) k / n, 1)
double tau(int level, const ThresholdSchedule& sched);

// Queries the unqueried point of smallest T in
//   S = U_{x in U} U_{B in B_level(x)} {z in X_B : T_z <= tau_level},
// or returns nullopt (no query) when S \ Q is empty.
std::optional<PointIndex> focused_query(QueryState& state, const BallFamily& fam, int level,
                                        std::span<const PointIndex> uncertain, LabelSource& labels,
                                        const ThresholdSchedule& sched);

// Queries the globally smallest-T unqueried point; nullopt iff Q = X.
std::optional<PointIndex> background_query(QueryState& state, LabelSource& labels);

// step, point_index, kind, level, T_value, label
void write_query_log_csv(std::ostream& out, const QueryState& state, bool with_header = true);

}  // namespace metric_active
