#include "metric_active/bias.hpp"

#include <algorithm>
#include <cmath>

#include "metric_active/csv.hpp"

namespace metric_active {

int sign_of(BiasEstimate e) {
  switch (e) {
    case BiasEstimate::negative:
      return -1;
    case BiasEstimate::zero:
      return 0;
    case BiasEstimate::positive:
      return 1;
    case BiasEstimate::unavailable:
      break;
  }
  throw Error("sign_of: estimate not available");
}

BiasEstimate estimate_from_sign(int s) {
  return s > 0 ? BiasEstimate::positive : (s < 0 ? BiasEstimate::negative : BiasEstimate::zero);
}

BiasEstimate qualitative_bias(double mean, double gamma) {
  if (std::abs(mean) >= gamma / 2.0) return mean > 0.0 ? BiasEstimate::positive : BiasEstimate::negative;
  return BiasEstimate::zero;
}

EstimateTable::EstimateTable(BallId num_balls, double gamma)
    : gamma_(gamma),
      estimate_(static_cast<std::size_t>(num_balls), BiasEstimate::unavailable),
      mean_(static_cast<std::size_t>(num_balls), 0.0) {}

std::optional<double> EstimateTable::mean(BallId b) const {
  if (!finalized(b)) return std::nullopt;
  return mean_[static_cast<std::size_t>(b)];
}

void EstimateTable::finalize(BallId b, double mean, bool from_empty_sample) {
  auto& e = estimate_.at(static_cast<std::size_t>(b));
  if (e != BiasEstimate::unavailable) throw Error("ball " + std::to_string(b) + " finalized twice");
  mean_[static_cast<std::size_t>(b)] = mean;
  e = from_empty_sample ? BiasEstimate::zero : qualitative_bias(mean, gamma_);
  ++finalized_;
  if (from_empty_sample) ++empty_;
}

void EstimateTable::inject_flip(BallId b) {
  auto& e = estimate_.at(static_cast<std::size_t>(b));
  switch (e) {
    case BiasEstimate::positive:
      e = BiasEstimate::negative;
      break;
    case BiasEstimate::negative:
    case BiasEstimate::zero:
      e = BiasEstimate::positive;
      break;
    case BiasEstimate::unavailable:
      throw Error("inject_flip: ball not finalized");
  }
}

std::vector<PointIndex> query_set(BallId b, const BallFamily& fam, const QueryState& state,
                                  const ThresholdSchedule& sched) {
  const double t = tau(fam.level(b), sched);
  std::vector<PointIndex> out;
  for (PointIndex z : fam.members(b))
    if (state.threshold(z) <= t) out.push_back(z);
  return out;
}

namespace {

struct GammaStats {
  std::size_t eligible = 0;
  std::size_t labeled = 0;
  long long label_sum = 0;
};

// Per-level prefix sums over sorted ranks so each interval's query set is
// summarized in O(1).
class IntervalGammaIndex {
 public:
  IntervalGammaIndex(const BallFamily& fam, const QueryState& state, const ThresholdSchedule& sched, int max_level)
      : fam_(fam) {
    const std::size_t n = fam.num_points();
    levels_.resize(static_cast<std::size_t>(max_level) + 1);
    for (int l = 0; l <= max_level; ++l) {
      auto& pre = levels_[static_cast<std::size_t>(l)];
      pre.assign(n + 1, {});
      const double t = tau(l, sched);
      for (std::size_t r = 0; r < n; ++r) {
        const PointIndex z = fam.sorted_order()[r];
        GammaStats s = pre[r];
        if (state.threshold(z) <= t) {
          ++s.eligible;
          if (state.is_queried(z)) {
            ++s.labeled;
            s.label_sum += state.label(z);
          }
        }
        pre[r + 1] = s;
      }
    }
  }

  GammaStats stats(BallId b, int level) const {
    auto [lo, hi] = fam_.rank_range(b);
    const auto& pre = levels_[static_cast<std::size_t>(level)];
    const auto& a = pre[static_cast<std::size_t>(lo)];
    const auto& z = pre[static_cast<std::size_t>(hi) + 1];
    return {z.eligible - a.eligible, z.labeled - a.labeled, z.label_sum - a.label_sum};
  }

 private:
  const BallFamily& fam_;
  std::vector<std::vector<GammaStats>> levels_;
};

}  // namespace

std::vector<BallId> update_bias_estimates(EstimateTable& table, const BallFamily& fam, const QueryState& state,
                                          const ThresholdSchedule& sched, std::optional<int> max_level) {
  std::vector<BallId> fresh;
  const int top = max_level ? std::min(*max_level, fam.top_level()) : fam.top_level();
  if (top < 0) return fresh;

  auto settle = [&](BallId b, const GammaStats& s) {
    if (s.labeled != s.eligible) return;
    if (s.eligible == 0) {
      table.finalize(b, 0.0, true);
    } else {
      table.finalize(b, static_cast<double>(s.label_sum) / static_cast<double>(s.eligible));
    }
    fresh.push_back(b);
  };

  if (fam.is_interval()) {
    IntervalGammaIndex index(fam, state, sched, top);
    for (int l = 0; l <= top; ++l) {
      for (BallId b : fam.at_level(l)) {
        if (!table.finalized(b)) settle(b, index.stats(b, l));
      }
    }
    std::sort(fresh.begin(), fresh.end());
    return fresh;
  }

  for (BallId b = 0; b < fam.size(); ++b) {
    if (table.finalized(b) || fam.level(b) > top) continue;
    GammaStats s;
    for (PointIndex z : query_set(b, fam, state, sched)) {
      ++s.eligible;
      if (state.is_queried(z)) {
        ++s.labeled;
        s.label_sum += state.label(z);
      }
    }
    settle(b, s);
  }
  return fresh;
}

void write_estimates_csv(std::ostream& out, const EstimateTable& table, const BallFamily& fam) {
  out << csv_header({"schema_version", "ball_id", "level", "member_count", "eta_hat", "estimate"}) << '\n';
  for (BallId b = 0; b < table.size(); ++b) {
    if (!table.finalized(b)) continue;
    CsvRow row;
    row.add(kCsvSchemaVersion)
        .add(static_cast<long long>(b))
        .add(fam.level(b))
        .add(static_cast<unsigned long>(fam.member_count(b)))
        .add(*table.mean(b))
        .add(sign_of(table.estimate(b)));
    out << row.str() << '\n';
  }
}

}  // namespace metric_active
