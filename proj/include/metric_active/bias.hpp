#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "metric_active/core.hpp"
#include "metric_active/neighborhoods.hpp"
#include "metric_active/sampling.hpp"

namespace metric_active {

// Qualitative bias y(B): unavailable (bottom) until finalized, then -1, 0, +1.
enum class BiasEstimate : std::int8_t { unavailable, negative, zero, positive };

int sign_of(BiasEstimate e);  // -1, 0, +1; throws for unavailable
BiasEstimate estimate_from_sign(int s);

// sign(mean) if |mean| >= gamma / 2, else 0.
BiasEstimate qualitative_bias(double mean, double gamma);

// Write-once per-ball bias estimates.
class EstimateTable {
 public:
  EstimateTable(BallId num_balls, double gamma);

  BallId size() const { return static_cast<BallId>(estimate_.size()); }
  double gamma() const { return gamma_; }
  BiasEstimate estimate(BallId b) const { return estimate_.at(static_cast<std::size_t>(b)); }
  bool finalized(BallId b) const { return estimate(b) != BiasEstimate::unavailable; }
  std::optional<double> mean(BallId b) const;
  std::size_t finalized_count() const { return finalized_; }
  // Balls finalized from an empty query set (estimate 0, no evidence).
  std::size_t empty_finalizations() const { return empty_; }

  // Sets mean and estimate; a ball can only be finalized once.
  void finalize(BallId b, double mean, bool from_empty_sample = false);

  // Test hook: negates a finalized estimate (0 becomes +1).
  void inject_flip(BallId b);

 private:
  double gamma_;
  std::vector<BiasEstimate> estimate_;
  std::vector<double> mean_;
  std::size_t finalized_ = 0;
  std::size_t empty_ = 0;
};

// Gamma(B) = {z in X_B : T_z <= tau_level(B)}
std::vector<PointIndex> query_set(BallId b, const BallFamily& fam, const QueryState& state,
                                  const ThresholdSchedule& sched);

// Finalizes every still-unavailable ball whose query set is fully labeled
// (an empty query set finalizes as 0). Balls above `max_level` are left
// alone. Returns the ids finalized by this call.
std::vector<BallId> update_bias_estimates(EstimateTable& table, const BallFamily& fam, const QueryState& state,
                                          const ThresholdSchedule& sched,
                                          std::optional<int> max_level = std::nullopt);

// ball_id, level, member_count, eta_hat, estimate (finalized balls only)
void write_estimates_csv(std::ostream& out, const EstimateTable& table, const BallFamily& fam);

}  // namespace metric_active
