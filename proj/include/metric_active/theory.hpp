#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metric_active/bias.hpp"
#include "metric_active/core.hpp"
#include "metric_active/neighborhoods.hpp"
#include "metric_active/synth.hpp"

namespace metric_active {

inline constexpr std::size_t kDefaultCostCap = 200000;

// Throws CostCapError when the family holds more than `cap` balls.
void check_cost_cap(const BallFamily& fam, std::size_t cap);

// eta_X(B): mean of eta over the members of B.
double true_bias(BallId b, const BallFamily& fam, std::span<const double> eta);
double true_bias(BallId b, const BallFamily& fam, const EtaModel& model, const PointSet& ps);

// Exact comparisons on eta_X(B). eta is quantized to multiples of 2^-40 and
// summed in integers, so "eta_X(B) >= 0" is decided identically no matter
// how the members are enumerated.
class BiasOracle {
 public:
  BiasOracle(const BallFamily& fam, std::span<const double> eta);

  const BallFamily& family() const { return fam_; }
  double mean(BallId b) const;
  long long quantized_sum(BallId b) const;
  // sign(eta_X(B)) in {-1, 0, +1}
  int sign(BallId b) const;
  // s * eta_X(B) >= threshold
  bool at_least(BallId b, int s, double threshold) const;

  static long long quantize(double v);

 private:
  const BallFamily& fam_;
  std::vector<long long> q_;
  std::vector<long long> rank_prefix_;  // interval families only
};

// Balls whose finalized estimate breaks gamma-accuracy:
// +1 with eta_X <= 0, -1 with eta_X >= 0, or 0 with |eta_X| >= gamma.
std::vector<BallId> audit_gamma_accuracy(const EstimateTable& table, const BiasOracle& oracle, double gamma);

struct CriticalLevels {
  ExtLevel l1;
  ExtLevel l2;
  friend bool operator==(const CriticalLevels&, const CriticalLevels&) = default;
};

// L1(x), L2(x) by exhaustive scan of B(x). UndefinedSignError if eta(x) = 0.
CriticalLevels critical_levels(PointIndex x, const BiasOracle& oracle, std::span<const double> eta, double gamma);

// Critical levels of every point; points with eta = 0 get (inf, inf).
// Interval families use an O(n^2 log n) sweep, others the exhaustive scan.
std::vector<CriticalLevels> all_critical_levels(const BiasOracle& oracle, std::span<const double> eta, double gamma);

// Delta_l for l = 0..deepest_level(n), each sorted by index.
std::vector<std::vector<PointIndex>> boundary_sets(const BallFamily& fam, std::span<const ExtLevel> l2);
// Delta_l recomputed ball by ball from its definition.
std::vector<PointIndex> boundary_set(int level, const BallFamily& fam, std::span<const ExtLevel> l2);

// m_o(x); +infinity when L1 is infinite or L2 > lg(n / 2k).
double query_bound(const CriticalLevels& cl, std::span<const std::size_t> delta_sizes, std::size_t n,
                   std::size_t k);

// ceil((192 / gamma^2) ln(4 |B| / delta))
std::size_t required_k(double gamma, double delta, std::uint64_t family_size);

struct TheoremLevels {
  int l1 = 0;
  int l2 = 0;
};
// l1 = floor(lg(m / 32k)); l2 = the largest integer <= lg(n / 2k) with
// sum_{l = l1+1}^{l2} |Delta_l| tau_l < m / 8.
TheoremLevels theorem_levels(double m, std::size_t k, std::size_t n, std::span<const std::size_t> delta_sizes);

// Counts the 1D bounds are phrased in.
struct OneDBounds {
  std::string model;
  // monotonic
  double lambda_left = 0.0;
  double lambda = 0.0;
  double lambda_right = 0.0;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  std::size_t r_plus = 0;
  std::size_t r_minus = 0;
  // massart
  std::vector<std::size_t> n_j;
  // per point; nullopt where the lemma says nothing
  std::vector<std::size_t> r;
  std::vector<std::optional<double>> l1_bound;
  std::vector<std::optional<double>> l2_bound;

  // Upper bound on |Delta_level|.
  double delta_bound(int level, std::size_t n) const;
  nlohmann::json to_json() const;
};

// Monotonic1D or Massart1D only; DomainError otherwise.
OneDBounds oned_bounds(const EtaModel& model, const PointSet& ps, double gamma);

// |[x, lambda) cap X| for x < lambda, |(lambda, x] cap X| for x > lambda, 0 at lambda.
std::size_t points_to_boundary(const PointSet& ps, double lambda, double x);

// 64k * max(n / min(n+, n-), 2 lg(min(n+, n-) / min(r+, r-)))
double monotonic_theorem_budget(const OneDBounds& b, std::size_t n, std::size_t k);
// max(64k n / min n_j, 128 k (p - 1) lg((p - 1) / eps))
double massart_theorem_budget(const OneDBounds& b, std::size_t n, std::size_t k, double epsilon);

// Empirical dist(x, S): min |X_B| / n over B in B(x) meeting S.
double empirical_dist(PointIndex x, std::span<const PointIndex> s, const BallFamily& fam);

struct TheoryOptions {
  double gamma = 0.1;
  double delta = 0.1;
  std::size_t k = 1;
  std::size_t cost_cap = kDefaultCostCap;
};

struct TheoryReport {
  std::size_t n = 0;
  BallId family_size = 0;
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t k = 0;
  std::size_t required_k = 0;
  std::vector<double> eta;
  std::vector<int> s;
  std::vector<CriticalLevels> levels;
  std::vector<std::vector<PointIndex>> delta_sets;
  std::vector<double> m_o;
  std::optional<OneDBounds> oned;

  std::vector<ExtLevel> l2_values() const;
  std::vector<std::size_t> delta_sizes() const;
  nlohmann::json to_json() const;
};

// CostCapError when the family exceeds opts.cost_cap.
TheoryReport build_theory_report(const PointSet& ps, const BallFamily& fam, const EtaModel& model,
                                 const TheoryOptions& opts);
TheoryReport build_theory_report(const BallFamily& fam, std::span<const double> eta, const TheoryOptions& opts);

}  // namespace metric_active
