#include "metric_active/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metric_active/sampling.hpp"

namespace metric_active {

namespace {

constexpr double kQuantum = 1099511627776.0;  // 2^40
constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json level_json(const ExtLevel& l) {
  if (l.is_infinite()) return "inf";
  return l.value();
}

nlohmann::json count_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

int eta_sign(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace

void check_cost_cap(const BallFamily& fam, std::size_t cap) {
  if (static_cast<std::uint64_t>(fam.size()) > cap) {
    throw CostCapError("family has " + std::to_string(fam.size()) + " balls, above the brute-force cap of " +
                       std::to_string(cap) + "; reduce n or raise theory.cost_cap");
  }
}

double true_bias(BallId b, const BallFamily& fam, std::span<const double> eta) {
  const auto members = fam.members(b);
  double sum = 0.0;
  for (PointIndex x : members) sum += eta[static_cast<std::size_t>(x)];
  return sum / static_cast<double>(members.size());
}

double true_bias(BallId b, const BallFamily& fam, const EtaModel& model, const PointSet& ps) {
  return true_bias(b, fam, eta_values(model, ps));
}

long long BiasOracle::quantize(double v) { return std::llround(v * kQuantum); }

BiasOracle::BiasOracle(const BallFamily& fam, std::span<const double> eta) : fam_(fam) {
  if (eta.size() != fam.num_points()) throw Error("BiasOracle: eta size does not match the family");
  if (fam.num_points() >= (std::size_t{1} << 22)) throw Error("BiasOracle: too many points for exact sums");
  q_.reserve(eta.size());
  for (double v : eta) q_.push_back(quantize(v));
  if (fam.is_interval()) {
    rank_prefix_.assign(q_.size() + 1, 0);
    for (std::size_t r = 0; r < q_.size(); ++r) {
      rank_prefix_[r + 1] = rank_prefix_[r] + q_[static_cast<std::size_t>(fam.sorted_order()[r])];
    }
  }
}

long long BiasOracle::quantized_sum(BallId b) const {
  if (fam_.is_interval()) {
    auto [lo, hi] = fam_.rank_range(b);
    return rank_prefix_[static_cast<std::size_t>(hi) + 1] - rank_prefix_[static_cast<std::size_t>(lo)];
  }
  long long s = 0;
  for (PointIndex x : fam_.members(b)) s += q_[static_cast<std::size_t>(x)];
  return s;
}

double BiasOracle::mean(BallId b) const {
  return static_cast<double>(quantized_sum(b)) / kQuantum / static_cast<double>(fam_.member_count(b));
}

int BiasOracle::sign(BallId b) const {
  const long long s = quantized_sum(b);
  return s > 0 ? 1 : (s < 0 ? -1 : 0);
}

bool BiasOracle::at_least(BallId b, int s, double threshold) const {
  return s * quantized_sum(b) >= quantize(threshold) * static_cast<long long>(fam_.member_count(b));
}

std::vector<BallId> audit_gamma_accuracy(const EstimateTable& table, const BiasOracle& oracle, double gamma) {
  std::vector<BallId> bad;
  for (BallId b = 0; b < table.size(); ++b) {
    if (!table.finalized(b)) continue;
    bool violates = false;
    switch (table.estimate(b)) {
      case BiasEstimate::positive:
        violates = oracle.sign(b) <= 0;
        break;
      case BiasEstimate::negative:
        violates = oracle.sign(b) >= 0;
        break;
      case BiasEstimate::zero:
        violates = oracle.at_least(b, 1, gamma) || oracle.at_least(b, -1, gamma);
        break;
      case BiasEstimate::unavailable:
        break;
    }
    if (violates) bad.push_back(b);
  }
  return bad;
}

CriticalLevels critical_levels(PointIndex x, const BiasOracle& oracle, std::span<const double> eta, double gamma) {
  const int s = eta_sign(eta[static_cast<std::size_t>(x)]);
  if (s == 0) throw UndefinedSignError("critical levels need eta(x) != 0 (point " + std::to_string(x) + ")");
  const BallFamily& fam = oracle.family();
  const auto balls = fam.containing(x);
  const std::size_t m = balls.size();
  std::vector<int> level(m);
  std::vector<char> good(m), nonneg(m);
  for (std::size_t i = 0; i < m; ++i) {
    level[i] = fam.level(balls[i]);
    good[i] = oracle.at_least(balls[i], s, gamma);
    nonneg[i] = oracle.at_least(balls[i], s, 0.0);
  }

  CriticalLevels out{ExtLevel::infinite(), ExtLevel::infinite()};
  for (std::size_t o = 0; o < m; ++o) {
    if (!good[o] || ExtLevel(level[o]) >= out.l1) continue;
    bool witness = true;
    for (std::size_t i = 0; i < m && witness; ++i) {
      if (!good[i] && fam.is_subset(balls[i], balls[o])) witness = false;
    }
    if (witness) out.l1 = ExtLevel(level[o]);
  }

  // For each wrong-sign ball: lowest level of a right-or-zero-sign ball of
  // B(x) strictly inside it (INT_MAX if none).
  std::vector<int> rescue(m, std::numeric_limits<int>::max());
  for (std::size_t i = 0; i < m; ++i) {
    if (nonneg[i]) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (nonneg[j] && level[j] < rescue[i] && fam.is_subset(balls[j], balls[i])) rescue[i] = level[j];
    }
  }
  const int top = deepest_level(fam.num_points()) + 1;
  for (int l = 0; l <= top; ++l) {
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      if (nonneg[i]) continue;
      if (level[i] >= l) ok = false;
      else if (rescue[i] > l) ok = false;
    }
    if (ok) {
      out.l2 = ExtLevel(l);
      break;
    }
  }
  return out;
}

namespace {

// Sweep over ranks for interval families. For a point at rank r with sign s:
//  - [i, j] is an L1 witness iff no bad run [a, b] (s * eta_X < gamma) has
//    i <= a <= r <= b <= j, so the widest witness per left end comes from
//    the first bad right end of each row a;
//  - L2 = max(level(w) + 1, level(F)) where w is the shortest wrong-sign run
//    through r and F the smallest over inclusion-minimal wrong runs [i, W(i)]
//    of the longest right-or-zero-sign run through r inside it.
std::vector<CriticalLevels> interval_critical_levels(const BiasOracle& oracle, std::span<const double> eta,
                                                     double gamma) {
  const BallFamily& fam = oracle.family();
  const std::size_t n = fam.num_points();
  const int ni = static_cast<int>(n);
  std::vector<long long> prefix(n + 1, 0);
  std::vector<int> sgn(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = static_cast<std::size_t>(fam.sorted_order()[r]);
    prefix[r + 1] = prefix[r] + BiasOracle::quantize(eta[x]);
    sgn[r] = eta_sign(eta[x]);
  }
  const long long gq = BiasOracle::quantize(gamma);
  auto sum = [&](int a, int b) { return prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)]; };

  std::vector<CriticalLevels> by_rank(n, {ExtLevel::infinite(), ExtLevel::infinite()});
  for (int s : {1, -1}) {
    if (std::find(sgn.begin(), sgn.end(), s) == sgn.end()) continue;
    // next_nn[a * n + p]: smallest b >= p with s * eta_X([a, b]) >= 0, or n.
    std::vector<int> next_nn(n * n, ni);
    for (int a = 0; a < ni; ++a) {
      int next = ni;
      for (int b = ni - 1; b >= a; --b) {
        if (s * sum(a, b) >= 0) next = b;
        next_nn[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)] = next;
      }
    }
    auto nn = [&](int a, int p) {
      return p >= ni ? ni : next_nn[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(p)];
    };

    std::vector<int> first_bad(n, ni), first_wrong(n, ni);
    for (int r = ni - 1; r >= 0; --r) {
      for (int a = 0; a <= r; ++a) {
        const long long v = s * sum(a, r);
        if (v < gq * (r - a + 1)) first_bad[static_cast<std::size_t>(a)] = r;
        if (v < 0) first_wrong[static_cast<std::size_t>(a)] = r;
      }
      if (sgn[static_cast<std::size_t>(r)] != s) continue;
      auto& out = by_rank[static_cast<std::size_t>(r)];

      int limit = ni;
      for (int i = r; i >= 0; --i) {
        limit = std::min(limit, first_bad[static_cast<std::size_t>(i)]);
        if (limit <= r) break;
        out.l1 = std::min(out.l1, ExtLevel(level_of(static_cast<std::size_t>(limit - i), n)));
      }

      int shortest = std::numeric_limits<int>::max();
      for (int i = 0; i <= r; ++i) {
        const int w = first_wrong[static_cast<std::size_t>(i)];
        if (w < ni) shortest = std::min(shortest, w - i + 1);
      }
      if (shortest == std::numeric_limits<int>::max()) {
        out.l2 = ExtLevel(0);
        continue;
      }
      const int top = deepest_level(n) + 1;
      for (int l = level_of(static_cast<std::size_t>(shortest), n) + 1; l <= top; ++l) {
        const int len = static_cast<int>(level_min_size(l, n));
        bool ok = true;
        int best_end = ni;
        for (int a = r; a >= 0 && ok; --a) {
          best_end = std::min(best_end, nn(a, std::max(r, a + len - 1)));
          const int w = first_wrong[static_cast<std::size_t>(a)];
          if (w < ni && best_end > w) ok = false;
        }
        if (ok) {
          out.l2 = ExtLevel(l);
          break;
        }
      }
    }
  }

  std::vector<CriticalLevels> out(n);
  for (std::size_t r = 0; r < n; ++r) out[static_cast<std::size_t>(fam.sorted_order()[r])] = by_rank[r];
  return out;
}

}  // namespace

std::vector<CriticalLevels> all_critical_levels(const BiasOracle& oracle, std::span<const double> eta, double gamma) {
  const BallFamily& fam = oracle.family();
  if (fam.is_interval()) return interval_critical_levels(oracle, eta, gamma);
  std::vector<CriticalLevels> out(fam.num_points(), {ExtLevel::infinite(), ExtLevel::infinite()});
  for (std::size_t x = 0; x < out.size(); ++x) {
    if (eta[x] != 0.0) out[x] = critical_levels(static_cast<PointIndex>(x), oracle, eta, gamma);
  }
  return out;
}

std::vector<PointIndex> boundary_set(int level, const BallFamily& fam, std::span<const ExtLevel> l2) {
  std::vector<char> in(fam.num_points(), 0);
  for (BallId b : fam.at_level(level)) {
    const auto members = fam.members(b);
    const bool hit = std::any_of(members.begin(), members.end(),
                                 [&](PointIndex x) { return l2[static_cast<std::size_t>(x)] >= level; });
    if (hit)
      for (PointIndex x : members) in[static_cast<std::size_t>(x)] = 1;
  }
  std::vector<PointIndex> out;
  for (std::size_t x = 0; x < in.size(); ++x)
    if (in[x]) out.push_back(static_cast<PointIndex>(x));
  return out;
}

std::vector<std::vector<PointIndex>> boundary_sets(const BallFamily& fam, std::span<const ExtLevel> l2) {
  const std::size_t n = fam.num_points();
  const int top = deepest_level(n);
  std::vector<std::vector<PointIndex>> out(static_cast<std::size_t>(top) + 1);
  if (!fam.is_interval()) {
    for (int l = 0; l <= top; ++l) out[static_cast<std::size_t>(l)] = boundary_set(l, fam, l2);
    return out;
  }
  // Union of level-l runs through rank r is [r - M + 1, r + M - 1] with M
  // the largest level-l size.
  for (int l = 0; l <= top; ++l) {
    if (!level_is_populated(l, n)) continue;
    const long long reach = static_cast<long long>(level_max_size(l, n)) - 1;
    std::vector<int> diff(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
      if (!(l2[static_cast<std::size_t>(fam.sorted_order()[r])] >= l)) continue;
      const long long lo = std::max<long long>(0, static_cast<long long>(r) - reach);
      const long long hi = std::min<long long>(static_cast<long long>(n) - 1, static_cast<long long>(r) + reach);
      ++diff[static_cast<std::size_t>(lo)];
      --diff[static_cast<std::size_t>(hi) + 1];
    }
    auto& set = out[static_cast<std::size_t>(l)];
    int cover = 0;
    for (std::size_t r = 0; r < n; ++r) {
      cover += diff[r];
      if (cover > 0) set.push_back(fam.sorted_order()[r]);
    }
    std::sort(set.begin(), set.end());
  }
  return out;
}

double query_bound(const CriticalLevels& cl, std::span<const std::size_t> delta_sizes, std::size_t n,
                   std::size_t k) {
  if (cl.l1.is_infinite() || cl.l2.is_infinite()) return kInf;
  const int l2 = cl.l2.value();
  if (static_cast<double>(l2) > std::log2(static_cast<double>(n) / (2.0 * static_cast<double>(k)))) return kInf;
  double sum = 0.0;
  for (int l = 0; l <= l2 && static_cast<std::size_t>(l) < delta_sizes.size(); ++l) {
    sum += std::ldexp(static_cast<double>(delta_sizes[static_cast<std::size_t>(l)]), l);
  }
  return 32.0 * static_cast<double>(k) * std::max(std::ldexp(1.0, cl.l1.value()), sum / static_cast<double>(n));
}

std::size_t required_k(double gamma, double delta, std::uint64_t family_size) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("required_k: gamma must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("required_k: delta must lie in (0, 1)");
  if (family_size < 1) throw DomainError("required_k: family size must be at least 1");
  const double k = (192.0 / (gamma * gamma)) * std::log(4.0 * static_cast<double>(family_size) / delta);
  return static_cast<std::size_t>(std::ceil(k));
}

TheoremLevels theorem_levels(double m, std::size_t k, std::size_t n, std::span<const std::size_t> delta_sizes) {
  if (!(m > 0.0)) throw DomainError("theorem_levels: m must be positive");
  TheoremLevels out;
  out.l1 = static_cast<int>(std::floor(std::log2(m / (32.0 * static_cast<double>(k)))));
  const int top = static_cast<int>(std::floor(std::log2(static_cast<double>(n) / (2.0 * static_cast<double>(k)))));
  const ThresholdSchedule sched{k, n};
  auto delta_at = [&](int l) {
    return l >= 0 && static_cast<std::size_t>(l) < delta_sizes.size()
               ? static_cast<double>(delta_sizes[static_cast<std::size_t>(l)])
               : 0.0;
  };
  for (int l2 = top;; --l2) {
    double sum = 0.0;
    for (int l = out.l1 + 1; l <= l2; ++l) {
      if (l >= 0) sum += delta_at(l) * tau(l, sched);
    }
    if (sum < m / 8.0) {
      out.l2 = l2;
      return out;
    }
  }
}

std::size_t points_to_boundary(const PointSet& ps, double lambda, double x) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double c = ps.coord(static_cast<PointIndex>(i));
    if (x < lambda && c >= x && c < lambda) ++count;
    if (x > lambda && c > lambda && c <= x) ++count;
  }
  return count;
}

double OneDBounds::delta_bound(int level, std::size_t n) const {
  const double nd = static_cast<double>(n);
  if (model == "monotonic1d") return std::ldexp(4.0 * nd, -level);
  return std::ldexp(static_cast<double>(n_j.size() - 1) * nd, 2 - level);
}

nlohmann::json OneDBounds::to_json() const {
  auto opt = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& b : v) a.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
    return a;
  };
  nlohmann::json j{{"model", model}, {"r", r}, {"l1_bound", opt(l1_bound)}, {"l2_bound", opt(l2_bound)}};
  if (model == "monotonic1d") {
    j["lambda_left"] = lambda_left;
    j["lambda"] = lambda;
    j["lambda_right"] = lambda_right;
    j["n_plus"] = n_plus;
    j["n_minus"] = n_minus;
    j["r_plus"] = r_plus;
    j["r_minus"] = r_minus;
  } else {
    j["n_j"] = n_j;
  }
  return j;
}

OneDBounds oned_bounds(const EtaModel& model, const PointSet& ps, double gamma) {
  if (ps.dim() != 1) throw DimensionError("1D bounds need one-dimensional points");
  const std::size_t n = ps.size();
  const double nd = static_cast<double>(n);
  OneDBounds out;
  out.r.assign(n, 0);
  out.l1_bound.assign(n, std::nullopt);
  out.l2_bound.assign(n, std::nullopt);
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = ps.coord(static_cast<PointIndex>(i));
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  // |{c : lo < c < hi}| style counts over the sorted coordinates
  auto count_in = [&](double lo, bool lo_closed, double hi, bool hi_closed) {
    auto first = lo_closed ? std::lower_bound(sorted.begin(), sorted.end(), lo)
                           : std::upper_bound(sorted.begin(), sorted.end(), lo);
    auto last = hi_closed ? std::upper_bound(sorted.begin(), sorted.end(), hi)
                          : std::lower_bound(sorted.begin(), sorted.end(), hi);
    return last > first ? static_cast<std::size_t>(last - first) : std::size_t{0};
  };

  if (const auto* m = std::get_if<Monotonic1D>(&model)) {
    out.model = "monotonic1d";
    const auto a = monotonic_anchors(*m, gamma);
    out.lambda_left = a.left;
    out.lambda = a.zero;
    out.lambda_right = a.right;
    out.n_minus = count_in(0.0, true, a.left, true);
    out.n_plus = count_in(a.right, true, 1.0, true);
    out.r_plus = out.r_minus = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xs[i];
      if (x < a.zero) out.r[i] = count_in(x, true, a.zero, false);
      if (x > a.zero) out.r[i] = count_in(a.zero, false, x, true);
      if (out.r[i] > 0) out.l2_bound[i] = std::log2(nd / static_cast<double>(out.r[i]));
      if (x >= a.right) {
        out.l1_bound[i] = std::log2(nd / static_cast<double>(out.n_plus));
        out.r_plus = std::min(out.r_plus, out.r[i]);
      }
      if (x <= a.left) {
        out.l1_bound[i] = std::log2(nd / static_cast<double>(out.n_minus));
        out.r_minus = std::min(out.r_minus, out.r[i]);
      }
    }
    if (out.n_plus == 0) out.r_plus = 0;
    if (out.n_minus == 0) out.r_minus = 0;
    return out;
  }

  if (const auto* m = std::get_if<Massart1D>(&model)) {
    out.model = "massart1d";
    std::vector<double> edges{0.0};
    edges.insert(edges.end(), m->boundaries.begin(), m->boundaries.end());
    edges.push_back(1.0);
    const std::size_t p = m->pieces();
    out.n_j.assign(p, 0);
    for (std::size_t j = 0; j < p; ++j) {
      out.n_j[j] = count_in(edges[j], j == 0, edges[j + 1], j + 1 == p);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xs[i];
      std::size_t j = 0;
      while (j + 1 < p && x > edges[j + 1]) ++j;
      if (j + 1 < p && x == edges[j + 1]) continue;  // on a boundary
      std::size_t r = std::numeric_limits<std::size_t>::max();
      if (j > 0) r = std::min(r, count_in(edges[j], false, x, true));
      if (j + 1 < p) r = std::min(r, count_in(x, true, edges[j + 1], false));
      out.l1_bound[i] = std::log2(nd / static_cast<double>(out.n_j[j]));
      if (r != std::numeric_limits<std::size_t>::max()) {
        out.r[i] = r;
        out.l2_bound[i] = std::log2(nd / static_cast<double>(r));
      }
    }
    return out;
  }

  throw DomainError("1D bounds need a monotonic1d or massart1d model, got " + model_name(model));
}

double monotonic_theorem_budget(const OneDBounds& b, std::size_t n, std::size_t k) {
  const auto nm = std::min(b.n_plus, b.n_minus);
  const auto rm = std::min(b.r_plus, b.r_minus);
  if (nm == 0 || rm == 0) return kInf;
  const double first = static_cast<double>(n) / static_cast<double>(nm);
  const double second = 2.0 * std::log2(static_cast<double>(nm) / static_cast<double>(rm));
  return 64.0 * static_cast<double>(k) * std::max(first, second);
}

double massart_theorem_budget(const OneDBounds& b, std::size_t n, std::size_t k, double epsilon) {
  if (b.n_j.empty()) return kInf;
  const auto nmin = *std::min_element(b.n_j.begin(), b.n_j.end());
  if (nmin == 0) return kInf;
  const double kd = static_cast<double>(k);
  double m = 64.0 * kd * static_cast<double>(n) / static_cast<double>(nmin);
  const double p1 = static_cast<double>(b.n_j.size() - 1);
  if (p1 > 0) m = std::max(m, 128.0 * kd * p1 * std::log2(p1 / epsilon));
  return m;
}

double empirical_dist(PointIndex x, std::span<const PointIndex> s, const BallFamily& fam) {
  if (s.empty()) throw DomainError("empirical_dist: S must be nonempty");
  const double n = static_cast<double>(fam.num_points());
  if (fam.is_interval()) {
    int best = std::numeric_limits<int>::max();
    for (PointIndex z : s) best = std::min(best, std::abs(fam.rank(z) - fam.rank(x)) + 1);
    return best / n;
  }
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (BallId b : fam.containing(x)) {
    if (fam.member_count(b) >= best) continue;
    for (PointIndex z : s) {
      if (fam.contains(b, z)) {
        best = fam.member_count(b);
        break;
      }
    }
  }
  return static_cast<double>(best) / n;
}

std::vector<ExtLevel> TheoryReport::l2_values() const {
  std::vector<ExtLevel> out;
  out.reserve(levels.size());
  for (const auto& cl : levels) out.push_back(cl.l2);
  return out;
}

std::vector<std::size_t> TheoryReport::delta_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& d : delta_sets) out.push_back(d.size());
  return out;
}

nlohmann::json TheoryReport::to_json() const {
  nlohmann::json l1 = nlohmann::json::array(), l2 = nlohmann::json::array(), mo = nlohmann::json::array();
  for (const auto& cl : levels) {
    l1.push_back(level_json(cl.l1));
    l2.push_back(level_json(cl.l2));
  }
  for (double v : m_o) mo.push_back(count_json(v));
  nlohmann::json j{{"n", n},
                   {"family_size", family_size},
                   {"gamma", gamma},
                   {"delta", delta},
                   {"k", k},
                   {"required_k", required_k},
                   {"k_below_required", k < required_k},
                   {"eta", eta},
                   {"s", s},
                   {"L1", std::move(l1)},
                   {"L2", std::move(l2)},
                   {"delta_sizes", delta_sizes()},
                   {"delta_sets", delta_sets},
                   {"m_o", std::move(mo)}};
  if (oned) j["oned"] = oned->to_json();
  return j;
}

TheoryReport build_theory_report(const BallFamily& fam, std::span<const double> eta, const TheoryOptions& opts) {
  check_cost_cap(fam, opts.cost_cap);
  TheoryReport rep;
  rep.n = fam.num_points();
  rep.family_size = fam.size();
  rep.gamma = opts.gamma;
  rep.delta = opts.delta;
  rep.k = opts.k;
  rep.required_k = required_k(opts.gamma, opts.delta, static_cast<std::uint64_t>(fam.size()));
  rep.eta.assign(eta.begin(), eta.end());
  for (double v : eta) rep.s.push_back(eta_sign(v));
  const BiasOracle oracle(fam, eta);
  rep.levels = all_critical_levels(oracle, eta, opts.gamma);
  const auto l2 = rep.l2_values();
  rep.delta_sets = boundary_sets(fam, l2);
  const auto sizes = rep.delta_sizes();
  for (const auto& cl : rep.levels) rep.m_o.push_back(query_bound(cl, sizes, rep.n, opts.k));
  return rep;
}

TheoryReport build_theory_report(const PointSet& ps, const BallFamily& fam, const EtaModel& model,
                                 const TheoryOptions& opts) {
  const auto eta = eta_values(model, ps);
  TheoryReport rep = build_theory_report(fam, eta, opts);
  if (std::holds_alternative<Monotonic1D>(model) || std::holds_alternative<Massart1D>(model)) {
    rep.oned = oned_bounds(model, ps, opts.gamma);
  }
  return rep;
}

}  // namespace metric_active
