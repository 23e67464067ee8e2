#include "metric_active/neighborhoods.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

namespace metric_active {

PointSet::PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw DimensionError("point dimension must be at least 1");
  if (coords_.empty()) throw Error("a point set needs at least one point");
  if (coords_.size() % dim_ != 0) throw DimensionError("coordinate count is not a multiple of the dimension");
}

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("a point set needs at least one point");
  const std::size_t dim = rows.front().size();
  std::vector<double> coords;
  coords.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw DimensionError("points have differing dimensions");
    coords.insert(coords.end(), r.begin(), r.end());
  }
  return PointSet(dim, std::move(coords));
}

PointSet parse_points(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error("line " + std::to_string(lineno) + ": not a number: '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return PointSet::from_rows(rows);
}

PointSet load_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open points file " + path.string());
  return parse_points(in);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

int level_of(std::size_t member_count, std::size_t n) {
  if (member_count == 0 || member_count > n) {
    throw InvalidBallError("member count " + std::to_string(member_count) + " outside [1, " + std::to_string(n) +
                           "]");
  }
  // Smallest l with member_count * 2^(l+1) >= n; for l >= 1 minimality also
  // gives member_count * 2^l < n, and l = 0 absorbs the full set.
  int l = 0;
  while ((static_cast<std::uint64_t>(member_count) << (l + 1)) < n) ++l;
  return l;
}

std::size_t level_min_size(int level, std::size_t n) {
  if (level >= 62) return 1;
  const std::uint64_t den = std::uint64_t{1} << (level + 1);
  return std::max<std::size_t>(1, static_cast<std::size_t>((n + den - 1) / den));
}

std::size_t level_max_size(int level, std::size_t n) {
  if (level == 0) return n;
  if (level >= 62) return 0;
  const std::uint64_t den = std::uint64_t{1} << level;
  // largest integer strictly below n / 2^level
  return static_cast<std::size_t>((n + den - 1) / den) - 1;
}

bool level_is_populated(int level, std::size_t n) {
  return level >= 0 && level_min_size(level, n) <= level_max_size(level, n);
}

int deepest_level(std::size_t n) { return level_of(1, n); }

const char* to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::intervals:
      return "intervals";
    case FamilyKind::euclidean:
      return "euclidean";
    case FamilyKind::custom:
      return "custom";
  }
  return "custom";
}

FamilyKind family_kind_from_string(const std::string& s) {
  if (s == "intervals") return FamilyKind::intervals;
  if (s == "euclidean") return FamilyKind::euclidean;
  throw ConfigError("family", "unknown family kind '" + s + "' (expected intervals or euclidean)");
}

BallFamily BallFamily::intervals(const PointSet& ps) {
  if (ps.dim() != 1) throw DimensionError("interval families need 1-dimensional points");
  BallFamily f;
  f.kind_ = FamilyKind::intervals;
  f.n_ = ps.size();
  f.order_.resize(f.n_);
  std::iota(f.order_.begin(), f.order_.end(), 0);
  std::stable_sort(f.order_.begin(), f.order_.end(),
                   [&](PointIndex a, PointIndex b) { return ps.coord(a) < ps.coord(b); });
  f.rank_.resize(f.n_);
  for (std::size_t r = 0; r < f.n_; ++r) f.rank_[static_cast<std::size_t>(f.order_[r])] = static_cast<int>(r);
  return f;
}

BallFamily BallFamily::euclidean(const PointSet& ps) {
  const std::size_t n = ps.size();
  std::vector<std::vector<PointIndex>> sets;
  std::vector<std::pair<double, PointIndex>> by_dist(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t z = 0; z < n; ++z) {
      by_dist[z] = {euclidean_distance(ps[static_cast<PointIndex>(c)], ps[static_cast<PointIndex>(z)]),
                    static_cast<PointIndex>(z)};
    }
    std::sort(by_dist.begin(), by_dist.end());
    // One ball per distinct radius: all points at distance <= r.
    for (std::size_t end = 0; end < n;) {
      std::size_t next = end + 1;
      while (next < n && by_dist[next].first == by_dist[end].first) ++next;
      std::vector<PointIndex> members;
      members.reserve(next);
      for (std::size_t i = 0; i < next; ++i) members.push_back(by_dist[i].second);
      sets.push_back(std::move(members));
      end = next;
    }
  }
  BallFamily f = from_member_sets(n, std::move(sets));
  f.kind_ = FamilyKind::euclidean;
  return f;
}

BallFamily BallFamily::from_member_sets(std::size_t n, std::vector<std::vector<PointIndex>> sets) {
  BallFamily f;
  f.kind_ = FamilyKind::custom;
  f.n_ = n;
  std::set<std::vector<PointIndex>> seen;
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.empty()) throw InvalidBallError("ball with no data points");
    if (s.front() < 0 || static_cast<std::size_t>(s.back()) >= n) throw InvalidBallError("member index out of range");
    if (seen.insert(s).second) f.sets_.push_back(std::move(s));
  }
  f.index_explicit();
  return f;
}

void BallFamily::index_explicit() {
  levels_.resize(sets_.size());
  containing_.assign(n_, {});
  by_level_.clear();
  for (std::size_t b = 0; b < sets_.size(); ++b) {
    levels_[b] = level_of(sets_[b].size(), n_);
    by_level_[levels_[b]].push_back(static_cast<BallId>(b));
    for (PointIndex x : sets_[b]) containing_[static_cast<std::size_t>(x)].push_back(static_cast<BallId>(b));
  }
}

BallId BallFamily::size() const {
  if (is_interval()) return static_cast<BallId>(n_) * static_cast<BallId>(n_ + 1) / 2;
  return static_cast<BallId>(sets_.size());
}

void BallFamily::check_id(BallId b) const {
  if (b < 0 || b >= size()) throw InvalidBallError("ball id " + std::to_string(b) + " out of range");
}

void BallFamily::require_interval(const char* what) const {
  if (!is_interval()) throw Error(std::string(what) + " is only defined for interval families");
}

std::pair<int, int> BallFamily::rank_range(BallId b) const {
  require_interval("rank_range");
  check_id(b);
  const auto n = static_cast<BallId>(n_);
  // Runs starting at lo occupy ids [start(lo), start(lo) + n - lo).
  auto start = [n](BallId lo) { return lo * n - lo * (lo - 1) / 2; };
  BallId lo_min = 0, lo_max = n - 1;
  while (lo_min < lo_max) {
    const BallId mid = (lo_min + lo_max + 1) / 2;
    if (start(mid) <= b) {
      lo_min = mid;
    } else {
      lo_max = mid - 1;
    }
  }
  const BallId lo = lo_min;
  return {static_cast<int>(lo), static_cast<int>(lo + (b - start(lo)))};
}

BallId BallFamily::interval_id(int lo, int hi) const {
  require_interval("interval_id");
  if (lo < 0 || hi < lo || static_cast<std::size_t>(hi) >= n_) throw InvalidBallError("bad rank range");
  const auto n = static_cast<BallId>(n_);
  const BallId l = lo;
  return l * n - l * (l - 1) / 2 + (hi - lo);
}

int BallFamily::level(BallId b) const {
  check_id(b);
  if (is_interval()) return level_of(member_count(b), n_);
  return levels_[static_cast<std::size_t>(b)];
}

std::size_t BallFamily::member_count(BallId b) const {
  if (is_interval()) {
    auto [lo, hi] = rank_range(b);
    return static_cast<std::size_t>(hi - lo + 1);
  }
  check_id(b);
  return sets_[static_cast<std::size_t>(b)].size();
}

std::vector<PointIndex> BallFamily::members(BallId b) const {
  if (is_interval()) {
    auto [lo, hi] = rank_range(b);
    std::vector<PointIndex> m(order_.begin() + lo, order_.begin() + hi + 1);
    std::sort(m.begin(), m.end());
    return m;
  }
  check_id(b);
  return sets_[static_cast<std::size_t>(b)];
}

bool BallFamily::contains(BallId b, PointIndex x) const {
  if (is_interval()) {
    auto [lo, hi] = rank_range(b);
    const int r = rank(x);
    return lo <= r && r <= hi;
  }
  check_id(b);
  const auto& s = sets_[static_cast<std::size_t>(b)];
  return std::binary_search(s.begin(), s.end(), x);
}

bool BallFamily::is_subset(BallId a, BallId b) const {
  if (is_interval()) {
    auto [alo, ahi] = rank_range(a);
    auto [blo, bhi] = rank_range(b);
    return blo <= alo && ahi <= bhi;
  }
  check_id(a);
  check_id(b);
  const auto& sa = sets_[static_cast<std::size_t>(a)];
  const auto& sb = sets_[static_cast<std::size_t>(b)];
  return sa.size() <= sb.size() && std::includes(sb.begin(), sb.end(), sa.begin(), sa.end());
}

std::vector<BallId> BallFamily::containing(PointIndex x) const {
  if (is_interval()) {
    std::vector<BallId> out;
    const int r = rank(x);
    const int n = static_cast<int>(n_);
    out.reserve(static_cast<std::size_t>(r + 1) * static_cast<std::size_t>(n - r));
    for (int lo = 0; lo <= r; ++lo)
      for (int hi = r; hi < n; ++hi) out.push_back(interval_id(lo, hi));
    return out;
  }
  return containing_.at(static_cast<std::size_t>(x));
}

std::vector<BallId> BallFamily::at_level(int level) const {
  if (is_interval()) {
    std::vector<BallId> out;
    if (!level_is_populated(level, n_)) return out;
    const auto smin = static_cast<int>(level_min_size(level, n_));
    const auto smax = static_cast<int>(level_max_size(level, n_));
    const int n = static_cast<int>(n_);
    for (int lo = 0; lo < n; ++lo)
      for (int s = smin; s <= smax && lo + s <= n; ++s) out.push_back(interval_id(lo, lo + s - 1));
    std::sort(out.begin(), out.end());
    return out;
  }
  auto it = by_level_.find(level);
  return it == by_level_.end() ? std::vector<BallId>{} : it->second;
}

std::map<int, std::size_t> BallFamily::level_histogram() const {
  std::map<int, std::size_t> h;
  if (is_interval()) {
    // n - s + 1 runs of each length s.
    for (std::size_t s = 1; s <= n_; ++s) h[level_of(s, n_)] += n_ - s + 1;
    return h;
  }
  for (const auto& [lvl, ids] : by_level_) h[lvl] = ids.size();
  return h;
}

int BallFamily::top_level() const {
  if (is_interval()) return deepest_level(n_);
  return by_level_.empty() ? 0 : by_level_.rbegin()->first;
}

nlohmann::json BallFamily::to_json() const {
  nlohmann::json balls = nlohmann::json::array();
  for (BallId b = 0; b < size(); ++b) {
    balls.push_back({{"id", b}, {"members", members(b)}, {"level", level(b)}});
  }
  return {{"kind", to_string(kind_)}, {"n", n_}, {"balls", std::move(balls)}};
}

std::vector<BallId> minimal_balls(PointIndex x, int level, const BallFamily& fam) {
  std::vector<BallId> out;
  if (level < 0) return out;
  if (fam.is_interval()) {
    // B_{<=level}(x) is every run through x with at least
    // level_min_size(level) members; the minimal ones are exactly the runs
    // of that length.
    const int n = static_cast<int>(fam.num_points());
    const int m = static_cast<int>(level_min_size(level, fam.num_points()));
    const int r = fam.rank(x);
    for (int lo = std::max(0, r - m + 1); lo <= std::min(r, n - m); ++lo) out.push_back(fam.interval_id(lo, lo + m - 1));
    return out;
  }
  std::vector<BallId> scope;
  for (BallId b : fam.containing(x))
    if (fam.level(b) <= level) scope.push_back(b);
  for (BallId b : scope) {
    bool minimal = true;
    for (BallId other : scope) {
      if (other != b && fam.member_count(other) < fam.member_count(b) && fam.is_subset(other, b)) {
        minimal = false;
        break;
      }
    }
    if (minimal) out.push_back(b);
  }
  return out;
}

}  // namespace metric_active
