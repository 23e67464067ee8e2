#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "metric_active/core.hpp"

namespace metric_active {

// The n data points. Index i in [0, n) is the identity of a point
// everywhere downstream.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dim, std::vector<double> coords);
  static PointSet from_rows(const std::vector<std::vector<double>>& rows);
  static PointSet from_1d(std::vector<double> xs) { return PointSet(1, std::move(xs)); }

  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> operator[](PointIndex i) const {
    return {coords_.data() + static_cast<std::size_t>(i) * dim_, dim_};
  }
  double coord(PointIndex i, std::size_t axis = 0) const {
    return coords_[static_cast<std::size_t>(i) * dim_ + axis];
  }
  const std::vector<double>& raw() const { return coords_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

// Whitespace-separated coordinates, one point per line, '#' starts a comment.
PointSet parse_points(std::istream& in);
PointSet load_points(const std::filesystem::path& path);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Level of a ball holding member_count of the n points:
// the unique l with n / 2^(l+1) <= member_count < n / 2^l, and 0 for the full set.
int level_of(std::size_t member_count, std::size_t n);

// Smallest and largest member counts that land on `level`. The range is
// empty (min > max) when no integer count maps there.
std::size_t level_min_size(int level, std::size_t n);
std::size_t level_max_size(int level, std::size_t n);
bool level_is_populated(int level, std::size_t n);

// Highest level any ball can occupy; singletons live here.
int deepest_level(std::size_t n);

struct BallRecord {
  std::vector<PointIndex> members;
  int level = 0;
};

enum class FamilyKind { intervals, euclidean, custom };

const char* to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& s);

// The deduplicated ball collection with level and containment indexes.
//
// Interval families are kept implicit: ball ids enumerate contiguous runs
// [lo, hi] of the coordinate-sorted order, so a family over n points costs
// O(n) memory no matter how many of its n(n+1)/2 balls are touched. Other
// families store member sets explicitly.
class BallFamily {
 public:
  static BallFamily intervals(const PointSet& ps);
  static BallFamily euclidean(const PointSet& ps);
  // Deduplicates the given member sets; empty sets are rejected.
  static BallFamily from_member_sets(std::size_t n, std::vector<std::vector<PointIndex>> sets);

  FamilyKind kind() const { return kind_; }
  bool is_interval() const { return kind_ == FamilyKind::intervals; }
  std::size_t num_points() const { return n_; }
  BallId size() const;

  int level(BallId b) const;
  std::size_t member_count(BallId b) const;
  std::vector<PointIndex> members(BallId b) const;  // sorted by index
  BallRecord record(BallId b) const { return {members(b), level(b)}; }
  bool contains(BallId b, PointIndex x) const;
  // members(a) is a subset of members(b) (not necessarily strict).
  bool is_subset(BallId a, BallId b) const;

  // B(x): every ball containing x.
  std::vector<BallId> containing(PointIndex x) const;
  // B_l: every ball at the given level.
  std::vector<BallId> at_level(int level) const;
  std::map<int, std::size_t> level_histogram() const;
  int top_level() const;

  // Interval families only.
  std::span<const PointIndex> sorted_order() const { return order_; }
  int rank(PointIndex x) const { return rank_[static_cast<std::size_t>(x)]; }
  std::pair<int, int> rank_range(BallId b) const;
  BallId interval_id(int lo, int hi) const;

  nlohmann::json to_json() const;

 private:
  void check_id(BallId b) const;
  void require_interval(const char* what) const;
  void index_explicit();

  FamilyKind kind_ = FamilyKind::custom;
  std::size_t n_ = 0;

  // interval storage
  std::vector<PointIndex> order_;
  std::vector<int> rank_;

  // explicit storage
  std::vector<std::vector<PointIndex>> sets_;
  std::vector<int> levels_;
  std::vector<std::vector<BallId>> containing_;
  std::map<int, std::vector<BallId>> by_level_;
};

// Balls B in B_{<=level}(x) such that no other B' in B_{<=level}(x) has a
// strictly smaller member set.
std::vector<BallId> minimal_balls(PointIndex x, int level, const BallFamily& fam);

}  // namespace metric_active
