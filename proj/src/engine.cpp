// Indexed implementation of the learner's main loop.
//
// The loop never materializes balls. Readiness of y_l(x) reduces to "no
// pending point in reach_l(x)", where pending_l holds the unqueried points
// with T <= tau_l and reach_l(x) is the union of the level-l balls through
// x. Ball estimates never change once their query set is labeled, so they
// are evaluated lazily the first time a label computation needs them.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>

#include "metric_active/labeling.hpp"

namespace metric_active {
namespace {

struct Candidate {
  double t = std::numeric_limits<double>::infinity();
  PointIndex point = std::numeric_limits<PointIndex>::max();

  bool valid() const { return point != std::numeric_limits<PointIndex>::max(); }
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.t < b.t || (a.t == b.t && a.point < b.point);
  }
};

// Point-update / range-min over positions.
class MinTree {
 public:
  explicit MinTree(std::size_t n = 0) : n_(n), tree_(2 * n) {}

  void set(std::size_t pos, Candidate c) {
    pos += n_;
    tree_[pos] = c;
    for (pos /= 2; pos >= 1; pos /= 2) tree_[pos] = std::min(tree_[2 * pos], tree_[2 * pos + 1]);
  }
  // inclusive range
  Candidate min(std::size_t lo, std::size_t hi) const {
    Candidate best;
    for (lo += n_, hi += n_ + 1; lo < hi; lo /= 2, hi /= 2) {
      if (lo & 1) best = std::min(best, tree_[lo++]);
      if (hi & 1) best = std::min(best, tree_[--hi]);
    }
    return best;
  }

 private:
  std::size_t n_;
  std::vector<Candidate> tree_;
};

class Fenwick {
 public:
  explicit Fenwick(std::size_t n = 0) : tree_(n + 1, 0) {}
  void add(std::size_t pos, long long v) {
    for (++pos; pos < tree_.size(); pos += pos & (~pos + 1)) tree_[pos] += v;
  }
  long long prefix(std::size_t count) const {
    long long s = 0;
    for (; count > 0; count -= count & (~count + 1)) s += tree_[count];
    return s;
  }
  long long range(std::size_t lo, std::size_t hi) const { return prefix(hi + 1) - prefix(lo); }

 private:
  std::vector<long long> tree_;
};

class NeighborhoodIndex {
 public:
  virtual ~NeighborhoodIndex() = default;
  // Reports (level, x) pairs that are ready before any query.
  virtual void initialize(const std::function<void(int, PointIndex)>& ready) = 0;
  virtual void on_labeled(PointIndex z, int label) = 0;
  // z has just been queried and leaves pending_level.
  virtual void remove_pending(int level, PointIndex z, std::vector<PointIndex>& newly_ready) = 0;
  virtual std::optional<PointIndex> pick_focused(int level, const std::set<int>& uncertain) = 0;
  virtual LabelSet possible_labels(PointIndex x, int level) = 0;
  // Ordering key of x inside uncertainty sets.
  virtual int key(PointIndex x) const = 0;
  virtual PointIndex point_of(int key) const = 0;

  std::size_t empty_query_sets = 0;
};

struct IndexContext {
  const BallFamily& fam;
  const QueryState& state;
  int max_level;
  std::vector<double> taus;
  double gamma;
};

class IntervalIndex final : public NeighborhoodIndex {
 public:
  explicit IntervalIndex(const IndexContext& ctx) : ctx_(ctx), n_(static_cast<int>(ctx.fam.num_points())) {
    levels_.resize(static_cast<std::size_t>(ctx.max_level) + 1);
    for (int l = 0; l <= ctx.max_level; ++l) {
      auto& lv = levels_[static_cast<std::size_t>(l)];
      const auto un = static_cast<std::size_t>(n_);
      lv.populated = level_is_populated(l, un);
      lv.reach = lv.populated ? static_cast<int>(level_max_size(l, un)) - 1 : -1;
      lv.pending_min = MinTree(un);
      lv.eligible_prefix.assign(un + 1, 0);
      lv.label_sum = Fenwick(un);
      for (int r = 0; r < n_; ++r) {
        const PointIndex z = order(r);
        const bool eligible = ctx.state.threshold(z) <= ctx.taus[static_cast<std::size_t>(l)];
        lv.eligible_prefix[static_cast<std::size_t>(r) + 1] = lv.eligible_prefix[static_cast<std::size_t>(r)] + eligible;
        if (eligible) {
          lv.pending.insert(lv.pending.end(), r);
          lv.pending_min.set(static_cast<std::size_t>(r), {ctx.state.threshold(z), z});
        }
      }
      lv.window = static_cast<int>(level_min_size(l, un));
      lv.window_level = level_of(static_cast<std::size_t>(lv.window), un);
      const int windows = n_ - lv.window + 1;
      lv.window_sign.assign(static_cast<std::size_t>(windows), 0);
      lv.next_open.resize(static_cast<std::size_t>(windows) + 1);
      std::iota(lv.next_open.begin(), lv.next_open.end(), 0);
      lv.positive_windows = Fenwick(static_cast<std::size_t>(windows));
      lv.negative_windows = Fenwick(static_cast<std::size_t>(windows));
    }
  }

  void initialize(const std::function<void(int, PointIndex)>& ready) override {
    for (int l = 0; l <= ctx_.max_level; ++l) {
      const auto& lv = levels_[static_cast<std::size_t>(l)];
      if (!lv.populated) {
        for (int r = 0; r < n_; ++r) ready(l, order(r));
        continue;
      }
      // Two-pointer sweep: r is ready iff no pending rank lies in [r - reach, r + reach].
      auto it = lv.pending.begin();
      for (int r = 0; r < n_; ++r) {
        while (it != lv.pending.end() && *it < r - lv.reach) ++it;
        if (it == lv.pending.end() || *it > r + lv.reach) ready(l, order(r));
      }
    }
  }

  void on_labeled(PointIndex z, int label) override {
    const int r = ctx_.fam.rank(z);
    for (int l = 0; l <= ctx_.max_level; ++l) {
      if (ctx_.state.threshold(z) <= ctx_.taus[static_cast<std::size_t>(l)]) {
        levels_[static_cast<std::size_t>(l)].label_sum.add(static_cast<std::size_t>(r), label);
      }
    }
  }

  void remove_pending(int level, PointIndex z, std::vector<PointIndex>& newly_ready) override {
    auto& lv = levels_[static_cast<std::size_t>(level)];
    const int r = ctx_.fam.rank(z);
    auto it = lv.pending.find(r);
    if (it == lv.pending.end()) return;
    const long long far = std::numeric_limits<int>::max() / 2;
    const long long prev = it == lv.pending.begin() ? -far : *std::prev(it);
    const long long next = std::next(it) == lv.pending.end() ? far : *std::next(it);
    lv.pending.erase(it);
    lv.pending_min.set(static_cast<std::size_t>(r), {});
    if (!lv.populated) return;
    // Ranks that only z kept from being ready.
    const long long lo = std::max<long long>({0, r - lv.reach, prev + lv.reach + 1});
    const long long hi = std::min<long long>({n_ - 1, r + lv.reach, next - lv.reach - 1});
    for (long long q = lo; q <= hi; ++q) newly_ready.push_back(order(static_cast<int>(q)));
  }

  std::optional<PointIndex> pick_focused(int level, const std::set<int>& uncertain) override {
    const auto& lv = levels_[static_cast<std::size_t>(level)];
    if (!lv.populated || uncertain.empty()) return std::nullopt;
    const int reach = lv.reach;
    Candidate best;
    // Walk the union of [u - reach, u + reach] over u in U as merged segments.
    auto it = uncertain.begin();
    while (it != uncertain.end()) {
      const int seg_lo = std::max(0, *it - reach);
      int last = *it;
      for (;;) {
        auto nx = uncertain.upper_bound(last + 2 * reach);
        const int furthest = *std::prev(nx);
        it = nx;
        if (furthest == last) break;
        last = furthest;
      }
      const int seg_hi = std::min(n_ - 1, last + reach);
      best = std::min(best, lv.pending_min.min(static_cast<std::size_t>(seg_lo), static_cast<std::size_t>(seg_hi)));
    }
    if (!best.valid()) return std::nullopt;
    return best.point;
  }

  LabelSet possible_labels(PointIndex x, int level) override {
    auto& lv = levels_[static_cast<std::size_t>(level)];
    const int m = lv.window;
    const int r = ctx_.fam.rank(x);
    const int lo = std::max(0, r - m + 1);
    const int hi = std::min(r, n_ - m);
    for (int i = find_open(lv, lo); i <= hi; i = find_open(lv, i + 1)) {
      const int s = window_sign(lv, i);
      lv.window_sign[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(s);
      if (s > 0) lv.positive_windows.add(static_cast<std::size_t>(i), 1);
      if (s < 0) lv.negative_windows.add(static_cast<std::size_t>(i), 1);
      lv.next_open[static_cast<std::size_t>(i)] = i + 1;
    }
    LabelSet pl;
    pl.positive = lv.positive_windows.range(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)) > 0;
    pl.negative = lv.negative_windows.range(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)) > 0;
    return pl;
  }

  int key(PointIndex x) const override { return ctx_.fam.rank(x); }
  PointIndex point_of(int key) const override { return order(key); }

 private:
  struct Level {
    bool populated = false;
    int reach = -1;
    std::set<int> pending;
    MinTree pending_min;
    std::vector<int> eligible_prefix;
    Fenwick label_sum;
    // minimal windows of B_{<=l}(x): every run of `window` ranks through x
    int window = 1;
    int window_level = 0;
    std::vector<std::int8_t> window_sign;
    std::vector<int> next_open;  // union-find "next window not yet evaluated"
    Fenwick positive_windows;
    Fenwick negative_windows;
  };

  PointIndex order(int r) const { return ctx_.fam.sorted_order()[static_cast<std::size_t>(r)]; }

  static int find_open(Level& lv, int i) {
    int root = i;
    while (lv.next_open[static_cast<std::size_t>(root)] != root) root = lv.next_open[static_cast<std::size_t>(root)];
    while (lv.next_open[static_cast<std::size_t>(i)] != root) {
      const int nx = lv.next_open[static_cast<std::size_t>(i)];
      lv.next_open[static_cast<std::size_t>(i)] = root;
      i = nx;
    }
    return root;
  }

  int window_sign(const Level& lv, int start) {
    const auto& src = levels_[static_cast<std::size_t>(lv.window_level)];
    const auto lo = static_cast<std::size_t>(start);
    const auto hi = static_cast<std::size_t>(start + lv.window - 1);
    const int eligible = src.eligible_prefix[hi + 1] - src.eligible_prefix[lo];
    if (eligible == 0) {
      ++empty_query_sets;
      return 0;
    }
    const double mean = static_cast<double>(src.label_sum.range(lo, hi)) / eligible;
    return sign_of(qualitative_bias(mean, ctx_.gamma));
  }

  IndexContext ctx_;
  int n_;
  std::vector<Level> levels_;
};

// Brute-force index over explicit member sets (Euclidean and custom families).
class ExplicitIndex final : public NeighborhoodIndex {
 public:
  explicit ExplicitIndex(const IndexContext& ctx) : ctx_(ctx), n_(ctx.fam.num_points()) {
    levels_.resize(static_cast<std::size_t>(ctx.max_level) + 1);
    for (int l = 0; l <= ctx.max_level; ++l) {
      auto& lv = levels_[static_cast<std::size_t>(l)];
      lv.reach.assign(n_, {});
      lv.reached_by.assign(n_, {});
      for (BallId b : ctx.fam.at_level(l)) {
        const auto members = ctx.fam.members(b);
        for (PointIndex x : members) {
          auto& r = lv.reach[static_cast<std::size_t>(x)];
          r.insert(r.end(), members.begin(), members.end());
        }
      }
      for (std::size_t x = 0; x < n_; ++x) {
        auto& r = lv.reach[x];
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        for (PointIndex z : r) lv.reached_by[static_cast<std::size_t>(z)].push_back(static_cast<PointIndex>(x));
      }
      lv.pending.assign(n_, 0);
      for (std::size_t z = 0; z < n_; ++z) {
        lv.pending[z] = ctx.state.threshold(static_cast<PointIndex>(z)) <= ctx.taus[static_cast<std::size_t>(l)];
      }
      lv.pending_in_reach.assign(n_, 0);
      for (std::size_t x = 0; x < n_; ++x) {
        for (PointIndex z : lv.reach[x]) lv.pending_in_reach[x] += lv.pending[static_cast<std::size_t>(z)];
      }
    }
  }

  void initialize(const std::function<void(int, PointIndex)>& ready) override {
    for (int l = 0; l <= ctx_.max_level; ++l) {
      const auto& lv = levels_[static_cast<std::size_t>(l)];
      for (std::size_t x = 0; x < n_; ++x)
        if (lv.pending_in_reach[x] == 0) ready(l, static_cast<PointIndex>(x));
    }
  }

  void on_labeled(PointIndex, int) override {}

  void remove_pending(int level, PointIndex z, std::vector<PointIndex>& newly_ready) override {
    auto& lv = levels_[static_cast<std::size_t>(level)];
    auto& p = lv.pending[static_cast<std::size_t>(z)];
    if (!p) return;
    p = 0;
    for (PointIndex x : lv.reached_by[static_cast<std::size_t>(z)]) {
      if (--lv.pending_in_reach[static_cast<std::size_t>(x)] == 0) newly_ready.push_back(x);
    }
  }

  std::optional<PointIndex> pick_focused(int level, const std::set<int>& uncertain) override {
    const auto& lv = levels_[static_cast<std::size_t>(level)];
    Candidate best;
    for (int x : uncertain) {
      for (PointIndex z : lv.reach[static_cast<std::size_t>(x)]) {
        if (lv.pending[static_cast<std::size_t>(z)]) best = std::min(best, Candidate{ctx_.state.threshold(z), z});
      }
    }
    if (!best.valid()) return std::nullopt;
    return best.point;
  }

  LabelSet possible_labels(PointIndex x, int level) override {
    LabelSet pl;
    for (BallId b : minimal_balls(x, level, ctx_.fam)) {
      const int s = ball_sign(b);
      pl.positive |= s > 0;
      pl.negative |= s < 0;
    }
    return pl;
  }

  int key(PointIndex x) const override { return x; }
  PointIndex point_of(int key) const override { return key; }

 private:
  struct Level {
    std::vector<std::vector<PointIndex>> reach;
    std::vector<std::vector<PointIndex>> reached_by;
    std::vector<std::uint8_t> pending;
    std::vector<int> pending_in_reach;
  };

  int ball_sign(BallId b) {
    if (auto it = sign_cache_.find(b); it != sign_cache_.end()) return it->second;
    const double t = ctx_.taus[static_cast<std::size_t>(ctx_.fam.level(b))];
    long long sum = 0;
    int count = 0;
    for (PointIndex z : ctx_.fam.members(b)) {
      if (ctx_.state.threshold(z) > t) continue;
      ++count;
      sum += ctx_.state.label(z);
    }
    int s = 0;
    if (count == 0) {
      ++empty_query_sets;
    } else {
      s = sign_of(qualitative_bias(static_cast<double>(sum) / count, ctx_.gamma));
    }
    sign_cache_.emplace(b, s);
    return s;
  }

  IndexContext ctx_;
  std::size_t n_;
  std::vector<Level> levels_;
  std::map<BallId, int> sign_cache_;
};

class Learner {
 public:
  Learner(const BallFamily& fam, LabelSource& labels, const RunOptions& opts, RunObserver* observer)
      : fam_(fam),
        labels_(labels),
        opts_(opts),
        observer_(observer),
        n_(fam.num_points()),
        max_level_(tracked_max_level(n_, opts.k, opts.cap)),
        state_(init_state(n_, opts.seed)),
        table_(n_, max_level_),
        ready_upto_(n_, 0),
        level_ready_(static_cast<std::size_t>(max_level_) + 1, std::vector<std::uint8_t>(n_, 0)),
        uncertain_(static_cast<std::size_t>(max_level_) + 1),
        u_level_(n_, -1) {
    const ThresholdSchedule sched{opts.k, n_};
    IndexContext ctx{fam, state_, max_level_, {}, opts.gamma};
    for (int l = 0; l <= max_level_; ++l) ctx.taus.push_back(tau(l, sched));
    taus_ = ctx.taus;
    if (fam.is_interval()) {
      index_ = std::make_unique<IntervalIndex>(ctx);
    } else {
      index_ = std::make_unique<ExplicitIndex>(ctx);
    }
    by_threshold_.resize(n_);
    std::iota(by_threshold_.begin(), by_threshold_.end(), 0);
    std::sort(by_threshold_.begin(), by_threshold_.end(),
              [&](PointIndex a, PointIndex b) { return state_.before(a, b); });
  }

  RunResult execute() {
    // U_0 = X until the first iteration's label update.
    for (std::size_t x = 0; x < n_; ++x) place_uncertain(static_cast<PointIndex>(x));
    deferred_ = true;

    RunResult result;
    result.focused_per_level.assign(static_cast<std::size_t>(max_level_) + 1, 0);
    auto can_query = [&] { return state_.queries_used() < opts_.budget && !state_.exhausted(); };
    while (can_query()) {
      ++result.iterations;
      for (int l = 0; l <= max_level_; ++l) {
        const auto& u = uncertain_[static_cast<std::size_t>(l)];
        if (u.empty()) continue;
        if (auto z = index_->pick_focused(l, u)) {
          apply_query(*z, QueryKind::focused, l);
          ++result.focused_queries;
          ++result.focused_per_level[static_cast<std::size_t>(l)];
        }
        break;
      }
      if (can_query()) {
        while (state_.is_queried(by_threshold_[bg_cursor_])) ++bg_cursor_;
        apply_query(by_threshold_[bg_cursor_], QueryKind::background, std::nullopt);
        ++result.background_queries;
      }
      if (deferred_) {
        deferred_ = false;
        index_->initialize([&](int l, PointIndex x) { mark_ready(l, x); });
        for (std::size_t x = 0; x < n_; ++x) advance(static_cast<PointIndex>(x));
      }
      if (observer_) observer_->after_iteration(table_, state_, uncertainty_snapshot());
    }

    result.queries_used = state_.queries_used();
    result.empty_query_sets = index_->empty_query_sets;
    result.final_labels.resize(n_);
    result.mind_change_counts.resize(n_);
    for (std::size_t x = 0; x < n_; ++x) {
      result.final_labels[x] = final_label(static_cast<PointIndex>(x), table_);
      result.mind_change_counts[x] = mind_changes(table_.row(static_cast<PointIndex>(x)));
    }
    result.labels = std::move(table_);
    result.state = std::move(state_);
    return result;
  }

 private:
  void apply_query(PointIndex z, QueryKind kind, std::optional<int> level) {
    const int y = state_.query(z, kind, level, labels_);
    index_->on_labeled(z, y);
    std::vector<PointIndex> fresh;
    for (int l = 0; l <= max_level_; ++l) {
      if (state_.threshold(z) > taus_[static_cast<std::size_t>(l)]) continue;
      fresh.clear();
      index_->remove_pending(l, z, fresh);
      for (PointIndex x : fresh) mark_ready(l, x);
    }
  }

  void mark_ready(int level, PointIndex x) {
    level_ready_[static_cast<std::size_t>(level)][static_cast<std::size_t>(x)] = 1;
    if (!deferred_) advance(x);
  }

  void advance(PointIndex x) {
    auto& upto = ready_upto_[static_cast<std::size_t>(x)];
    bool moved = false;
    while (upto <= max_level_ && level_ready_[static_cast<std::size_t>(upto)][static_cast<std::size_t>(x)]) {
      table_.set(x, upto, provisional_label(index_->possible_labels(x, upto)));
      ++upto;
      moved = true;
    }
    if (moved) place_uncertain(x);
  }

  // x sits in U_p for p = number of settled levels, provided p is tracked and
  // either p = 0 or y_{p-1}(x) = !.
  void place_uncertain(PointIndex x) {
    const int p = ready_upto_[static_cast<std::size_t>(x)];
    int want = -1;
    if (p <= max_level_ && (p == 0 || table_.get(x, p - 1) == LabelValue::conflict)) want = p;
    int& have = u_level_[static_cast<std::size_t>(x)];
    if (have == want) return;
    if (have >= 0) uncertain_[static_cast<std::size_t>(have)].erase(index_->key(x));
    if (want >= 0) uncertain_[static_cast<std::size_t>(want)].insert(index_->key(x));
    have = want;
  }

  std::vector<std::vector<PointIndex>> uncertainty_snapshot() const {
    std::vector<std::vector<PointIndex>> out(uncertain_.size());
    for (std::size_t l = 0; l < uncertain_.size(); ++l) {
      for (int key : uncertain_[l]) out[l].push_back(index_->point_of(key));
      std::sort(out[l].begin(), out[l].end());
    }
    return out;
  }

  const BallFamily& fam_;
  LabelSource& labels_;
  RunOptions opts_;
  RunObserver* observer_;
  std::size_t n_;
  int max_level_;
  QueryState state_;
  LabelTable table_;
  std::vector<int> ready_upto_;
  std::vector<std::vector<std::uint8_t>> level_ready_;
  std::vector<std::set<int>> uncertain_;
  std::vector<int> u_level_;
  std::vector<double> taus_;
  std::unique_ptr<NeighborhoodIndex> index_;
  std::vector<PointIndex> by_threshold_;
  std::size_t bg_cursor_ = 0;
  bool deferred_ = false;
};

}  // namespace

RunResult run(const PointSet& ps, const BallFamily& fam, LabelSource& labels, const RunOptions& opts,
              RunObserver* observer) {
  if (fam.num_points() != ps.size()) throw Error("run: family and point set sizes differ");
  if (labels.size() != ps.size()) throw Error("run: label source and point set sizes differ");
  if (opts.k == 0) throw ConfigError("k", "must be at least 1");
  if (!(opts.gamma > 0.0 && opts.gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
  return Learner(fam, labels, opts, observer).execute();
}

}  // namespace metric_active
