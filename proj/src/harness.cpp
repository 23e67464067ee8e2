#include "metric_active/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "metric_active/csv.hpp"

namespace metric_active {

using nlohmann::json;

namespace {

// ---- config parsing -------------------------------------------------------

std::string at(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(at(path, key), "unknown field");
    }
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::uint64_t unsigned_int(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

// A scalar or an array of scalars.
template <class F>
void each(const json& j, const std::string& path, F&& f) {
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) f(j[i], idx(path, i));
  } else {
    f(j, path);
  }
}

std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], idx(path, i)));
  return out;
}

PointSet parse_rows(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of coordinate rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = idx(path, i);
    rows.push_back(j[i].is_array() ? number_list(j[i], p) : std::vector<double>{number(j[i], p)});
    if (rows.back().size() != rows.front().size()) throw ConfigError(p, "row dimension differs from row 0");
  }
  return PointSet::from_rows(rows);
}

std::string canonical_model(const std::string& name, const std::string& path) {
  if (name == "monotonic1d" || name == "monotonic") return "monotonic1d";
  if (name == "massart1d" || name == "massart") return "massart1d";
  if (name == "curved2d" || name == "curved") return "curved2d";
  if (name == "custom") return "custom";
  throw ConfigError(path, "unknown model '" + name + "' (expected monotonic1d, massart1d, curved2d, custom)");
}

void parse_generator(const json& g, ExperimentConfig& cfg) {
  const std::string p = "generator";
  if (!g.is_object()) throw ConfigError(p, "expected an object");
  reject_unknown(g, p,
                 {"model", "n", "dimension", "placement", "seed", "cluster_center", "slope", "midpoint", "boundaries",
                  "signs", "eta0", "shape", "center", "radius", "amplitude", "frequency", "offset", "points",
                  "points_file", "eta"});
  const std::string model = canonical_model(g.contains("model") ? text(g["model"], at(p, "model")) : "monotonic1d",
                                            at(p, "model"));
  if (g.contains("n")) {
    cfg.n_values.clear();
    each(g["n"], at(p, "n"), [&](const json& v, const std::string& path) {
      const auto n = unsigned_int(v, path);
      if (n < 1) throw ConfigError(path, "n must be at least 1");
      cfg.n_values.push_back(static_cast<std::size_t>(n));
    });
    if (cfg.n_values.empty()) throw ConfigError(at(p, "n"), "need at least one value");
  }
  if (g.contains("placement")) cfg.placement = placement_from_string(text(g["placement"], at(p, "placement")));
  if (g.contains("seed") && !g["seed"].is_null()) cfg.point_seed = unsigned_int(g["seed"], at(p, "seed"));
  if (g.contains("cluster_center")) cfg.cluster_center = number(g["cluster_center"], at(p, "cluster_center"));

  auto num_or = [&](const char* key, double fallback) { return g.contains(key) ? number(g[key], at(p, key)) : fallback; };
  std::size_t dim = 1;
  if (model == "monotonic1d") {
    Monotonic1D m;
    m.slope = num_or("slope", m.slope);
    m.midpoint = num_or("midpoint", m.midpoint);
    cfg.model = m;
  } else if (model == "massart1d") {
    Massart1D m{{0.5}, {-1, 1}, 0.8};
    if (g.contains("boundaries")) m.boundaries = number_list(g["boundaries"], at(p, "boundaries"));
    if (g.contains("signs")) {
      m.signs.clear();
      const auto& s = g["signs"];
      if (!s.is_array()) throw ConfigError(at(p, "signs"), "expected an array");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_number_integer()) throw ConfigError(idx(at(p, "signs"), i), "expected +1 or -1");
        m.signs.push_back(s[i].get<int>());
      }
    }
    m.eta0 = num_or("eta0", m.eta0);
    cfg.model = m;
  } else if (model == "curved2d") {
    Curved2D m;
    if (g.contains("shape")) {
      const auto s = text(g["shape"], at(p, "shape"));
      if (s == "disc") m.shape = CurveShape::disc;
      else if (s == "sine") m.shape = CurveShape::sine;
      else throw ConfigError(at(p, "shape"), "expected disc or sine");
    }
    if (g.contains("center")) {
      const auto c = number_list(g["center"], at(p, "center"));
      if (c.size() != 2) throw ConfigError(at(p, "center"), "expected two coordinates");
      m.center_x = c[0];
      m.center_y = c[1];
    }
    m.radius = num_or("radius", m.radius);
    m.amplitude = num_or("amplitude", m.amplitude);
    m.frequency = num_or("frequency", m.frequency);
    m.offset = num_or("offset", m.offset);
    m.eta0 = num_or("eta0", m.eta0);
    cfg.model = m;
    dim = 2;
  } else {
    PointSet pts;
    if (g.contains("points")) {
      pts = parse_rows(g["points"], at(p, "points"));
    } else if (g.contains("points_file")) {
      try {
        pts = load_points(text(g["points_file"], at(p, "points_file")));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(at(p, "points_file"), e.what());
      }
    } else {
      throw ConfigError(at(p, "points"), "the custom model needs points or points_file");
    }
    if (!g.contains("eta")) throw ConfigError(at(p, "eta"), "the custom model needs one eta per point");
    CustomTable table;
    table.eta = number_list(g["eta"], at(p, "eta"));
    if (table.eta.size() != pts.size()) throw ConfigError(at(p, "eta"), "needs exactly one value per point");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto row = pts[static_cast<PointIndex>(i)];
      table.coords.emplace_back(row.begin(), row.end());
    }
    dim = pts.dim();
    cfg.model = std::move(table);
    cfg.points = std::move(pts);
    cfg.n_values = {cfg.points->size()};
  }
  if (g.contains("dimension")) {
    const auto d = unsigned_int(g["dimension"], at(p, "dimension"));
    if (d != dim) throw ConfigError(at(p, "dimension"), "model " + model + " needs dimension " + std::to_string(dim));
  }
  cfg.dimension = dim;
}

BudgetSpec parse_budget(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "all") return {BudgetSpec::Kind::all, 0};
    if (s == "theorem") return {BudgetSpec::Kind::theorem, 0};
    throw ConfigError(path, "expected a nonnegative integer, \"all\" or \"theorem\"");
  }
  return {BudgetSpec::Kind::fixed, static_cast<std::size_t>(unsigned_int(j, path))};
}

std::string cell_name(const MetricsRow& r) {
  return "n=" + std::to_string(r.n) + " budget=" + std::to_string(r.budget) + " seed=" + std::to_string(r.seed);
}

template <class T>
std::string first_few(const std::vector<T>& v, std::size_t limit = 5) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) os << (i ? "; " : "") << v[i];
  if (v.size() > limit) os << "; ... (" << v.size() << " total)";
  return os.str();
}

}  // namespace

std::string BudgetSpec::str() const {
  switch (kind) {
    case Kind::all:
      return "all";
    case Kind::theorem:
      return "theorem";
    case Kind::fixed:
      break;
  }
  return std::to_string(value);
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  reject_unknown(j, "",
                 {"generator", "family", "gamma", "delta", "k", "budgets", "seeds", "repeat_queries", "level_cap", "epsilon",
                  "output", "theory"});
  ExperimentConfig cfg;
  if (j.contains("gamma")) cfg.gamma = number(j["gamma"], "gamma");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
  if (j.contains("delta")) cfg.delta = number(j["delta"], "delta");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (j.contains("epsilon")) cfg.epsilon = number(j["epsilon"], "epsilon");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
  if (j.contains("generator")) parse_generator(j["generator"], cfg);
  validate_model(cfg.model, cfg.gamma);
  if (j.contains("family")) cfg.family = family_kind_from_string(text(j["family"], "family"));
  if (cfg.family == FamilyKind::intervals && cfg.dimension != 1) {
    throw ConfigError("family", "intervals need 1-dimensional points; use euclidean");
  }
  if (j.contains("k")) {
    const auto& k = j["k"];
    if (k.is_string() && k.get<std::string>() == "auto") {
      cfg.k.reset();
    } else {
      if (!k.is_number_integer()) throw ConfigError("k", "expected a positive integer or \"auto\"");
      const auto v = unsigned_int(k, "k");
      if (v < 1) throw ConfigError("k", "must be at least 1");
      cfg.k = static_cast<std::size_t>(v);
    }
  }
  if (j.contains("budgets")) {
    cfg.budgets.clear();
    each(j["budgets"], "budgets", [&](const json& v, const std::string& p) { cfg.budgets.push_back(parse_budget(v, p)); });
    if (cfg.budgets.empty()) throw ConfigError("budgets", "need at least one budget");
  }
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    each(j["seeds"], "seeds", [&](const json& v, const std::string& p) { cfg.seeds.push_back(unsigned_int(v, p)); });
    if (cfg.seeds.empty()) throw ConfigError("seeds", "need at least one seed");
  }
  if (j.contains("repeat_queries")) {
    if (!j["repeat_queries"].is_boolean()) throw ConfigError("repeat_queries", "expected true or false");
    cfg.repeat_queries = j["repeat_queries"].get<bool>();
  }
  if (j.contains("level_cap")) cfg.level_cap = level_cap_from_string(text(j["level_cap"], "level_cap"));
  if (j.contains("output")) cfg.output = text(j["output"], "output");
  if (j.contains("theory")) {
    const auto& t = j["theory"];
    if (!t.is_object()) throw ConfigError("theory", "expected an object");
    reject_unknown(t, "theory", {"cost_cap"});
    if (t.contains("cost_cap")) cfg.cost_cap = static_cast<std::size_t>(unsigned_int(t["cost_cap"], "theory.cost_cap"));
  }
  const bool needs_1d = std::any_of(cfg.budgets.begin(), cfg.budgets.end(),
                                    [](const BudgetSpec& b) { return b.kind == BudgetSpec::Kind::theorem; });
  if (needs_1d && !std::holds_alternative<Monotonic1D>(cfg.model) && !std::holds_alternative<Massart1D>(cfg.model)) {
    throw ConfigError("budgets", "the theorem budget needs a monotonic1d or massart1d model");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const json& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    try {
      j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  }
  j.merge_patch(overrides);
  return parse_config(j);
}

std::uint64_t label_seed_for(std::uint64_t seed) { return splitmix64(seed ^ 0x6c6162656c73ULL); }
std::uint64_t point_seed_for(std::uint64_t seed) { return splitmix64(seed ^ 0x706f696e7473ULL); }

Instance build_instance(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
  Instance inst;
  if (cfg.points) {
    inst.points = *cfg.points;
  } else {
    GeneratorSpec g;
    g.count = n;
    g.dimension = cfg.dimension;
    g.placement = cfg.placement;
    g.seed = cfg.point_seed.value_or(point_seed_for(seed));
    g.cluster_center = cfg.cluster_center;
    inst.points = generate_points(g);
  }
  inst.model = cfg.model;
  inst.base_n = inst.points.size();
  if (cfg.repeat_queries) std::tie(inst.points, inst.model) = replicate_points(inst.points, inst.model, cfg.gamma);
  inst.eta = eta_values(inst.model, inst.points);
  inst.family = cfg.family == FamilyKind::intervals ? BallFamily::intervals(inst.points) : BallFamily::euclidean(inst.points);
  inst.required_k = required_k(cfg.gamma, cfg.delta, static_cast<std::uint64_t>(inst.family.size()));
  inst.k = cfg.k.value_or(inst.required_k);
  return inst;
}

std::size_t resolve_budget(const BudgetSpec& spec, const Instance& inst, const ExperimentConfig& cfg) {
  const std::size_t n = inst.points.size();
  switch (spec.kind) {
    case BudgetSpec::Kind::fixed:
      return spec.value;
    case BudgetSpec::Kind::all:
      return n;
    case BudgetSpec::Kind::theorem: {
      const auto b = oned_bounds(inst.model, inst.points, cfg.gamma);
      const double m = std::holds_alternative<Monotonic1D>(inst.model)
                           ? monotonic_theorem_budget(b, n, inst.k)
                           : massart_theorem_budget(b, n, inst.k, cfg.epsilon);
      return std::isinf(m) ? n : static_cast<std::size_t>(std::ceil(m));
    }
  }
  return n;
}

double MetricsRow::correct_fraction() const {
  return in_scope == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(in_scope);
}

std::string metrics_header() {
  return csv_header({"schema_version", "n", "base_n", "budget", "seed", "k", "required_k", "k_below_required", "gamma",
                     "queries_used", "focused_queries", "background_queries", "iterations", "in_scope", "correct",
                     "mistakes", "unlabeled_in_scope", "correct_fraction", "success", "mind_changes",
                     "empty_query_sets"});
}

std::string metrics_csv_row(const MetricsRow& r) {
  CsvRow row;
  row.add(kCsvSchemaVersion)
      .add(r.n)
      .add(r.base_n)
      .add(r.budget)
      .add(static_cast<unsigned long long>(r.seed))
      .add(r.k)
      .add(r.required_k)
      .add(r.k < r.required_k)
      .add(r.gamma)
      .add(r.queries_used)
      .add(r.focused_queries)
      .add(r.background_queries)
      .add(r.iterations)
      .add(r.in_scope)
      .add(r.correct)
      .add(r.mistakes)
      .add(r.unlabeled_in_scope)
      .add(r.correct_fraction())
      .add(r.success())
      .add(r.mind_changes)
      .add(r.empty_query_sets);
  return row.str();
}

MetricsRow compute_metrics(const Instance& inst, const RunResult& result, std::size_t budget, std::uint64_t seed,
                           double gamma) {
  MetricsRow m;
  m.n = inst.points.size();
  m.base_n = inst.base_n;
  m.budget = budget;
  m.seed = seed;
  m.k = inst.k;
  m.required_k = inst.required_k;
  m.gamma = gamma;
  m.queries_used = result.queries_used;
  m.focused_queries = result.focused_queries;
  m.background_queries = result.background_queries;
  m.iterations = result.iterations;
  m.empty_query_sets = result.empty_query_sets;
  for (std::size_t x = 0; x < m.n; ++x) {
    m.mind_changes += static_cast<std::size_t>(result.mind_change_counts[x]);
    if (std::abs(inst.eta[x]) < gamma) continue;
    ++m.in_scope;
    const int y = result.final_labels[x];
    if (y == bayes_label(inst.eta[x])) ++m.correct;
    else if (y == 0) ++m.unlabeled_in_scope;
    else ++m.mistakes;
  }
  return m;
}

RunArtifacts run_single(const ExperimentConfig& cfg, const Instance& inst, const BudgetSpec& budget,
                        std::uint64_t seed, RunObserver* observer) {
  RunArtifacts art;
  art.budget = resolve_budget(budget, inst, cfg);
  art.seed = seed;
  LabelSource labels(inst.eta, label_seed_for(seed));
  RunOptions opts{cfg.gamma, inst.k, art.budget, seed, cfg.level_cap};
  art.result = run(inst.points, inst.family, labels, opts, observer);
  art.metrics = compute_metrics(inst, art.result, art.budget, seed, cfg.gamma);
  art.instance = inst;
  return art;
}

RunArtifacts run_single(const ExperimentConfig& cfg, std::size_t n, const BudgetSpec& budget, std::uint64_t seed,
                        RunObserver* observer) {
  return run_single(cfg, build_instance(cfg, n, seed), budget, seed, observer);
}

namespace {

struct RunKey {
  std::size_t n;
  std::size_t budget;
  std::uint64_t seed;
  std::size_t order;
  auto operator<=>(const RunKey&) const = default;
};

void append_per_point(std::string& out, const RunArtifacts& a) {
  for (std::size_t x = 0; x < a.instance.points.size(); ++x) {
    const int y = a.result.final_labels[x];
    const int g = bayes_label(a.instance.eta[x]);
    CsvRow row;
    row.add(kCsvSchemaVersion)
        .add(a.metrics.n)
        .add(a.budget)
        .add(static_cast<unsigned long long>(a.seed))
        .add(x)
        .add(y)
        .add(g)
        .add(a.instance.eta[x])
        .add(y == g)
        .add(a.result.mind_change_counts[x]);
    out += row.str();
    out += '\n';
  }
}

void append_query_log(std::string& out, const RunArtifacts& a) {
  const auto& st = a.result.state;
  std::size_t step = 0;
  for (const auto& rec : st.log()) {
    CsvRow row;
    row.add(kCsvSchemaVersion)
        .add(a.metrics.n)
        .add(a.budget)
        .add(static_cast<unsigned long long>(a.seed))
        .add(++step)
        .add(rec.point)
        .add(to_string(rec.kind));
    if (rec.level) row.add(*rec.level);
    else row.empty();
    row.add(st.threshold(rec.point)).add(st.label(rec.point));
    out += row.str();
    out += '\n';
  }
}

json theory_entry(const ExperimentConfig& cfg, const Instance& inst, std::optional<std::uint64_t> seed) {
  json e{{"n", inst.points.size()},
         {"base_n", inst.base_n},
         {"family", to_string(cfg.family)},
         {"family_size", inst.family.size()},
         {"k", inst.k},
         {"required_k", inst.required_k},
         {"k_below_required", inst.k < inst.required_k}};
  e["seed"] = seed ? json(*seed) : json(nullptr);
  try {
    e["report"] = build_theory_report(inst.points, inst.family, inst.model,
                                      {cfg.gamma, cfg.delta, inst.k, cfg.cost_cap})
                      .to_json();
  } catch (const CostCapError& err) {
    e["skipped"] = err.what();
  }
  return e;
}

const std::filesystem::path& ensure_dir(const std::filesystem::path& p) {
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  std::map<RunKey, RunArtifacts> runs;
  std::map<RunKey, double> seconds;
  json theory = json::array();
  std::size_t order = 0;
  for (std::size_t n : cfg.n_values) {
    for (std::uint64_t seed : cfg.seeds) {
      const Instance inst = build_instance(cfg, n, seed);
      if (!cfg.point_seed.has_value() && !cfg.points.has_value()) {
        theory.push_back(theory_entry(cfg, inst, seed));
      } else if (seed == cfg.seeds.front()) {
        theory.push_back(theory_entry(cfg, inst, std::nullopt));
      }
      for (const auto& b : cfg.budgets) {
        const auto start = std::chrono::steady_clock::now();
        RunArtifacts a = run_single(cfg, inst, b, seed);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const RunKey key{n, a.budget, seed, order++};
        seconds[key] = secs;
        runs.emplace(key, std::move(a));
      }
    }
  }

  std::string metrics = metrics_header() + "\n";
  std::string per_point = csv_header({"schema_version", "n", "budget", "seed", "index", "final_label", "bayes_label",
                                      "eta", "correct_flag", "mind_changes"}) +
                          "\n";
  std::string log = csv_header({"schema_version", "n", "budget", "seed", "step", "point_index", "kind", "level",
                                "T_value", "label"}) +
                    "\n";
  std::string timings = csv_header({"schema_version", "n", "budget", "seed", "wall_seconds"}) + "\n";
  std::vector<MetricsRow> rows;
  for (const auto& [key, a] : runs) {
    rows.push_back(a.metrics);
    metrics += metrics_csv_row(a.metrics) + "\n";
    append_per_point(per_point, a);
    append_query_log(log, a);
    CsvRow t;
    t.add(kCsvSchemaVersion).add(a.metrics.n).add(a.budget).add(static_cast<unsigned long long>(a.seed)).add(seconds[key]);
    timings += t.str() + "\n";
  }
  const auto& dir = ensure_dir(cfg.output);
  write_file_atomic(dir / "metrics.csv", metrics);
  write_file_atomic(dir / "per_point.csv", per_point);
  write_file_atomic(dir / "query_log.csv", log);
  write_file_atomic(dir / "timings.csv", timings);
  write_file_atomic(dir / "theory.json", json{{"schema_version", kCsvSchemaVersion}, {"instances", theory}}.dump(2) + "\n");
  return rows;
}

SweepResult aggregate_sweep(std::vector<MetricsRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.n, a.budget, a.seed) < std::tie(b.n, b.budget, b.seed);
  });
  SweepResult out;
  std::map<std::pair<std::size_t, std::size_t>, SweepCell> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.n, r.budget}];
    c.n = r.n;
    c.budget = r.budget;
    ++c.runs;
    c.mean_mistakes += static_cast<double>(r.mistakes);
    c.mean_unlabeled += static_cast<double>(r.unlabeled_in_scope);
    c.success_fraction += r.success() ? 1.0 : 0.0;
  }
  std::map<std::size_t, std::optional<std::size_t>> best;
  for (auto& [key, c] : cells) {
    const double runs = static_cast<double>(c.runs);
    c.mean_mistakes /= runs;
    c.mean_unlabeled /= runs;
    c.success_fraction /= runs;
    auto& b = best[c.n];
    if (!b && c.success_fraction >= kSweepSuccessShare) b = c.budget;
    out.cells.push_back(c);
  }
  out.min_success_budget.assign(best.begin(), best.end());
  out.rows = std::move(rows);
  return out;
}

SweepResult sweep(const ExperimentConfig& cfg) {
  std::vector<MetricsRow> rows;
  for (std::size_t n : cfg.n_values) {
    for (std::uint64_t seed : cfg.seeds) {
      const Instance inst = build_instance(cfg, n, seed);
      for (const auto& b : cfg.budgets) rows.push_back(run_single(cfg, inst, b, seed).metrics);
    }
  }
  SweepResult res = aggregate_sweep(std::move(rows));

  std::string metrics = metrics_header() + "\n";
  for (const auto& r : res.rows) metrics += metrics_csv_row(r) + "\n";
  std::map<std::size_t, std::optional<std::size_t>> best(res.min_success_budget.begin(), res.min_success_budget.end());
  std::string table = csv_header({"schema_version", "n", "budget", "runs", "mean_mistakes", "mean_unlabeled",
                                  "success_fraction", "min_success_budget"}) +
                      "\n";
  for (const auto& c : res.cells) {
    CsvRow row;
    row.add(kCsvSchemaVersion).add(c.n).add(c.budget).add(c.runs).add(c.mean_mistakes).add(c.mean_unlabeled).add(
        c.success_fraction);
    if (const auto& b = best[c.n]) row.add(*b);
    else row.empty();
    table += row.str() + "\n";
  }
  const auto& dir = ensure_dir(cfg.output);
  write_file_atomic(dir / "metrics.csv", metrics);
  write_file_atomic(dir / "sweep.csv", table);
  return res;
}

std::vector<std::string> focused_region_violations(const RunResult& result, const TheoryReport& report,
                                                   std::size_t k) {
  std::vector<std::string> out;
  const ThresholdSchedule sched{k, report.n};
  std::vector<std::vector<char>> in(report.delta_sets.size(), std::vector<char>(report.n, 0));
  for (std::size_t l = 0; l < report.delta_sets.size(); ++l)
    for (PointIndex z : report.delta_sets[l]) in[l][static_cast<std::size_t>(z)] = 1;
  std::size_t step = 0;
  for (const auto& rec : result.state.log()) {
    ++step;
    if (rec.kind != QueryKind::focused) continue;
    const int l = *rec.level;
    const auto z = static_cast<std::size_t>(rec.point);
    const bool inside = static_cast<std::size_t>(l) < in.size() && in[static_cast<std::size_t>(l)][z];
    const bool eligible = result.state.threshold(rec.point) <= tau(l, sched);
    if (!inside || !eligible) {
      out.push_back("step " + std::to_string(step) + ": point " + std::to_string(rec.point) + " at level " +
                    std::to_string(l) + (inside ? "" : " outside Delta") + (eligible ? "" : " above tau"));
    }
  }
  return out;
}

std::vector<std::string> critical_level_violations(const RunResult& result, const TheoryReport& report) {
  std::vector<std::string> out;
  const auto& table = result.labels;
  for (std::size_t x = 0; x < report.n; ++x) {
    const int s = report.s[x];
    if (s == 0) continue;
    const LabelValue right = s > 0 ? LabelValue::positive : LabelValue::negative;
    const auto& cl = report.levels[x];
    for (int l = 0; l <= table.max_level(); ++l) {
      const LabelValue v = table.get(static_cast<PointIndex>(x), l);
      if (v == LabelValue::unset) continue;
      const bool bad1 = cl.l1 <= l && v != right && v != LabelValue::conflict;
      const bool bad2 = cl.l2 <= l && v != right && v != LabelValue::zero;
      if (bad1 || bad2) {
        out.push_back("point " + std::to_string(x) + " level " + std::to_string(l) + " label " + to_char(v) +
                      " (L1=" + cl.l1.str() + ", L2=" + cl.l2.str() + ", s=" + std::to_string(s) + ")");
      }
    }
  }
  return out;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

json VerifyReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks) cs.push_back({{"name", c.name}, {"cell", c.cell}, {"passed", c.passed}, {"detail", c.detail}});
  json j{{"passed", passed()}, {"checks", std::move(cs)}, {"audit_violations", audit_violations}};
  j["injected_ball"] = injected_ball ? json(*injected_ball) : json(nullptr);
  return j;
}

namespace {

// Checks the uncertainty regions and write-once cells after every iteration.
class InvariantObserver final : public RunObserver {
 public:
  void after_iteration(const LabelTable& labels, const QueryState& state,
                       const std::vector<std::vector<PointIndex>>& uncertainty) override {
    ++iteration_;
    if (!regions_error_.empty() && !write_once_error_.empty()) return;
    if (regions_error_.empty() && uncertainty != uncertainty_regions(labels)) {
      regions_error_ = "iteration " + std::to_string(iteration_) + ": U differs from its definition";
    }
    if (write_once_error_.empty() && previous_.size() == labels.size()) {
      for (std::size_t x = 0; x < labels.size() && write_once_error_.empty(); ++x) {
        for (int l = 0; l <= labels.max_level(); ++l) {
          const auto before = previous_.get(static_cast<PointIndex>(x), l);
          if (before != LabelValue::unset && before != labels.get(static_cast<PointIndex>(x), l)) {
            write_once_error_ = "iteration " + std::to_string(iteration_) + ": cell (" + std::to_string(x) + ", " +
                                std::to_string(l) + ") changed";
            break;
          }
        }
      }
    }
    previous_ = labels;
    (void)state;
  }

  std::string regions_error_;
  std::string write_once_error_;

 private:
  std::size_t iteration_ = 0;
  LabelTable previous_;
};

std::string query_log_text(const QueryState& st) {
  std::ostringstream os;
  write_query_log_csv(os, st);
  return os.str();
}

}  // namespace

VerifyReport verify(const ExperimentConfig& cfg, const VerifyOptions& opts) {
  VerifyReport rep;
  std::string per_point = csv_header({"schema_version", "n", "budget", "seed", "index", "L1", "L2", "m_o", "correct"}) + "\n";
  json theory = json::array();
  bool fault_done = false;

  for (std::size_t n : cfg.n_values) {
    for (std::uint64_t seed : cfg.seeds) {
      const Instance inst = build_instance(cfg, n, seed);
      check_cost_cap(inst.family, cfg.cost_cap);
      const TheoryReport th =
          build_theory_report(inst.points, inst.family, inst.model, {cfg.gamma, cfg.delta, inst.k, cfg.cost_cap});
      theory.push_back({{"n", inst.points.size()}, {"seed", seed}, {"report", th.to_json()}});
      const BiasOracle oracle(inst.family, inst.eta);
      const auto l2 = th.l2_values();
      const std::size_t np = inst.points.size();

      // Instance-level oracle checks.
      const std::string icell = "n=" + std::to_string(np) + " seed=" + std::to_string(seed);
      {
        CheckResult c{"delta_reconstruction", icell, true, ""};
        for (std::size_t l = 0; l < th.delta_sets.size() && c.passed; ++l) {
          if (boundary_set(static_cast<int>(l), inst.family, l2) != th.delta_sets[l]) {
            c.passed = false;
            c.detail = "level " + std::to_string(l) + " differs from the ball-by-ball recomputation";
          }
        }
        rep.checks.push_back(c);
      }
      {
        CheckResult c{"critical_levels_rescan", icell, true, ""};
        if (np > opts.literal_check_limit) {
          c.detail = "skipped: n above the exhaustive-scan limit";
        } else {
          for (std::size_t x = 0; x < np && c.passed; ++x) {
            if (inst.eta[x] == 0.0) continue;
            const auto lit = critical_levels(static_cast<PointIndex>(x), oracle, inst.eta, cfg.gamma);
            if (!(lit == th.levels[x])) {
              c.passed = false;
              c.detail = "point " + std::to_string(x) + ": scan gives (" + lit.l1.str() + ", " + lit.l2.str() +
                         "), report has (" + th.levels[x].l1.str() + ", " + th.levels[x].l2.str() + ")";
            }
          }
        }
        rep.checks.push_back(c);
      }
      if (th.oned) {
        CheckResult c{"oned_bounds", icell, true, ""};
        std::vector<std::string> bad;
        for (std::size_t x = 0; x < np; ++x) {
          const auto& cl = th.levels[x];
          if (const auto& b = th.oned->l1_bound[x]; b && !(cl.l1.is_finite() && cl.l1.value() <= *b + 1e-9))
            bad.push_back("L1(" + std::to_string(x) + ")=" + cl.l1.str() + " > " + format_double(*b));
          // The argument covers every integer level >= lg(n / r(x)), hence the ceiling.
          if (const auto& b = th.oned->l2_bound[x];
              b && !(cl.l2.is_finite() && cl.l2.value() <= std::ceil(*b - 1e-9)))
            bad.push_back("L2(" + std::to_string(x) + ")=" + cl.l2.str() + " > ceil(" + format_double(*b) + ")");
        }
        for (std::size_t l = 0; l < th.delta_sets.size(); ++l) {
          const double bound = th.oned->delta_bound(static_cast<int>(l), np);
          if (static_cast<double>(th.delta_sets[l].size()) > bound)
            bad.push_back("|Delta_" + std::to_string(l) + "|=" + std::to_string(th.delta_sets[l].size()) + " > " +
                          format_double(bound));
        }
        c.passed = bad.empty();
        c.detail = first_few(bad);
        rep.checks.push_back(c);
      }

      for (const auto& b : cfg.budgets) {
        InvariantObserver obs;
        RunArtifacts a = run_single(cfg, inst, b, seed, &obs);
        const std::string cell = cell_name(a.metrics);
        const auto& r = a.result;

        auto add = [&](const char* name, bool ok, std::string detail) {
          rep.checks.push_back({name, cell, ok, std::move(detail)});
        };
        add("budget_accounting",
            r.queries_used <= a.budget && r.queries_used == r.state.log().size() &&
                r.focused_queries + r.background_queries == r.queries_used,
            "used " + std::to_string(r.queries_used) + " of " + std::to_string(a.budget));
        add("uncertainty_consistency", obs.regions_error_.empty(), obs.regions_error_);
        add("write_once", obs.write_once_error_.empty(), obs.write_once_error_);
        {
          bool ok = true;
          for (std::size_t x = 0; x < np && ok; ++x) {
            ok = r.final_labels[x] == final_label(static_cast<PointIndex>(x), r.labels);
          }
          add("final_label_rule", ok, ok ? "" : "final labels disagree with the label table");
        }
        if (r.queries_used == np) {
          bool ok = true;
          for (std::size_t x = 0; x < np && ok; ++x)
            for (LabelValue v : r.labels.row(static_cast<PointIndex>(x))) ok = ok && v != LabelValue::unset;
          add("complete_table", ok, ok ? "" : "Q = X but some cell is still unset");
        }
        {
          const auto m = a.metrics;
          add("metric_identity", m.mistakes + m.correct + m.unlabeled_in_scope == m.in_scope, "");
        }
        {
          RunArtifacts again = run_single(cfg, inst, b, seed);
          const bool same = again.result.to_json().dump() == r.to_json().dump() &&
                            query_log_text(again.result.state) == query_log_text(r.state) &&
                            metrics_csv_row(again.metrics) == metrics_csv_row(a.metrics);
          add("determinism", same, same ? "" : "a second run with the same seed differs");
        }

        const RunOptions ropts{cfg.gamma, inst.k, a.budget, seed, cfg.level_cap};
        EstimateTable estimates = final_estimates(inst.family, r.state, ropts);
        const auto clean = audit_gamma_accuracy(estimates, oracle, cfg.gamma);
        bool injected_here = false;
        if (opts.inject_fault && !fault_done) {
          for (BallId id = 0; id < estimates.size(); ++id) {
            if (!estimates.finalized(id) || estimates.estimate(id) == BiasEstimate::zero) continue;
            if (std::binary_search(clean.begin(), clean.end(), id)) continue;
            estimates.inject_flip(id);
            rep.injected_ball = id;
            fault_done = injected_here = true;
            break;
          }
        }
        const auto audited = audit_gamma_accuracy(estimates, oracle, cfg.gamma);
        rep.audit_violations.insert(rep.audit_violations.end(), audited.begin(), audited.end());
        // Gamma-accuracy is only promised once k reaches required_k; below it
        // the audit is reported but does not fail the run.
        const bool guaranteed = inst.k >= inst.required_k;
        std::string audit_detail =
            audited.empty() ? "" : std::to_string(audited.size()) + " violating balls: " + first_few(audited);
        if (injected_here) audit_detail = "after injected fault: " + audit_detail;
        else if (!guaranteed && !audited.empty()) audit_detail = "advisory (k below required_k): " + audit_detail;
        add("gamma_accuracy", audited.empty() || (!guaranteed && !injected_here), audit_detail);
        if (injected_here) {
          const bool seen = std::binary_search(audited.begin(), audited.end(), *rep.injected_ball);
          add("fault_injection_detected", seen, "ball " + std::to_string(*rep.injected_ball));
        }

        if (clean.empty()) {
          const auto f = focused_region_violations(r, th, inst.k);
          add("focused_region", f.empty(), first_few(f));
          const auto c = critical_level_violations(r, th);
          add("critical_level_labels", c.empty(), first_few(c));
        } else {
          add("focused_region", true, "not applicable: estimates are not all gamma-accurate");
          add("critical_level_labels", true, "not applicable: estimates are not all gamma-accurate");
        }

        for (std::size_t x = 0; x < np; ++x) {
          CsvRow row;
          const auto& cl = th.levels[x];
          row.add(kCsvSchemaVersion).add(np).add(a.budget).add(static_cast<unsigned long long>(seed)).add(x);
          row.add(cl.l1.str()).add(cl.l2.str());
          if (std::isinf(th.m_o[x])) row.add("inf");
          else row.add(th.m_o[x]);
          row.add(r.final_labels[x] == bayes_label(inst.eta[x]));
          per_point += row.str() + "\n";
        }
      }
    }
  }
  if (opts.inject_fault && !rep.injected_ball) {
    rep.checks.push_back({"fault_injection_detected", "", false, "no finalized nonzero estimate to flip"});
  }
  std::sort(rep.audit_violations.begin(), rep.audit_violations.end());
  rep.audit_violations.erase(std::unique(rep.audit_violations.begin(), rep.audit_violations.end()),
                             rep.audit_violations.end());

  const auto& dir = ensure_dir(cfg.output);
  write_file_atomic(dir / "verify_report.json", rep.to_json().dump(2) + "\n");
  write_file_atomic(dir / "verify.csv", per_point);
  write_file_atomic(dir / "theory.json", json{{"schema_version", kCsvSchemaVersion}, {"instances", theory}}.dump(2) + "\n");
  return rep;
}

}  // namespace metric_active
