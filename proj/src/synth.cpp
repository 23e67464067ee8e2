#include "metric_active/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace metric_active {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::vector<double> uniform_draws(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> out(count);
  for (auto& v : out) v = unit_from_bits(gen());
  return out;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_unit_interval(std::span<const double> x, const char* model) {
  if (x.size() != 1) throw DomainError(std::string(model) + " expects 1-dimensional input");
  if (!(x[0] >= 0.0 && x[0] <= 1.0)) throw DomainError(std::string(model) + ": x outside [0, 1]");
}

double monotonic_eta(const Monotonic1D& m, double x) { return std::tanh(m.slope * (x - m.midpoint) / 2.0); }

}  // namespace

std::string model_name(const EtaModel& model) {
  return std::visit(overloaded{[](const Monotonic1D&) { return std::string("monotonic1d"); },
                               [](const Massart1D&) { return std::string("massart1d"); },
                               [](const Curved2D&) { return std::string("curved2d"); },
                               [](const CustomTable&) { return std::string("custom-table"); }},
                    model);
}

double eta(const EtaModel& model, std::span<const double> x) {
  return std::visit(
      overloaded{
          [&](const Monotonic1D& m) {
            require_unit_interval(x, "monotonic1d");
            return monotonic_eta(m, x[0]);
          },
          [&](const Massart1D& m) {
            require_unit_interval(x, "massart1d");
            std::size_t j = 0;
            for (; j < m.boundaries.size(); ++j) {
              if (x[0] == m.boundaries[j]) return 0.0;
              if (x[0] < m.boundaries[j]) break;
            }
            return m.signs.at(j) * m.eta0;
          },
          [&](const Curved2D& m) {
            if (x.size() != 2) throw DomainError("curved2d expects 2-dimensional input");
            if (x[0] < 0.0 || x[0] > 1.0 || x[1] < 0.0 || x[1] > 1.0) throw DomainError("curved2d: x outside [0,1]^2");
            double side = 0.0;
            if (m.shape == CurveShape::disc) {
              side = m.radius - std::hypot(x[0] - m.center_x, x[1] - m.center_y);
            } else {
              side = x[1] - (m.offset + m.amplitude * std::sin(2.0 * std::numbers::pi * m.frequency * x[0]));
            }
            return side > 0.0 ? m.eta0 : (side < 0.0 ? -m.eta0 : 0.0);
          },
          [&](const CustomTable& m) {
            for (std::size_t i = 0; i < m.coords.size(); ++i) {
              if (std::equal(m.coords[i].begin(), m.coords[i].end(), x.begin(), x.end())) return m.eta[i];
            }
            throw DomainError("custom-table: coordinate not in table");
          }},
      model);
}

std::vector<double> eta_values(const EtaModel& model, const PointSet& ps) {
  std::vector<double> out(ps.size());
  if (const auto* table = std::get_if<CustomTable>(&model); table && table->coords.size() == ps.size()) {
    // Row i describes point i when the table and the point set line up.
    bool aligned = true;
    for (std::size_t i = 0; i < ps.size() && aligned; ++i) {
      auto p = ps[static_cast<PointIndex>(i)];
      aligned = std::equal(table->coords[i].begin(), table->coords[i].end(), p.begin(), p.end());
    }
    if (aligned) return table->eta;
  }
  for (std::size_t i = 0; i < ps.size(); ++i) out[i] = eta(model, ps[static_cast<PointIndex>(i)]);
  return out;
}

void validate_model(const EtaModel& model, double gamma) {
  std::visit(overloaded{[&](const Monotonic1D& m) {
                          if (!(m.slope > 0.0)) throw ConfigError("generator.slope", "must be positive");
                          if (!(m.midpoint > 0.0 && m.midpoint < 1.0))
                            throw ConfigError("generator.midpoint", "must lie in (0, 1)");
                        },
                        [&](const Massart1D& m) {
                          if (m.signs.empty()) throw ConfigError("generator.signs", "need at least one piece");
                          if (m.boundaries.size() + 1 != m.signs.size())
                            throw ConfigError("generator.boundaries", "need exactly pieces - 1 interior boundaries");
                          double prev = 0.0;
                          for (double b : m.boundaries) {
                            if (!(b > prev && b < 1.0))
                              throw ConfigError("generator.boundaries", "must be strictly increasing inside (0, 1)");
                            prev = b;
                          }
                          for (int s : m.signs)
                            if (s != 1 && s != -1) throw ConfigError("generator.signs", "signs must be +1 or -1");
                          if (!(m.eta0 > gamma && m.eta0 <= 1.0))
                            throw ConfigError("generator.eta0", "Massart margin needs gamma < eta0 <= 1");
                        },
                        [&](const Curved2D& m) {
                          if (!(m.eta0 > 0.0 && m.eta0 <= 1.0)) throw ConfigError("generator.eta0", "must lie in (0, 1]");
                        },
                        [&](const CustomTable& m) {
                          if (m.coords.size() != m.eta.size())
                            throw ConfigError("generator.table", "coordinate and eta row counts differ");
                          for (double e : m.eta)
                            if (!(e >= -1.0 && e <= 1.0)) throw ConfigError("generator.table", "eta outside [-1, 1]");
                        }},
             model);
}

int bayes_label(double eta_value) { return eta_value > 0.0 ? 1 : (eta_value < 0.0 ? -1 : 0); }

MonotonicAnchors monotonic_anchors(const Monotonic1D& model, double gamma, double tol) {
  auto preimage = [&](double target) {
    double lo = 0.0, hi = 1.0;
    if (monotonic_eta(model, lo) > target || monotonic_eta(model, hi) < target) {
      throw DomainError("monotonic1d: eta never reaches " + std::to_string(target) + " on [0, 1]");
    }
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      (monotonic_eta(model, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return {preimage(-gamma), preimage(0.0), preimage(gamma)};
}

LabelSource::LabelSource(std::vector<double> eta, std::uint64_t label_seed)
    : eta_(std::move(eta)), seed_(label_seed), cache_(eta_.size(), 0) {}

int LabelSource::sample(PointIndex x) {
  auto& slot = cache_.at(static_cast<std::size_t>(x));
  if (slot == 0) {
    const double u = unit_from_bits(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(x))));
    slot = u < (1.0 + eta_[static_cast<std::size_t>(x)]) / 2.0 ? 1 : -1;
  }
  return slot;
}

std::size_t replication_factor(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in (0, 1]");
  return static_cast<std::size_t>(std::ceil(1.0 / (gamma * gamma) - 1e-9));
}

std::pair<PointSet, EtaModel> replicate_points(const PointSet& ps, const EtaModel& model, double gamma) {
  const std::size_t c = replication_factor(gamma);
  std::vector<double> coords;
  coords.reserve(ps.raw().size() * c);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[static_cast<PointIndex>(i)];
    for (std::size_t j = 0; j < c; ++j) coords.insert(coords.end(), p.begin(), p.end());
  }
  PointSet out(ps.dim(), std::move(coords));
  if (std::holds_alternative<CustomTable>(model)) {
    const auto etas = eta_values(model, ps);
    CustomTable lifted;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto p = ps[static_cast<PointIndex>(i)];
      for (std::size_t j = 0; j < c; ++j) {
        lifted.coords.emplace_back(p.begin(), p.end());
        lifted.eta.push_back(etas[i]);
      }
    }
    return {std::move(out), EtaModel(std::move(lifted))};
  }
  return {std::move(out), model};
}

Placement placement_from_string(const std::string& s) {
  if (s == "uniform-grid") return Placement::uniform_grid;
  if (s == "uniform-random") return Placement::uniform_random;
  if (s == "adversarial-cluster") return Placement::adversarial_cluster;
  throw ConfigError("generator.placement",
                    "unknown placement '" + s + "' (expected uniform-grid, uniform-random, adversarial-cluster)");
}

const char* to_string(Placement p) {
  switch (p) {
    case Placement::uniform_grid:
      return "uniform-grid";
    case Placement::uniform_random:
      return "uniform-random";
    case Placement::adversarial_cluster:
      return "adversarial-cluster";
  }
  return "uniform-random";
}

PointSet generate_points(const GeneratorSpec& spec) {
  if (spec.count == 0) throw ConfigError("generator.n", "need at least one point");
  if (spec.dimension == 0) throw ConfigError("generator.dimension", "must be at least 1");
  const std::size_t n = spec.count, d = spec.dimension;
  std::vector<double> coords(n * d);
  std::mt19937_64 gen(spec.seed);
  auto unit = [&] { return unit_from_bits(gen()); };

  switch (spec.placement) {
    case Placement::uniform_grid: {
      // Cell midpoints of a side^d grid, first n cells in lexicographic order.
      std::size_t side = 1;
      while (static_cast<double>(side) < std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d)) - 1e-9) ++side;
      if (d == 1) side = n;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t cell = i;
        for (std::size_t a = d; a-- > 0;) {
          coords[i * d + a] = (static_cast<double>(cell % side) + 0.5) / static_cast<double>(side);
          cell /= side;
        }
      }
      break;
    }
    case Placement::uniform_random:
      for (auto& c : coords) c = unit();
      break;
    case Placement::adversarial_cluster: {
      // Half the points (rounded up) in geometrically shrinking shells around
      // the cluster center on the first axis, alternating sides; the rest
      // uniform. Every cluster point is within 0.05 of the center.
      const std::size_t clustered = (n + 1) / 2;
      constexpr int kScales = 6;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 1; a < d; ++a) coords[i * d + a] = unit();
        if (i < clustered) {
          const double scale = 0.05 * std::ldexp(1.0, -static_cast<int>(i % kScales));
          const double offset = scale * (0.5 + 0.5 * unit()) * (i % 2 == 0 ? 1.0 : -1.0);
          coords[i * d] = std::clamp(spec.cluster_center + offset, 0.0, 1.0);
        } else {
          coords[i * d] = unit();
        }
      }
      break;
    }
  }
  return PointSet(d, std::move(coords));
}

}  // namespace metric_active
