#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "metric_active/core.hpp"
#include "metric_active/neighborhoods.hpp"

namespace metric_active {

// Seeded generators. Everything random in the library goes through these so
// results are bit-identical across platforms (no std::*_distribution).
std::uint64_t splitmix64(std::uint64_t x);
// Uniform double in [0, 1) from the top 53 bits.
double unit_from_bits(std::uint64_t bits);
std::vector<double> uniform_draws(std::size_t count, std::uint64_t seed);

// eta(x) = tanh(slope * (x - midpoint) / 2), i.e. a logistic ramp rescaled
// to (-1, 1). Continuous and strictly increasing on [0, 1].
struct Monotonic1D {
  double slope = 8.0;
  double midpoint = 0.5;
};

// p pieces (lambda_{j-1}, lambda_j) of [0, 1]; `boundaries` holds the p - 1
// interior boundary points, `signs` the p signs s(I_j). eta = s(I_j) * eta0
// inside a piece and 0 exactly on a boundary.
struct Massart1D {
  std::vector<double> boundaries;
  std::vector<int> signs;
  double eta0 = 0.8;

  std::size_t pieces() const { return signs.size(); }
};

enum class CurveShape { disc, sine };

// +eta0 inside the disc (or above the sine curve) in [0, 1]^2, -eta0 on the
// other side, 0 on the boundary curve.
struct Curved2D {
  CurveShape shape = CurveShape::disc;
  double center_x = 0.5;
  double center_y = 0.5;
  double radius = 0.3;
  double amplitude = 0.15;
  double frequency = 1.0;
  double offset = 0.5;
  double eta0 = 0.8;
};

// Explicit eta per coordinate row.
struct CustomTable {
  std::vector<std::vector<double>> coords;
  std::vector<double> eta;
};

using EtaModel = std::variant<Monotonic1D, Massart1D, Curved2D, CustomTable>;

std::string model_name(const EtaModel& model);

// eta at a coordinate vector; DomainError outside the model's domain.
double eta(const EtaModel& model, std::span<const double> x);
inline double eta(const EtaModel& model, double x) { return eta(model, std::span<const double>(&x, 1)); }
std::vector<double> eta_values(const EtaModel& model, const PointSet& ps);

// Rejects malformed parameters (unsorted boundaries, |eta| > 1, eta0 <= gamma
// for Massart models, ...).
void validate_model(const EtaModel& model, double gamma);

// Bayes label sign(eta); 0 iff eta == 0.
int bayes_label(double eta_value);

// Preimages of -gamma, 0, +gamma under a monotonic model, by bisection.
struct MonotonicAnchors {
  double left = 0.0;    // eta(left) = -gamma
  double zero = 0.0;    // eta(zero) = 0
  double right = 0.0;   // eta(right) = +gamma
};
MonotonicAnchors monotonic_anchors(const Monotonic1D& model, double gamma, double tol = 1e-12);

// One +/-1 label per point, drawn with Pr(+1) = (1 + eta) / 2 on first
// request and cached. The draw for point i depends only on (seed, i).
class LabelSource {
 public:
  LabelSource(std::vector<double> eta, std::uint64_t label_seed);

  int sample(PointIndex x);
  double eta(PointIndex x) const { return eta_[static_cast<std::size_t>(x)]; }
  const std::vector<double>& etas() const { return eta_; }
  std::size_t size() const { return eta_.size(); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<double> eta_;
  std::uint64_t seed_;
  std::vector<std::int8_t> cache_;
};

// Number of copies used to emulate repeat queries: ceil(1 / gamma^2).
std::size_t replication_factor(double gamma);

// Each point becomes replication_factor(gamma) co-located copies with
// consecutive indices (copy j of point i gets index i * c + j).
std::pair<PointSet, EtaModel> replicate_points(const PointSet& ps, const EtaModel& model, double gamma);

enum class Placement { uniform_grid, uniform_random, adversarial_cluster };

Placement placement_from_string(const std::string& s);
const char* to_string(Placement p);

struct GeneratorSpec {
  std::size_t count = 1;
  std::size_t dimension = 1;
  Placement placement = Placement::uniform_random;
  std::uint64_t seed = 0;
  double cluster_center = 0.5;
};

PointSet generate_points(const GeneratorSpec& spec);

}  // namespace metric_active
