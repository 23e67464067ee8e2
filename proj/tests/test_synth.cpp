#include <doctest.h>

#include <cmath>
#include <random>

#include "metric_active/synth.hpp"

using namespace metric_active;

TEST_CASE("eta models") {
  CHECK(eta(Monotonic1D{8.0, 0.5}, 0.5) == 0.0);
  CHECK(eta(Monotonic1D{8.0, 0.5}, 0.75) == doctest::Approx(std::tanh(1.0)));
  const Massart1D two{{0.5}, {-1, 1}, 0.8};
  CHECK(eta(two, 0.25) == -0.8);
  CHECK(eta(two, 0.75) == 0.8);
  CHECK(eta(two, 0.5) == 0.0);
  const CustomTable table{{{0.2}, {0.7}}, {0.3, -0.6}};
  CHECK(eta(table, 0.7) == -0.6);
  CHECK_THROWS_AS(eta(table, 0.5), DomainError);
  CHECK_THROWS_AS(eta(Monotonic1D{}, 1.5), DomainError);
  const Curved2D disc;
  const std::vector<double> inside{0.5, 0.5}, outside{0.95, 0.95};
  CHECK(eta(disc, inside) == disc.eta0);
  CHECK(eta(disc, outside) == -disc.eta0);
  CHECK(model_name(two) == "massart1d");
}

TEST_CASE("bayes label") {
  CHECK(bayes_label(-0.3) == -1);
  CHECK(bayes_label(0.0) == 0);
  CHECK(bayes_label(0.01) == 1);
}

TEST_CASE("label source") {
  SUBCASE("deterministic extremes") {
    LabelSource s({1.0, -1.0}, 5);
    for (int i = 0; i < 3; ++i) {
      CHECK(s.sample(0) == 1);
      CHECK(s.sample(1) == -1);
    }
  }
  SUBCASE("fair coins over 10^4 points") {
    LabelSource s(std::vector<double>(10000, 0.0), 17);
    int pos = 0;
    for (PointIndex i = 0; i < 10000; ++i) pos += s.sample(i) == 1;
    // three binomial standard deviations: 0.5 +- 3 * 0.005
    CHECK(pos >= 4850);
    CHECK(pos <= 5150);
  }
  SUBCASE("cached and a function of (seed, index)") {
    std::vector<double> eta(300);
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = std::sin(static_cast<double>(i));
    LabelSource a(eta, 9), b(eta, 9);
    std::vector<int> first(300);
    for (PointIndex i = 0; i < 300; ++i) first[static_cast<std::size_t>(i)] = a.sample(i);
    for (PointIndex i = 299; i >= 0; --i) CHECK(b.sample(i) == first[static_cast<std::size_t>(i)]);
    for (PointIndex i = 0; i < 300; ++i) CHECK(a.sample(i) == first[static_cast<std::size_t>(i)]);
  }
  SUBCASE("rate follows (1 + eta) / 2") {
    LabelSource s(std::vector<double>(20000, 0.6), 3);
    int pos = 0;
    for (PointIndex i = 0; i < 20000; ++i) pos += s.sample(i) == 1;
    const double sd = std::sqrt(0.8 * 0.2 / 20000.0);
    CHECK(std::abs(pos / 20000.0 - 0.8) <= 4 * sd);
  }
}

TEST_CASE("replication") {
  CHECK(replication_factor(0.5) == 4);
  CHECK(replication_factor(1.0) == 1);
  CHECK(replication_factor(0.34) == 9);
  const auto ps = PointSet::from_1d({0.1, 0.5, 0.9});
  const auto [rep, model] = replicate_points(ps, Monotonic1D{}, 0.34);
  CHECK(rep.size() == 27);
  const auto base = eta_values(Monotonic1D{}, ps);
  const auto lifted = eta_values(model, rep);
  for (std::size_t i = 0; i < 27; ++i) {
    CHECK(rep.coord(static_cast<PointIndex>(i)) == ps.coord(static_cast<PointIndex>(i / 9)));
    CHECK(lifted[i] == base[i / 9]);
  }
  const auto [same, m2] = replicate_points(ps, Monotonic1D{}, 1.0);
  CHECK(same == ps);

  const CustomTable table{{{0.1}, {0.5}, {0.9}}, {0.2, -0.4, 0.9}};
  const auto [trep, tmodel] = replicate_points(ps, table, 0.5);
  const auto teta = eta_values(tmodel, trep);
  for (std::size_t i = 0; i < 12; ++i) CHECK(teta[i] == table.eta[i / 4]);
}

TEST_CASE("point generators") {
  const auto grid = generate_points({4, 1, Placement::uniform_grid, 0, 0.5});
  CHECK(grid.raw() == std::vector<double>{0.125, 0.375, 0.625, 0.875});
  const auto grid2 = generate_points({4, 2, Placement::uniform_grid, 0, 0.5});
  CHECK(grid2.raw() == std::vector<double>{0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75});

  const GeneratorSpec random{50, 2, Placement::uniform_random, 77, 0.5};
  CHECK(generate_points(random) == generate_points(random));
  const auto drawn = generate_points(random);
  for (double c : drawn.raw()) {
    CHECK(c >= 0.0);
    CHECK(c < 1.0);
  }

  const auto cluster = generate_points({8, 1, Placement::adversarial_cluster, 4, 0.5});
  int near = 0;
  for (double x : cluster.raw()) near += std::abs(x - 0.5) <= 0.05;
  CHECK(near >= 4);

  CHECK(placement_from_string("uniform-grid") == Placement::uniform_grid);
  CHECK_THROWS_AS(placement_from_string("grid"), ConfigError);
  CHECK_THROWS_AS(generate_points({0, 1, Placement::uniform_grid, 0, 0.5}), ConfigError);
}

TEST_CASE("model validation") {
  CHECK_NOTHROW(validate_model(Massart1D{{0.3, 0.6}, {1, -1, 1}, 0.6}, 0.4));
  CHECK_THROWS_AS(validate_model(Massart1D{{0.6, 0.3}, {1, -1, 1}, 0.6}, 0.4), ConfigError);
  CHECK_THROWS_AS(validate_model(Massart1D{{0.5}, {1, -1, 1}, 0.6}, 0.4), ConfigError);
  CHECK_THROWS_AS(validate_model(Massart1D{{0.5}, {1, -1}, 0.3}, 0.4), ConfigError);
  CHECK_THROWS_AS(validate_model(Massart1D{{0.5}, {1, 2}, 0.6}, 0.4), ConfigError);
  CHECK_THROWS_AS(validate_model(Monotonic1D{-1.0, 0.5}, 0.2), ConfigError);
  CHECK_THROWS_AS(validate_model(CustomTable{{{0.1}}, {1.5}}, 0.2), ConfigError);
}

TEST_CASE("massart margin holds on a dense grid") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int t = 0; t < 30; ++t) {
    Massart1D m;
    const int p = 2 + t % 4;
    for (int j = 0; j < p - 1; ++j) m.boundaries.push_back(u(rng));
    std::sort(m.boundaries.begin(), m.boundaries.end());
    for (int j = 0; j < p; ++j) m.signs.push_back(rng() % 2 ? 1 : -1);
    m.eta0 = 0.5 + 0.5 * u(rng);
    const double gamma = 0.45;
    validate_model(m, gamma);
    for (int i = 0; i <= 10000; ++i) {
      const double x = i / 10000.0;
      const bool on_boundary = std::find(m.boundaries.begin(), m.boundaries.end(), x) != m.boundaries.end();
      if (on_boundary) continue;
      std::size_t j = 0;
      while (j < m.boundaries.size() && x > m.boundaries[j]) ++j;
      CHECK(m.signs[j] * eta(m, x) > gamma);
    }
  }
}

TEST_CASE("monotonic anchors") {
  for (double slope : {2.0, 6.0, 15.0}) {
    for (double mid : {0.3, 0.5, 0.62}) {
      const Monotonic1D m{slope, mid};
      for (double gamma : {0.05, 0.2, 0.4}) {
        if (std::abs(eta(m, 0.0)) < gamma || std::abs(eta(m, 1.0)) < gamma) continue;
        const auto a = monotonic_anchors(m, gamma);
        CHECK(std::abs(eta(m, a.left) + gamma) <= 1e-9);
        CHECK(std::abs(eta(m, a.zero)) <= 1e-9);
        CHECK(std::abs(eta(m, a.right) - gamma) <= 1e-9);
        CHECK(a.left < a.zero);
        CHECK(a.zero < a.right);
      }
      for (int i = 0; i < 100; ++i) CHECK(eta(m, i / 100.0) < eta(m, (i + 1) / 100.0));
    }
  }
  CHECK_THROWS_AS(monotonic_anchors(Monotonic1D{1.0, 0.5}, 0.9), DomainError);
}

TEST_CASE("seeded helpers") {
  CHECK(uniform_draws(10, 3) == uniform_draws(10, 3));
  CHECK(splitmix64(1) != splitmix64(2));
  CHECK(unit_from_bits(~0ULL) < 1.0);
  CHECK(unit_from_bits(0) == 0.0);
}
