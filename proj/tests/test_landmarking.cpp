#include <chrono>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "metabags/dataset.hpp"
#include "metabags/landmarking.hpp"
#include "metabags/random.hpp"
#include "metabags/stats.hpp"

using namespace metabags;

namespace {

double standardized_distance(const Standardizer& s, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double sd = s.stdevs()[j] > 0.0 ? s.stdevs()[j] : 1.0;
    const double d = (a[j] - b[j]) / sd;
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("identifiers") {
  CHECK(landmarker_identifiers()[0] == "lm_lasso");
  CHECK(landmarker_identifiers()[1] == "lm_1nn");
  CHECK(landmarker_identifiers()[2] == "lm_mars");
  CHECK(landmarker_identifiers()[3] == "lm_cart");
}

TEST_CASE("two-point dataset trains every landmarker") {
  Matrix x(2, 2);
  x(1, 0) = 1.0;
  x(1, 1) = 2.0;
  const Dataset d(x, {0.0, 1.0});
  const auto set = fit_landmarkers(d);
  const auto lm = set.local_landmarks(d.row(0));
  CHECK(lm.nn1_distance == 0.0);
  CHECK(lm.predictions[1] == 0.0);
}

TEST_CASE("constant target") {
  const Dataset base = generate_quartic_surface(60, 0.0, 1.0, 2);
  const Dataset d(base.features(), std::vector<double>(60, 3.5));
  const auto set = fit_landmarkers(d);
  for (const auto& q : {std::vector<double>{0.1, 0.9}, std::vector<double>{1.5, -0.2}}) {
    const auto lm = set.local_landmarks(q);
    for (double p : lm.predictions) CHECK(p == doctest::Approx(3.5));
    CHECK(lm.cart_leaf_depth == 0);
    CHECK(lm.cart_leaf_count == 60);
    CHECK(lm.cart_leaf_variance == 0.0);
  }
}

TEST_CASE("query equal to a training point") {
  const Dataset d = generate_quartic_surface(200, 0.0, 1.0, 3);
  const auto set = fit_landmarkers(d);
  for (std::size_t i : {0, 17, 199}) {
    const auto lm = set.local_landmarks(d.row(i));
    CHECK(lm.nn1_distance == 0.0);
    CHECK(lm.predictions[1] == d.target()[i]);
  }
  std::vector<double> off = {0.5, 0.5};
  CHECK(set.local_landmarks(off).nn1_distance > 0.0);
  CHECK_THROWS_AS((void)set.local_landmarks(std::vector<double>{0.5}), std::invalid_argument);
}

TEST_CASE("hand-built mars model: interval at 0.5 with knots 0.3 and 0.7") {
  // Training coordinates on feature 0, oracle mass by direct count.
  const std::vector<double> coords = {0.0, 0.1, 0.2, 0.35, 0.4, 0.5, 0.6, 0.69, 0.8, 1.0};
  const std::vector<double> edges = {0.0, 0.3, 0.7, 1.0};
  std::vector<double> mass(3, 0.0);
  for (double c : coords) {
    for (std::size_t i = 0; i < 3; ++i) {
      const bool last = i == 2;
      if (c >= edges[i] && (c < edges[i + 1] || (last && c <= edges[i + 1]))) mass[i] += 0.1;
    }
  }
  const MarsModel m(0.0, {{0, 0.3, 1}, {0, 0.7, -1}}, {1.0, 1.0}, {{edges, mass}});
  const auto info = locate_interval(m.intervals()[0], 0.5);
  CHECK(info.lower == 0.3);
  CHECK(info.upper == 0.7);
  CHECK(info.width == doctest::Approx(0.4));
  CHECK(info.edge_distance == doctest::Approx(0.2));
  CHECK(info.mass == doctest::Approx(0.5));
  CHECK(m.knots(0) == std::vector<double>{0.3, 0.7});
}

TEST_CASE("trained mars interval masses match a direct count and sum to one") {
  const Dataset d = generate_quartic_surface(400, 0.0, 1.0, 5);
  const auto set = fit_landmarkers(d);
  for (std::size_t f = 0; f < 2; ++f) {
    const auto& fi = set.mars().intervals()[f];
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < fi.edges.size(); ++i) {
      std::size_t hits = 0;
      for (std::size_t r = 0; r < d.size(); ++r) {
        const double c = d.features()(r, f);
        const bool last = i + 2 == fi.edges.size();
        if (c >= fi.edges[i] && (c < fi.edges[i + 1] || (last && c <= fi.edges[i + 1]))) ++hits;
      }
      CHECK(fi.mass[i] == doctest::Approx(static_cast<double>(hits) / 400.0).epsilon(1e-12));
      total += fi.mass[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("local landmark invariants on random queries") {
  const Dataset d = generate_quartic_surface(300, 0.0, 1.0, 6);
  const auto set = fit_landmarkers(d);
  Rng rng(8);
  std::uniform_real_distribution<double> u(-0.3, 1.3);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> q = {u(rng), u(rng)};
    const auto lm = set.local_landmarks(q);
    CHECK(lm.mars_edge_distance <= lm.mars_interval_width);
    CHECK(lm.mars_interval_mass >= 0.0);
    CHECK(lm.mars_interval_mass <= 1.0);
    CHECK(lm.mars_interval_width > 0.0);

    // Re-route the training rows into the query's CART leaf.
    const TreeNode* leaf = &set.cart().leaf_for(q);
    std::vector<double> ys;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (&set.cart().leaf_for(d.row(i)) == leaf) ys.push_back(d.target()[i]);
    }
    CHECK(lm.cart_leaf_count == ys.size());
    const double sd = population_stdev(ys);
    CHECK(std::abs(lm.cart_leaf_variance - sd * sd) <= 1e-10);
    CHECK(lm.predictions[3] == doctest::Approx(mean(ys)).epsilon(1e-12));

    // Nearest distance by brute force, then the triangle inequality.
    const auto& s = set.nearest_neighbor().index().transform();
    double best = INFINITY;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double dist = standardized_distance(s, q, d.row(i));
      if (dist < best) {
        best = dist;
        arg = i;
      }
    }
    CHECK(lm.nn1_distance == doctest::Approx(best).epsilon(1e-12));
    CHECK(lm.predictions[1] == d.target()[arg]);
    const std::size_t third = static_cast<std::size_t>(t) % d.size();
    CHECK(lm.nn1_distance <= standardized_distance(s, q, d.row(third)) +
                                 standardized_distance(s, d.row(third), d.row(arg)) + 1e-12);

    const auto chars = lm.characteristics();
    CHECK(chars.size() == 7);
    CHECK(chars[6] == lm.nn1_distance);
  }
}

TEST_CASE("landmarkers on the 1k quartic surface train quickly") {
  const Dataset d = generate_quartic_surface(1000, 0.0, 0.8, 9);
  const auto start = std::chrono::steady_clock::now();
  const auto set = fit_landmarkers(d);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Measured well under a second at build time; 10 s leaves a wide margin.
  CHECK(secs < 10.0);
  CHECK(set.dimension() == 2);
}
