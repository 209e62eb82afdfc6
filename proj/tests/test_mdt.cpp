#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "metabags/mdt.hpp"
#include "metabags/random.hpp"

using namespace metabags;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix make(std::size_t r, std::size_t c, std::vector<double> v) { return Matrix(r, c, std::move(v)); }

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

// Independent recomputation: (mean residual)^2 per expert, plain loops.
struct OracleImpurity {
  double value;
  std::size_t expert;
};

OracleImpurity oracle_impurity(const Matrix& r, const std::vector<std::size_t>& rows) {
  OracleImpurity best{kInf, 0};
  double best_mse = kInf;
  for (std::size_t j = 0; j < r.cols(); ++j) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i : rows) {
      s += r(i, j);
      ss += r(i, j) * r(i, j);
    }
    const double m = s / static_cast<double>(rows.size());
    const double mse = ss / static_cast<double>(rows.size());
    if (m * m < best.value || (m * m == best.value && mse < best_mse)) {
      best = {m * m, j};
      best_mse = mse;
    }
  }
  return best;
}

double oracle_gain(const Matrix& r, const std::vector<std::size_t>& rows, const std::vector<double>& z,
                   double t) {
  std::vector<std::size_t> l, rt;
  for (std::size_t i : rows) (z[i] <= t ? l : rt).push_back(i);
  if (l.empty() || rt.empty()) return -kInf;
  const double n = static_cast<double>(rows.size());
  return oracle_impurity(r, rows).value - static_cast<double>(l.size()) / n * oracle_impurity(r, l).value -
         static_cast<double>(rt.size()) / n * oracle_impurity(r, rt).value;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Rows of the sample reaching each node, by walking the finished tree.
std::map<std::size_t, std::vector<std::size_t>> route_sample(const MetaDecisionTree& tree, const Matrix& z,
                                                             std::span<const std::size_t> rows) {
  std::map<std::size_t, std::vector<std::size_t>> at;
  for (std::size_t r : rows) {
    std::size_t n = 0;
    at[n].push_back(r);
    while (!tree.nodes()[n].is_leaf()) {
      const auto& node = tree.nodes()[n];
      n = z(r, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
      at[n].push_back(r);
    }
  }
  return at;
}

std::size_t recursive_route(const MetaDecisionTree& tree, std::size_t n, std::span<const double> z) {
  const auto& node = tree.nodes()[n];
  if (node.is_leaf()) return node.expert;
  return recursive_route(tree, z[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right,
                         z);
}

void audit_tree(const MetaDecisionTree& tree, const Matrix& z, const Matrix& r,
                std::span<const std::size_t> rows) {
  const auto at = route_sample(tree, z, rows);
  for (std::size_t n = 0; n < tree.nodes().size(); ++n) {
    const auto& node = tree.nodes()[n];
    const auto it = at.find(n);
    REQUIRE(it != at.end());
    CHECK(node.support == it->second.size());
    if (node.is_leaf()) {
      CHECK(node.expert == oracle_impurity(r, it->second).expert);
    } else {
      CHECK(node.support >= tree.upsilon());
      CHECK(node.gain >= tree.epsilon());
      CHECK(node.gain > 0.0);
      CHECK(tree.nodes()[node.left].support + tree.nodes()[node.right].support == node.support);
      CHECK(node.gain == doctest::Approx(oracle_gain(r, it->second, z.column(node.feature), node.threshold))
                             .epsilon(1e-9));
    }
  }
}

}  // namespace

TEST_CASE("node_impurity examples") {
  const auto a = node_impurity(make(2, 2, {1, -2, 1, 2}));
  CHECK(a.value == 0.0);
  CHECK(a.expert == 1);
  CHECK(a.squared_bias[0] == 1.0);
  CHECK(node_impurity(make(1, 1, {3})).value == 9.0);
  CHECK(node_impurity(make(2, 1, {1, -3}), BiasMode::MeanSquared).value == 5.0);
  CHECK_THROWS_AS((void)node_impurity(Matrix(0, 2)), std::invalid_argument);

  // Equal bias: the lower MSE wins, then the lower index.
  const auto tie = node_impurity(make(2, 2, {-3, -1, 3, 1}));
  CHECK(tie.value == 0.0);
  CHECK(tie.expert == 1);
  CHECK(node_impurity(make(2, 2, {1, 1, -1, -1})).expert == 0);
}

TEST_CASE("node_impurity against direct recomputation") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Matrix r = random_matrix(10, 3, rng);
    const auto got = node_impurity(r);
    const auto want = oracle_impurity(r, iota_rows(10));
    CHECK(got.value == doctest::Approx(want.value).epsilon(1e-12));
    CHECK(got.expert == want.expert);
  }
}

TEST_CASE("split_gain") {
  // Expert 0 exact on the left half, expert 1 exact on the right half.
  const Matrix r = make(4, 2, {0, 2, 0, 2, 3, 0, 3, 0});
  const std::vector<bool> halves = {true, true, false, false};
  const double parent = node_impurity(r).value;
  CHECK(parent > 0.0);
  CHECK(split_gain(r, halves) == doctest::Approx(parent));
  // Brute force over every mask: nothing beats the halves.
  double best = -kInf;
  for (int mask = 1; mask < 15; ++mask) {
    std::vector<bool> left(4);
    for (int i = 0; i < 4; ++i) left[i] = (mask >> i) & 1;
    const double g = split_gain(r, left);
    CHECK(g <= parent + 1e-15);
    best = std::max(best, g);
  }
  CHECK(best == doctest::Approx(parent));

  const Matrix same = make(4, 1, {1, 2, 1, 2});
  CHECK(split_gain(same, {true, true, false, false}) == doctest::Approx(0.0));
  CHECK_THROWS_AS((void)split_gain(same, {true, true, true, true}), std::invalid_argument);

  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Matrix m = random_matrix(8, 3, rng);
    std::vector<bool> left(8);
    for (std::size_t i = 0; i < 8; ++i) left[i] = (rng() & 1) != 0;
    left[0] = true;
    left[1] = false;
    for (auto mode : {BiasMode::SquaredMean, BiasMode::MeanSquared}) {
      CHECK(split_gain(m, left, mode) <= node_impurity(m, mode).value + 1e-15);
    }
  }
}

TEST_CASE("candidate_matrices") {
  Rng rng(3);
  const Matrix r = random_matrix(12, 2, rng);
  Matrix z = random_matrix(12, 2, rng);
  for (std::size_t i = 0; i < 12; ++i) z(i, 1) = 0.0;
  const auto c = candidate_matrices(z, r, 6, 9);
  CHECK(c.thresholds.rows() == 2);
  CHECK(c.thresholds.cols() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(c.gains(1, k) == -kInf);
  const auto col = z.column(0);
  const double lo = *std::min_element(col.begin(), col.end()), hi = *std::max_element(col.begin(), col.end());
  for (std::size_t k = 0; k < 6; ++k) {
    const double t = c.thresholds(0, k);
    CHECK(t >= lo);
    CHECK(t <= hi);
    CHECK(c.gains(0, k) == doctest::Approx(oracle_gain(r, iota_rows(12), col, t)).epsilon(1e-12));
  }
  CHECK(candidate_matrices(z, r, 6, 9).thresholds == c.thresholds);

  // phi = 1, Q = 1 composes with split_gain.
  const Matrix z1 = make(4, 1, {0.1, 0.4, 0.6, 0.9});
  const Matrix r1 = make(4, 2, {0, 1, 0, 1, 1, 0, 1, 0});
  const auto one = candidate_matrices(z1, r1, 1, 4);
  const double t = one.thresholds(0, 0);
  std::vector<bool> left(4);
  for (std::size_t i = 0; i < 4; ++i) left[i] = z1(i, 0) <= t;
  const bool both = std::count(left.begin(), left.end(), true) % 4 != 0;
  if (both) {
    CHECK(one.gains(0, 0) == doctest::Approx(split_gain(r1, left)));
  } else {
    CHECK(one.gains(0, 0) == -kInf);
  }
  CHECK_THROWS_AS((void)candidate_matrices(make(1, 1, {1}), make(1, 1, {1}), 3, 1), std::invalid_argument);
}

TEST_CASE("candidate search matches the exhaustive scan when phi covers every gap") {
  // 20 rows over 4 distinct values: 50 uniform draws hit all 3 gaps with near certainty.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 50);
    Matrix z(20, 1);
    for (std::size_t i = 0; i < 20; ++i) z(i, 0) = static_cast<double>(rng() % 4);
    z(0, 0) = 0.0;
    z(1, 0) = 3.0;
    const Matrix r = random_matrix(20, 2, rng);
    const auto c = candidate_matrices(z, r, 50, seed);
    double got = -kInf;
    for (std::size_t k = 0; k < 50; ++k) got = std::max(got, c.gains(0, k));
    double want = -kInf;
    for (double t : {0.5, 1.5, 2.5}) want = std::max(want, oracle_gain(r, iota_rows(20), z.column(0), t));
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("select_criterion") {
  CHECK(select_criterion(make(2, 2, {1, 2, 3, 0})) == std::optional<std::size_t>(1));
  CHECK(!select_criterion(make(2, 2, {-kInf, -kInf, -kInf, -kInf})).has_value());
  CHECK(select_criterion(make(2, 2, {3, 0, 0, 3})) == std::optional<std::size_t>(0));
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Matrix a = random_matrix(5, 10, rng);
    std::size_t arg = 0;
    double best = -kInf;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 10; ++j) {
        if (a(i, j) > best) {
          best = a(i, j);
          arg = i;
        }
      }
    }
    CHECK(select_criterion(a) == std::optional<std::size_t>(arg));
  }
}

TEST_CASE("golden_refine") {
  const auto concave = [](double t) { return -(t - 2.0) * (t - 2.0); };
  CHECK(std::abs(golden_refine(concave, 0.0, 5.0, 20, 4.5).threshold - 2.0) < 0.01);
  const auto r0 = golden_refine(concave, 0.0, 5.0, 0, 4.5);
  CHECK(r0.threshold == 4.5);
  CHECK(r0.gain == concave(4.5));
  CHECK_THROWS_AS((void)golden_refine(concave, 1.0, 1.0, 3, 1.0), std::invalid_argument);

  // At most rho new evaluations beyond the seed's (the first step needs two).
  int calls = 0;
  const auto counted = [&](double t) {
    ++calls;
    return concave(t);
  };
  (void)golden_refine(counted, 0.0, 5.0, 3, 4.5, concave(4.5));
  CHECK(calls == 4);

  // Piecewise-constant empirical gains over random nodes.
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Matrix r = random_matrix(15, 3, rng);
    const Matrix z = random_matrix(15, 1, rng);
    const auto rows = iota_rows(15);
    const auto col = z.column(0);
    const auto fn = [&](double th) { return oracle_gain(r, rows, col, th); };
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double seed_t = u(rng);
    const double seed_g = fn(seed_t);
    const auto res = golden_refine(fn, -1.0, 1.0, 3, seed_t, seed_g);
    CHECK(res.gain >= seed_g);
    CHECK(res.gain == fn(res.threshold));
  }
}

TEST_CASE("induction: a perfect expert gives a stump") {
  Rng rng(6);
  Matrix r = random_matrix(40, 2, rng);
  for (std::size_t i = 0; i < 40; ++i) r(i, 1) = 0.0;
  const Matrix z = random_matrix(40, 3, rng);
  InductionConfig cfg;
  cfg.seed = 1;
  const auto tree = induce_tree(z, r, cfg);
  CHECK(tree.nodes().size() == 1);
  CHECK(tree.route(z.row(0)) == 1);
  CHECK(tree.depth() == 0);
}

TEST_CASE("induction recovers a two-region problem") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 200;
    Matrix z = random_matrix(n, 2, rng, 0.0, 1.0);
    Matrix r(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const bool low = z(i, 0) <= 0.5;
      r(i, 0) = low ? 0.0 : 1.0;
      r(i, 1) = low ? -1.0 : 0.0;
    }
    InductionConfig cfg;
    cfg.seed = seed;
    const auto tree = induce_tree(z, r, cfg);
    const auto& root = tree.nodes()[0];
    REQUIRE(!root.is_leaf());
    CHECK(root.feature == 0);
    CHECK(std::abs(root.threshold - 0.5) < 0.1);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = z(i, 0);
      if (std::abs(v - 0.5) > 0.1) CHECK(tree.route(z.row(i)) == (v <= 0.5 ? 0u : 1u));
    }
    audit_tree(tree, z, r, iota_rows(n));
  }
}

TEST_CASE("stopping-rule audit and support reproduction on random bootstrap trees") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const Matrix z = random_matrix(300, 4, rng);
    Matrix r = random_matrix(300, 3, rng);
    for (std::size_t i = 0; i < 300; ++i) r(i, 0) += z(i, 0) > 0.2 ? 0.8 : -0.4;
    std::vector<std::size_t> rows(90);
    for (auto& v : rows) v = rng() % 300;
    InductionConfig cfg;
    cfg.seed = seed;
    const auto tree = induce_tree(z, r, rows, cfg);
    CHECK(tree.upsilon() == 2);
    CHECK(tree.epsilon() == doctest::Approx(std::abs(oracle_impurity(r, rows).value) * 1e-2).epsilon(1e-12));
    audit_tree(tree, z, r, rows);

    // Pure function of (table, residuals, config, seed).
    const auto again = induce_tree(z, r, rows, cfg);
    CHECK(again.dump() == tree.dump());

    // Reference recursive walk.
    for (std::size_t i = 0; i < 50; ++i) CHECK(tree.route(z.row(i)) == recursive_route(tree, 0, z.row(i)));
  }
}

TEST_CASE("upsilon grows with the sample") {
  Rng rng(7);
  const Matrix z = random_matrix(1000, 2, rng);
  const Matrix r = random_matrix(1000, 2, rng);
  InductionConfig cfg;
  const auto tree = induce_tree(z, r, cfg);
  CHECK(tree.upsilon() == 10);
  audit_tree(tree, z, r, iota_rows(1000));
}

TEST_CASE("routing boundary and validation") {
  std::vector<MetaTreeNode> nodes(3);
  nodes[0].feature = 0;
  nodes[0].threshold = 0.5;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].expert = 0;
  nodes[2].expert = 1;
  const MetaDecisionTree tree(nodes, 1, 2, 0.0, 2);
  CHECK(tree.route(std::vector<double>{0.5}) == 0);
  CHECK(tree.route(std::vector<double>{0.5000001}) == 1);
  CHECK_THROWS_AS((void)tree.route(std::vector<double>{0.5, 1.0}), std::invalid_argument);
  CHECK(tree.leaf_count() == 2);

  auto bad = nodes;
  bad[2].expert = 5;
  CHECK_THROWS_AS(MetaDecisionTree(bad, 1, 2, 0.0, 2), std::invalid_argument);
  bad = nodes;
  bad[0].right = 9;
  CHECK_THROWS_AS(MetaDecisionTree(bad, 1, 2, 0.0, 2), std::invalid_argument);

  const std::string dump = tree.dump();
  CHECK(dump.find("split") != std::string::npos);
  CHECK(dump.find("leaf") != std::string::npos);
  CHECK(std::count(dump.begin(), dump.end(), '\n') >= 3);
}

TEST_CASE("config validation") {
  InductionConfig c;
  c.phi = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.upsilon_floor = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  Rng rng(8);
  const Matrix z = random_matrix(10, 1, rng), r = random_matrix(10, 1, rng);
  CHECK_THROWS_AS((void)induce_tree(z, r, std::span<const std::size_t>{}, InductionConfig{}),
                  std::invalid_argument);
}
