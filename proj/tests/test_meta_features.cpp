#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include "doctest.h"
#include "metabags/dataset.hpp"
#include "metabags/landmarking.hpp"
#include "metabags/learners.hpp"
#include "metabags/meta_features.hpp"
#include "metabags/random.hpp"
#include "metabags/stats.hpp"

using namespace metabags;

namespace {

class ConstantModel final : public TrainedModel {
 public:
  ConstantModel(double c, std::size_t dim) : c_(c), dim_(dim) {}
  std::string_view identifier() const override { return "const"; }
  std::size_t dimension() const override { return dim_; }
  double predict(std::span<const double>) const override { return c_; }

 private:
  double c_;
  std::size_t dim_;
};

class FirstCoordinate final : public TrainedModel {
 public:
  explicit FirstCoordinate(std::size_t dim) : dim_(dim) {}
  std::string_view identifier() const override { return "first"; }
  std::size_t dimension() const override { return dim_; }
  double predict(std::span<const double> x) const override { return x[0]; }

 private:
  std::size_t dim_;
};

// Exact quartic surface, so its residuals vanish.
class TrueQuartic final : public TrainedModel {
 public:
  std::string_view identifier() const override { return "truth"; }
  std::size_t dimension() const override { return 2; }
  double predict(std::span<const double> x) const override {
    return std::sqrt(x[0] * x[0] * x[0] * x[0] + x[1] * x[1] * x[1] * x[1]);
  }
};

}  // namespace

TEST_CASE("schema size and names") {
  CHECK(MetaFeatureSchema::expected_size(2, 4) == 45);
  CHECK(MetaFeatureSchema::expected_size(2, 4, false) == 38);
  for (std::size_t n = 1; n < 6; ++n) {
    for (std::size_t m = 1; m < 6; ++m) {
      const MetaFeatureSchema s(default_feature_names(n), std::vector<std::string>(m, "e"), 10);
      CHECK(s.size() == n + 4 * (m + 4) + 4 + 7);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.descriptors()[i].position == i);
      CHECK(s.with_local(false).size() == s.size() - 7);
    }
  }
  const MetaFeatureSchema s({"a", "b"}, {"rf", "gb"}, 10);
  const auto names = s.column_names();
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  CHECK(names[0] == "a");
  CHECK(names[1] == "b");
  CHECK(names.back() == "nn1_distance");
}

TEST_CASE("perturb_neighborhood") {
  const std::vector<double> q = {1.0, -2.0, 3.0};
  const Matrix one = perturb_neighborhood(q, 1, 5);
  CHECK(one.rows() == 1);
  bool differs = false;
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::isfinite(one(0, j)));
    differs = differs || one(0, j) != q[j];
  }
  CHECK(differs);
  CHECK(perturb_neighborhood(q, 7, 5) == perturb_neighborhood(q, 7, 5));
  CHECK(perturb_neighborhood(q, 7, 5) != perturb_neighborhood(q, 7, 6));
  CHECK_THROWS_AS((void)perturb_neighborhood(q, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)perturb_neighborhood(std::vector<double>{NAN}, 3, 1), std::invalid_argument);

  // CLT bounds on the offsets.
  const Matrix big = perturb_neighborhood(q, 10000, 11);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> off(10000);
    for (std::size_t i = 0; i < 10000; ++i) off[i] = big(i, j) - q[j];
    CHECK(std::abs(mean(off)) < 0.04);
    CHECK(std::abs(population_stdev(off) - 1.0) < 0.05);
  }

  // Scaled noise: per-feature stdev follows the scale, zero scale means no noise.
  const std::vector<double> scale = {2.0, 0.0, 0.5};
  const Matrix sc = perturb_neighborhood(q, 10000, 11, scale);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> off(10000);
    for (std::size_t i = 0; i < 10000; ++i) off[i] = sc(i, j) - q[j];
    if (scale[j] == 0.0) {
      CHECK(population_stdev(off) == 0.0);
    } else {
      CHECK(std::abs(population_stdev(off) / scale[j] - 1.0) < 0.05);
    }
  }
}

TEST_CASE("performance_stats") {
  std::vector<ModelPtr> models = {std::make_shared<ConstantModel>(4.0, 1),
                                  std::make_shared<FirstCoordinate>(1)};
  Matrix hood(4, 1, std::vector<double>{1, 2, 3, 4});
  const auto s = performance_stats(models, hood);
  CHECK(s[0].mean == 4.0);
  CHECK(s[0].stdev == 0.0);
  CHECK(s[0].q1 == 4.0);
  CHECK(s[0].q3 == 4.0);
  CHECK(s[1].mean == doctest::Approx(2.5));
  CHECK(s[1].stdev == doctest::Approx(1.1180).epsilon(1e-4));
  CHECK(s[1].q1 == doctest::Approx(1.75));
  CHECK(s[1].q3 == doctest::Approx(3.25));

  const Matrix normal = perturb_neighborhood(std::vector<double>{0.0}, 10000, 3);
  const auto id = performance_stats(std::span<const ModelPtr>(models).subspan(1), normal);
  CHECK(std::abs(id[0].mean) < 0.04);
  CHECK(std::abs(id[0].stdev - 1.0) < 0.05);
  CHECK_THROWS_AS((void)performance_stats(std::span<const ModelPtr>{}, hood), std::invalid_argument);
}

TEST_CASE("build_meta_vector layout") {
  const Dataset d = generate_quartic_surface(200, 0.0, 1.0, 4);
  const auto lm = fit_landmarkers(d);
  std::vector<ModelPtr> experts = {train_learner({"cart", {}}, d), train_learner({"knn", {}}, d),
                                   train_learner({"lasso", {}}, d), std::make_shared<TrueQuartic>()};
  const MetaFeatureSchema schema(d.feature_names(), {"cart", "knn", "lasso", "truth"}, 20);
  CHECK(schema.size() == 45);
  const std::vector<double> q = {0.3, 0.6};
  const auto z = build_meta_vector(q, experts, lm, schema, 9);
  REQUIRE(z.values.size() == 45);
  CHECK(z.values[0] == 0.3);
  CHECK(z.values[1] == 0.6);
  for (double v : z.values) CHECK(std::isfinite(v));

  const auto local = lm.local_landmarks(q);
  for (std::size_t k = 0; k < kLandmarkerCount; ++k) {
    CHECK(z.values[schema.landmark_prediction_offset() + k] == local.predictions[k]);
  }
  const auto chars = local.characteristics();
  for (std::size_t k = 0; k < kLocalCharacteristics; ++k) {
    CHECK(z.values[schema.local_offset() + k] == chars[k]);
  }

  // Performance blocks come from one shared neighbourhood.
  const Matrix hood = perturb_neighborhood(q, 20, 9, lm.nearest_neighbor().index().transform().stdevs());
  std::vector<ModelPtr> all(experts);
  for (const auto& m : lm.models()) all.push_back(m);
  const auto stats = performance_stats(all, hood);
  for (std::size_t m = 0; m < all.size(); ++m) {
    const std::size_t off = schema.performance_offset(m);
    CHECK(z.values[off] == stats[m].mean);
    CHECK(z.values[off + 1] == stats[m].stdev);
    CHECK(z.values[off + 2] == stats[m].q1);
    CHECK(z.values[off + 3] == stats[m].q3);
  }

  const MetaFeatureSchema short_pool(d.feature_names(), {"cart"}, 20);
  CHECK_THROWS_AS((void)build_meta_vector(q, experts, lm, short_pool, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)build_meta_vector(std::vector<double>{0.1}, experts, lm, schema, 1),
                  std::invalid_argument);

  const auto no_local = build_meta_vector(q, experts, lm, schema.with_local(false), 9);
  CHECK(no_local.values.size() == 38);
  CHECK(std::equal(no_local.values.begin(), no_local.values.end(), z.values.begin()));
}

TEST_CASE("permuting the pool permutes the schema blocks") {
  const Dataset d = generate_quartic_surface(150, 0.0, 1.0, 5);
  const auto lm = fit_landmarkers(d);
  const ModelPtr a = train_learner({"cart", {}}, d), b = train_learner({"lasso", {}}, d);
  const MetaFeatureSchema ab(d.feature_names(), {"cart", "lasso"}, 15);
  const MetaFeatureSchema ba(d.feature_names(), {"lasso", "cart"}, 15);
  const std::vector<ModelPtr> pab = {a, b}, pba = {b, a};
  const std::vector<double> q = {0.7, 0.2};
  const auto zab = build_meta_vector(q, pab, lm, ab, 3).values;
  const auto zba = build_meta_vector(q, pba, lm, ba, 3).values;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(zab[ab.performance_offset(0) + k] == zba[ba.performance_offset(1) + k]);
    CHECK(zab[ab.performance_offset(1) + k] == zba[ba.performance_offset(0) + k]);
  }
  for (std::size_t i = ab.performance_offset(2); i < zab.size(); ++i) CHECK(zab[i] == zba[i]);
  CHECK(zab[0] == zba[0]);
}

TEST_CASE("build_meta_table") {
  const Dataset d = generate_quartic_surface(10, 0.0, 1.0, 6);
  const auto lm = fit_landmarkers(d);
  const ModelPtr lasso = train_learner({"lasso", {}}, d);
  std::vector<ModelPtr> experts = {lasso, std::make_shared<TrueQuartic>()};
  const MetaFeatureSchema schema(d.feature_names(), {"lasso", "truth"}, 8);
  const auto table = build_meta_table(d, experts, lm, schema, 21);
  CHECK(table.features.rows() == 10);
  CHECK(table.features.cols() == schema.size());
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(table.residuals(i, 0) == lasso->predict(d.row(i)) - d.target()[i]);
    CHECK(table.residuals(i, 1) == 0.0);
    const auto row = build_meta_vector(d.row(i), experts, lm, schema, derive_seed(21, i));
    CHECK(std::equal(row.values.begin(), row.values.end(), table.features.row(i).begin()));
  }
  const auto again = build_meta_table(d, experts, lm, schema, 21, 3);
  CHECK(again.features == table.features);
  CHECK(again.residuals == table.residuals);
  CHECK(build_meta_table(d, experts, lm, schema, 22).features != table.features);

  const auto cut = truncate_columns(table, schema.size() - 7);
  CHECK(cut.features.cols() == schema.size() - 7);
  CHECK(cut.features(3, 2) == table.features(3, 2));
  CHECK(cut.residuals == table.residuals);

  const auto path = std::filesystem::temp_directory_path() / "metabags_meta_table.csv";
  write_meta_table_csv(table, schema, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("x1,x2,", 0) == 0);
  CHECK(header.find("residual.") != std::string::npos);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 10);
}
