#include "metabags/learners.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metabags/boosting.hpp"
#include "metabags/cart.hpp"
#include "metabags/forest.hpp"
#include "metabags/knn.hpp"
#include "metabags/lasso.hpp"
#include "metabags/mars.hpp"

namespace metabags {

namespace {

const std::map<std::string, ParamMap>& defaults_table() {
  static const std::map<std::string, ParamMap> table = {
      {"cart", {{"min_leaf", 5}, {"max_depth", 12}}},
      {"rf", {{"trees", 100}, {"feature_fraction", 0.34}, {"min_leaf", 5}, {"max_depth", 64}}},
      {"gb",
       {{"trees", 100}, {"learning_rate", 0.1}, {"max_depth", 3}, {"min_leaf", 1}, {"subsample", 1.0}}},
      {"knn", {{"k", 5}}},
      {"lasso", {{"penalty", 0.01}, {"max_iterations", 1000}, {"tolerance", 1e-7}}},
      {"mars", {{"max_basis", 10}, {"candidate_knots", 20}}},
  };
  return table;
}

std::size_t as_count(const ParamMap& p, const std::string& name) {
  const double v = p.at(name);
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("parameter '" + name + "' must be a non-negative number");
  }
  return static_cast<std::size_t>(std::llround(v));
}

// Clamp a row-count parameter into [1, N] so small training splits stay valid.
std::size_t clamp_rows(std::size_t v, std::size_t n) { return std::clamp<std::size_t>(v, 1, n); }

}  // namespace

const std::vector<std::string>& learner_identifiers() {
  static const std::vector<std::string> ids = {"cart", "rf", "gb", "knn", "lasso", "mars"};
  return ids;
}

bool is_learner(std::string_view id) {
  const auto& ids = learner_identifiers();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

ParamMap default_params(std::string_view id) {
  const auto& table = defaults_table();
  auto it = table.find(std::string(id));
  if (it == table.end()) throw std::invalid_argument("unknown learner: " + std::string(id));
  return it->second;
}

void validate_spec(const LearnerSpec& spec) {
  const ParamMap defaults = default_params(spec.id);
  for (const auto& [name, value] : spec.params) {
    if (!defaults.contains(name)) {
      throw std::invalid_argument("learner '" + spec.id + "' has no parameter '" + name + "'");
    }
    if (!std::isfinite(value)) {
      throw std::invalid_argument("parameter '" + name + "' must be finite");
    }
  }
}

ModelPtr train_learner(const LearnerSpec& spec, const Dataset& data, std::uint64_t seed) {
  validate_spec(spec);
  ParamMap p = default_params(spec.id);
  for (const auto& [name, value] : spec.params) p[name] = value;
  const std::size_t n = data.size();

  if (spec.id == "cart") {
    return std::make_shared<RegressionTreeModel>(
        train_cart(data, clamp_rows(as_count(p, "min_leaf"), n), as_count(p, "max_depth")));
  }
  if (spec.id == "rf") {
    ForestParams fp;
    fp.trees = as_count(p, "trees");
    const double fraction = p.at("feature_fraction");
    fp.features_per_split = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.dimension()))), 1,
        data.dimension());
    fp.min_leaf = clamp_rows(as_count(p, "min_leaf"), n);
    fp.max_depth = as_count(p, "max_depth");
    return std::make_shared<RandomForestModel>(train_random_forest(data, fp, seed));
  }
  if (spec.id == "gb") {
    BoostingParams bp;
    bp.trees = as_count(p, "trees");
    bp.learning_rate = p.at("learning_rate");
    bp.max_depth = as_count(p, "max_depth");
    bp.min_leaf = clamp_rows(as_count(p, "min_leaf"), n);
    bp.subsample = p.at("subsample");
    return std::make_shared<GradientBoostingModel>(train_gradient_boosting(data, bp, seed));
  }
  if (spec.id == "knn") {
    return std::make_shared<KnnModel>(train_knn(data, clamp_rows(as_count(p, "k"), n)));
  }
  if (spec.id == "lasso") {
    return std::make_shared<LassoModel>(train_lasso(data, p.at("penalty"),
                                                    as_count(p, "max_iterations"),
                                                    p.at("tolerance")));
  }
  if (spec.id == "mars") {
    return std::make_shared<MarsModel>(
        train_mars_lite(data, as_count(p, "max_basis"), as_count(p, "candidate_knots")));
  }
  throw std::invalid_argument("unknown learner: " + spec.id);
}

Regressor::Regressor(LearnerSpec spec) : spec_(std::move(spec)) { validate_spec(spec_); }

ModelPtr Regressor::train(const Dataset& data, std::uint64_t seed) const {
  return train_learner(spec_, data, seed);
}

}  // namespace metabags
