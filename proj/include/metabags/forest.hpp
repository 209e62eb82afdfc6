#pragma once

#include <cstdint>
#include <vector>

#include "metabags/cart.hpp"

namespace metabags {

struct ForestParams {
  std::size_t trees = 100;
  std::size_t features_per_split = 1;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 64;
  bool bootstrap = true;  // false grows every tree on the full training set
};

/// Bagged CART trees with per-split feature sampling; predicts the tree mean.
class RandomForestModel final : public TrainedModel {
 public:
  RandomForestModel(std::vector<RegressionTreeModel> trees, std::size_t dimension);

  std::string_view identifier() const override { return "rf"; }
  std::size_t dimension() const override { return dimension_; }
  double predict(std::span<const double> x) const override;

  const std::vector<RegressionTreeModel>& trees() const noexcept { return trees_; }

 private:
  std::vector<RegressionTreeModel> trees_;
  std::size_t dimension_;
};

RandomForestModel train_random_forest(const Dataset& data, const ForestParams& params,
                                      std::uint64_t seed);

}  // namespace metabags
