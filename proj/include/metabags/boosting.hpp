#pragma once

#include <cstdint>
#include <vector>

#include "metabags/cart.hpp"

namespace metabags {

struct BoostingParams {
  std::size_t trees = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
  double subsample = 1.0;  // fraction of rows (without replacement) per stage
};

/// Stagewise additive squared-loss model: initial mean plus shrunken trees fit
/// to the running residuals.
class GradientBoostingModel final : public TrainedModel {
 public:
  GradientBoostingModel(double initial, double learning_rate,
                        std::vector<RegressionTreeModel> stages, std::size_t dimension);

  std::string_view identifier() const override { return "gb"; }
  std::size_t dimension() const override { return dimension_; }
  double predict(std::span<const double> x) const override;

  /// Prediction using only the first `stages` trees.
  double predict_staged(std::span<const double> x, std::size_t stages) const;

  double initial() const noexcept { return initial_; }
  double learning_rate() const noexcept { return learning_rate_; }
  const std::vector<RegressionTreeModel>& stages() const noexcept { return stages_; }

 private:
  double initial_;
  double learning_rate_;
  std::vector<RegressionTreeModel> stages_;
  std::size_t dimension_;
};

GradientBoostingModel train_gradient_boosting(const Dataset& data, const BoostingParams& params,
                                              std::uint64_t seed);

}  // namespace metabags
