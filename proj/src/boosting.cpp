#include "metabags/boosting.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "metabags/stats.hpp"

namespace metabags {

GradientBoostingModel::GradientBoostingModel(double initial, double learning_rate,
                                             std::vector<RegressionTreeModel> stages,
                                             std::size_t dimension)
    : initial_(initial),
      learning_rate_(learning_rate),
      stages_(std::move(stages)),
      dimension_(dimension) {}

double GradientBoostingModel::predict(std::span<const double> x) const {
  return predict_staged(x, stages_.size());
}

double GradientBoostingModel::predict_staged(std::span<const double> x, std::size_t stages) const {
  check_dimension(x);
  double out = initial_;
  const std::size_t count = std::min(stages, stages_.size());
  for (std::size_t s = 0; s < count; ++s) out += learning_rate_ * stages_[s].predict(x);
  return out;
}

GradientBoostingModel train_gradient_boosting(const Dataset& data, const BoostingParams& params,
                                              std::uint64_t seed) {
  if (params.trees == 0) throw std::invalid_argument("gradient boosting: trees must be >= 1");
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
    throw std::invalid_argument("gradient boosting: learning_rate must lie in (0, 1]");
  }
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) {
    throw std::invalid_argument("gradient boosting: subsample must lie in (0, 1]");
  }
  const std::size_t n = data.size();
  const auto& y = data.target();
  const double initial = mean(y);
  std::vector<double> fitted(n, initial);
  std::vector<double> residual(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto sub_n = std::max<std::size_t>(
      1, static_cast<std::size_t>(params.subsample * static_cast<double>(n)));
  CartParams cart{params.min_leaf, params.max_depth, 0};

  std::vector<RegressionTreeModel> stages;
  stages.reserve(params.trees);
  Rng rng = make_rng(seed);
  for (std::size_t s = 0; s < params.trees; ++s) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
    std::vector<std::size_t> rows = all;
    if (sub_n < n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(sub_n);
      std::sort(rows.begin(), rows.end());
    }
    auto tree = grow_regression_tree(data.features(), residual, rows, cart);
    for (std::size_t i = 0; i < n; ++i) fitted[i] += params.learning_rate * tree.predict(data.row(i));
    stages.push_back(std::move(tree));
  }
  return GradientBoostingModel(initial, params.learning_rate, std::move(stages), data.dimension());
}

}  // namespace metabags
