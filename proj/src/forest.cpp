#include "metabags/forest.hpp"

#include <numeric>
#include <stdexcept>

namespace metabags {

RandomForestModel::RandomForestModel(std::vector<RegressionTreeModel> trees,
                                     std::size_t dimension)
    : trees_(std::move(trees)), dimension_(dimension) {
  if (trees_.empty()) throw std::invalid_argument("random forest needs at least one tree");
}

double RandomForestModel::predict(std::span<const double> x) const {
  check_dimension(x);
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

RandomForestModel train_random_forest(const Dataset& data, const ForestParams& params,
                                      std::uint64_t seed) {
  if (params.trees == 0) throw std::invalid_argument("random forest: trees must be positive");
  if (params.features_per_split == 0 || params.features_per_split > data.dimension()) {
    throw std::invalid_argument("random forest: features_per_split must lie in [1, n]");
  }
  const std::size_t n = data.size();
  CartParams cart{params.min_leaf, params.max_depth, params.features_per_split};
  std::vector<RegressionTreeModel> trees;
  trees.reserve(params.trees);
  std::vector<std::size_t> rows(n);
  for (std::size_t t = 0; t < params.trees; ++t) {
    Rng rng = make_rng(derive_seed(seed, t));
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees.push_back(grow_regression_tree(data.features(), data.target(), rows, cart, &rng));
  }
  return RandomForestModel(std::move(trees), data.dimension());
}

}  // namespace metabags
