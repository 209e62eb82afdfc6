#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "metabags/learners.hpp"
#include "metabags/random.hpp"

namespace metabags {

/// Node of a binary regression tree stored in a flat array. Every node keeps
/// the statistics of the training targets routed to it, so leaves can report
/// their depth, support and spread.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;  // mean routed target
  double variance = 0.0;
  std::uint32_t count = 0;
  std::uint32_t depth = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct CartParams {
  std::size_t min_leaf = 5;
  std::size_t max_depth = 12;
  std::size_t features_per_split = 0;  // 0 = all features
};

class RegressionTreeModel final : public TrainedModel {
 public:
  RegressionTreeModel(std::vector<TreeNode> nodes, std::size_t dimension);

  std::string_view identifier() const override { return "cart"; }
  std::size_t dimension() const override { return dimension_; }
  double predict(std::span<const double> x) const override { return leaf_for(x).value; }

  const TreeNode& leaf_for(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t dimension_;
};

/// Greedy variance-reduction tree on the given rows of (x, y). When `rng` is
/// set and params.features_per_split is below the dimension, each split
/// considers a fresh random feature subset.
RegressionTreeModel grow_regression_tree(const Matrix& x, std::span<const double> y,
                                         std::span<const std::size_t> rows,
                                         const CartParams& params, Rng* rng = nullptr);

RegressionTreeModel train_cart(const Dataset& data, std::size_t min_leaf, std::size_t max_depth);

}  // namespace metabags
