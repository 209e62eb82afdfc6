#include "metabags/cart.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace metabags {

void TrainedModel::check_dimension(std::span<const double> x) const {
  if (x.size() != dimension()) {
    throw std::invalid_argument("query has " + std::to_string(x.size()) +
                                " features, model expects " + std::to_string(dimension()));
  }
}

RegressionTreeModel::RegressionTreeModel(std::vector<TreeNode> nodes, std::size_t dimension)
    : nodes_(std::move(nodes)), dimension_(dimension) {
  if (nodes_.empty()) throw std::invalid_argument("regression tree needs at least one node");
}

const TreeNode& RegressionTreeModel::leaf_for(std::span<const double> x) const {
  check_dimension(x);
  const TreeNode* node = &nodes_[0];
  while (!node->is_leaf()) {
    node = &nodes_[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                 : node->right];
  }
  return *node;
}

std::size_t RegressionTreeModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTreeModel::depth() const {
  std::uint32_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

namespace {

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, std::span<const double> y, const CartParams& params, Rng* rng)
      : x_(x), y_(y), params_(params), rng_(rng) {
    const std::size_t dim = x.cols();
    features_.resize(dim);
    std::iota(features_.begin(), features_.end(), 0);
    per_split_ = params.features_per_split == 0 ? dim : std::min(params.features_per_split, dim);
  }

  std::uint32_t grow(std::span<std::size_t> rows, std::uint32_t depth) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0;
    double lo = y_[rows[0]], hi = y_[rows[0]];
    for (auto r : rows) {
      sum += y_[r];
      lo = std::min(lo, y_[r]);
      hi = std::max(hi, y_[r]);
    }
    const double n = static_cast<double>(rows.size());
    const double m = sum / n;
    double ss = 0.0;
    for (auto r : rows) ss += (y_[r] - m) * (y_[r] - m);
    {
      TreeNode& node = nodes_[index];
      node.value = m;
      node.variance = ss / n;
      node.count = static_cast<std::uint32_t>(rows.size());
      node.depth = depth;
    }

    const bool splittable = rows.size() >= 2 * std::max<std::size_t>(params_.min_leaf, 1) &&
                            depth < params_.max_depth && lo < hi;
    if (!splittable) return index;

    SplitChoice best = find_split(rows, m, ss);
    if (best.feature < 0) return index;

    auto f = static_cast<std::size_t>(best.feature);
    auto mid = std::stable_partition(rows.begin(), rows.end(),
                                     [&](std::size_t r) { return x_(r, f) <= best.threshold; });
    auto split = static_cast<std::size_t>(mid - rows.begin());
    const std::uint32_t left = grow(rows.subspan(0, split), depth + 1);
    const std::uint32_t right = grow(rows.subspan(split), depth + 1);
    TreeNode& node = nodes_[index];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  SplitChoice find_split(std::span<const std::size_t> rows, double node_mean, double node_ss) {
    if (rng_ != nullptr && per_split_ < features_.size()) {
      for (std::size_t i = 0; i < per_split_; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
        std::swap(features_[i], features_[pick(*rng_)]);
      }
    }
    const std::size_t min_leaf = std::max<std::size_t>(params_.min_leaf, 1);
    const std::size_t n = rows.size();
    SplitChoice best;
    best.gain = 1e-12 * node_ss;
    std::vector<std::pair<double, double>> sorted(n);
    const std::size_t considered = rng_ != nullptr ? per_split_ : features_.size();
    std::vector<std::size_t> candidates(features_.begin(),
                                        features_.begin() + static_cast<std::ptrdiff_t>(considered));
    std::sort(candidates.begin(), candidates.end());
    for (std::size_t f : candidates) {
      for (std::size_t i = 0; i < n; ++i) sorted[i] = {x_(rows[i], f), y_[rows[i]] - node_mean};
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      if (sorted.front().first == sorted.back().first) continue;
      double total = 0.0;
      for (const auto& p : sorted) total += p.second;
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left += sorted[i].second;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double right = total - left;
        const double gain = left * left / static_cast<double>(nl) +
                            right * right / static_cast<double>(nr) -
                            total * total / static_cast<double>(n);
        if (gain > best.gain) {
          double mid = sorted[i].first + 0.5 * (sorted[i + 1].first - sorted[i].first);
          if (!(mid < sorted[i + 1].first)) mid = sorted[i].first;
          best = {static_cast<std::int32_t>(f), mid, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const double> y_;
  CartParams params_;
  Rng* rng_;
  std::vector<std::size_t> features_;
  std::size_t per_split_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTreeModel grow_regression_tree(const Matrix& x, std::span<const double> y,
                                         std::span<const std::size_t> rows,
                                         const CartParams& params, Rng* rng) {
  if (rows.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  if (params.max_depth == 0) throw std::invalid_argument("max_depth must be positive");
  std::vector<std::size_t> work(rows.begin(), rows.end());
  TreeGrower grower(x, y, params, rng);
  grower.grow(work, 0);
  return RegressionTreeModel(grower.take(), x.cols());
}

RegressionTreeModel train_cart(const Dataset& data, std::size_t min_leaf, std::size_t max_depth) {
  if (min_leaf == 0 || min_leaf > data.size()) {
    throw std::invalid_argument("train_cart: min_leaf must lie in [1, N]");
  }
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  CartParams params{min_leaf, max_depth, 0};
  return grow_regression_tree(data.features(), data.target(), rows, params);
}

}  // namespace metabags
