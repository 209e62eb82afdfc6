#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metabags/dataset.hpp"
#include "metabags/learners.hpp"

namespace metabags {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  // Euclidean, standardized feature space
};

/// Exact nearest-neighbour search over standardized features. Results are
/// ordered by (distance, training index), so equal distances resolve to the
/// lower index. Backed by a k-d tree; brute_force() is the reference scan.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(const Matrix& raw_features);

  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dimension() const noexcept { return points_.cols(); }
  const Standardizer& transform() const noexcept { return transform_; }
  const Matrix& points() const noexcept { return points_; }

  /// k nearest training rows to a raw (unstandardized) query.
  std::vector<Neighbor> nearest(std::span<const double> raw_query, std::size_t k) const;

  /// Same contract as nearest(), computed by a full scan.
  std::vector<Neighbor> brute_force(std::span<const double> raw_query, std::size_t k) const;

 private:
  struct KdNode {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t axis = -1;  // -1 = leaf
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  Standardizer transform_;
  Matrix points_;                   // standardized, original row order
  std::vector<std::uint32_t> order_;  // permutation used by the tree
  std::vector<KdNode> nodes_;
};

/// k-nearest-neighbour regressor: mean target of the k closest rows.
class KnnModel final : public TrainedModel {
 public:
  KnnModel(const Dataset& data, std::size_t k);

  std::string_view identifier() const override { return "knn"; }
  std::size_t dimension() const override { return index_.dimension(); }
  double predict(std::span<const double> x) const override;

  std::size_t k() const noexcept { return k_; }
  const NeighborIndex& index() const noexcept { return index_; }
  const Matrix& raw_features() const noexcept { return raw_; }
  const std::vector<double>& targets() const noexcept { return targets_; }

 private:
  Matrix raw_;
  std::vector<double> targets_;
  NeighborIndex index_;
  std::size_t k_;
};

KnnModel train_knn(const Dataset& data, std::size_t k);

}  // namespace metabags
