#pragma once

#include <array>
#include <memory>
#include <span>
#include <string_view>

#include "metabags/cart.hpp"
#include "metabags/dataset.hpp"
#include "metabags/knn.hpp"
#include "metabags/lasso.hpp"
#include "metabags/mars.hpp"

namespace metabags {

inline constexpr std::size_t kLandmarkerCount = 4;
inline constexpr std::size_t kLocalCharacteristics = 7;

/// "lm_lasso", "lm_1nn", "lm_mars", "lm_cart", in the order used everywhere.
const std::array<std::string_view, kLandmarkerCount>& landmarker_identifiers();

/// Names of the seven local characteristics, in meta-vector order.
const std::array<std::string_view, kLocalCharacteristics>& local_characteristic_names();

/// What the landmarkers know about the neighbourhood of one query.
struct LocalLandmarks {
  std::size_t cart_leaf_depth = 0;
  std::size_t cart_leaf_count = 0;
  double cart_leaf_variance = 0.0;
  double mars_interval_width = 0.0;
  double mars_interval_mass = 0.0;
  double mars_edge_distance = 0.0;
  double nn1_distance = 0.0;
  std::array<double, kLandmarkerCount> predictions{};  // landmarker_identifiers() order

  std::array<double, kLocalCharacteristics> characteristics() const;
};

/// The four cheap landmark models trained on one training split.
class LandmarkerSet {
 public:
  LandmarkerSet(std::shared_ptr<const LassoModel> lasso, std::shared_ptr<const KnnModel> nn1,
                std::shared_ptr<const MarsModel> mars,
                std::shared_ptr<const RegressionTreeModel> cart);

  std::size_t dimension() const noexcept { return lasso_->dimension(); }

  const LassoModel& lasso() const noexcept { return *lasso_; }
  const KnnModel& nearest_neighbor() const noexcept { return *nn1_; }
  const MarsModel& mars() const noexcept { return *mars_; }
  const RegressionTreeModel& cart() const noexcept { return *cart_; }

  /// Models in landmarker_identifiers() order.
  std::array<ModelPtr, kLandmarkerCount> models() const;

  LocalLandmarks local_landmarks(std::span<const double> query) const;

 private:
  std::shared_ptr<const LassoModel> lasso_;
  std::shared_ptr<const KnnModel> nn1_;
  std::shared_ptr<const MarsModel> mars_;
  std::shared_ptr<const RegressionTreeModel> cart_;
};

/// Landmarker defaults: CART min_leaf = max(5, N/50) (capped at N),
/// LASSO penalty 0.01, MARS 10 hinge pairs over 20 candidate knots.
LandmarkerSet fit_landmarkers(const Dataset& data);

inline LocalLandmarks local_landmarks(const LandmarkerSet& set, std::span<const double> query) {
  return set.local_landmarks(query);
}

}  // namespace metabags
