#include "metabags/landmarking.hpp"

#include <algorithm>
#include <stdexcept>

namespace metabags {

const std::array<std::string_view, kLandmarkerCount>& landmarker_identifiers() {
  static constexpr std::array<std::string_view, kLandmarkerCount> ids = {"lm_lasso", "lm_1nn",
                                                                          "lm_mars", "lm_cart"};
  return ids;
}

const std::array<std::string_view, kLocalCharacteristics>& local_characteristic_names() {
  static constexpr std::array<std::string_view, kLocalCharacteristics> names = {
      "cart_leaf_depth",    "cart_leaf_count",    "cart_leaf_variance", "mars_interval_width",
      "mars_interval_mass", "mars_edge_distance", "nn1_distance"};
  return names;
}

std::array<double, kLocalCharacteristics> LocalLandmarks::characteristics() const {
  return {static_cast<double>(cart_leaf_depth), static_cast<double>(cart_leaf_count),
          cart_leaf_variance, mars_interval_width, mars_interval_mass, mars_edge_distance,
          nn1_distance};
}

LandmarkerSet::LandmarkerSet(std::shared_ptr<const LassoModel> lasso,
                             std::shared_ptr<const KnnModel> nn1,
                             std::shared_ptr<const MarsModel> mars,
                             std::shared_ptr<const RegressionTreeModel> cart)
    : lasso_(std::move(lasso)), nn1_(std::move(nn1)), mars_(std::move(mars)), cart_(std::move(cart)) {
  if (!lasso_ || !nn1_ || !mars_ || !cart_) throw std::invalid_argument("landmarker missing");
  if (nn1_->k() != 1) throw std::invalid_argument("nearest-neighbour landmarker must use k = 1");
  const std::size_t d = lasso_->dimension();
  if (nn1_->dimension() != d || mars_->dimension() != d || cart_->dimension() != d) {
    throw std::invalid_argument("landmarkers trained on different dimensionalities");
  }
}

std::array<ModelPtr, kLandmarkerCount> LandmarkerSet::models() const {
  return {lasso_, nn1_, mars_, cart_};
}

LocalLandmarks LandmarkerSet::local_landmarks(std::span<const double> query) const {
  if (query.size() != dimension()) {
    throw std::invalid_argument("local_landmarks: query dimensionality mismatch");
  }
  LocalLandmarks out;
  const TreeNode& leaf = cart_->leaf_for(query);
  out.cart_leaf_depth = leaf.depth;
  out.cart_leaf_count = leaf.count;
  out.cart_leaf_variance = leaf.variance;

  const std::size_t f = mars_->dominant_feature(query);
  const IntervalInfo interval = locate_interval(mars_->intervals()[f], query[f]);
  out.mars_interval_width = interval.width;
  out.mars_interval_mass = interval.mass;
  out.mars_edge_distance = interval.edge_distance;

  const Neighbor nearest = nn1_->index().nearest(query, 1).front();
  out.nn1_distance = nearest.distance;

  out.predictions = {lasso_->predict(query), nn1_->targets()[nearest.index],
                     mars_->predict(query), leaf.value};
  return out;
}

LandmarkerSet fit_landmarkers(const Dataset& data) {
  const std::size_t n = data.size();
  const std::size_t min_leaf = std::min(std::max<std::size_t>(5, n / 50), n);
  return LandmarkerSet(std::make_shared<LassoModel>(train_lasso(data, 0.01, 1000, 1e-7)),
                       std::make_shared<KnnModel>(train_knn(data, 1)),
                       std::make_shared<MarsModel>(train_mars_lite(data, 10, 20)),
                       std::make_shared<RegressionTreeModel>(train_cart(data, min_leaf, 12)));
}

}  // namespace metabags
