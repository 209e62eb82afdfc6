#pragma once

#include <vector>

#include "metabags/learners.hpp"

namespace metabags {

/// max(0, x_f - knot) when direction is +1, max(0, knot - x_f) when -1.
struct HingeTerm {
  std::size_t feature = 0;
  double knot = 0.0;
  int direction = 1;

  double evaluate(std::span<const double> x) const noexcept {
    const double v = direction > 0 ? x[feature] - knot : knot - x[feature];
    return v > 0.0 ? v : 0.0;
  }
  friend bool operator==(const HingeTerm&, const HingeTerm&) = default;
};

/// Partition of one feature's training range by the selected knots, with the
/// fraction of training rows in each interval.
struct FeatureIntervals {
  std::vector<double> edges;  // range min, interior knots ascending, range max
  std::vector<double> mass;   // edges.size() - 1 entries (1 when the range is a point)
  friend bool operator==(const FeatureIntervals&, const FeatureIntervals&) = default;
};

/// The interval of a feature's knot partition containing a coordinate. A
/// coordinate outside the training range extends the outermost interval to
/// itself.
struct IntervalInfo {
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;
  double mass = 0.0;
  double edge_distance = 0.0;
};

IntervalInfo locate_interval(const FeatureIntervals& intervals, double coordinate);

/// Additive hinge model without backward pruning or interactions.
class MarsModel final : public TrainedModel {
 public:
  MarsModel(double intercept, std::vector<HingeTerm> terms, std::vector<double> coefficients,
            std::vector<FeatureIntervals> intervals);

  std::string_view identifier() const override { return "mars"; }
  std::size_t dimension() const override { return intervals_.size(); }
  double predict(std::span<const double> x) const override;

  double intercept() const noexcept { return intercept_; }
  const std::vector<HingeTerm>& terms() const noexcept { return terms_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  const std::vector<FeatureIntervals>& intervals() const noexcept { return intervals_; }

  /// Sorted interior knots selected for a feature.
  std::vector<double> knots(std::size_t feature) const;

  /// |sum of coefficient * hinge| per feature at x.
  std::vector<double> feature_contributions(std::span<const double> x) const;

  /// Feature with the largest contribution; feature 0 for intercept-only models.
  std::size_t dominant_feature(std::span<const double> x) const;

  /// Training RMSE after each forward stage, starting with the intercept fit.
  const std::vector<double>& rmse_trace() const noexcept { return rmse_trace_; }
  void set_rmse_trace(std::vector<double> trace) { rmse_trace_ = std::move(trace); }

 private:
  double intercept_;
  std::vector<HingeTerm> terms_;
  std::vector<double> coefficients_;
  std::vector<FeatureIntervals> intervals_;
  std::vector<double> rmse_trace_;
};

/// Forward-stagewise fit. Each stage adds the hinge pair (feature, knot) with
/// the largest drop in training error; knots come from a per-feature grid of
/// `candidate_knots` interpolated quantiles. `max_basis` caps the number of
/// hinge pairs.
MarsModel train_mars_lite(const Dataset& data, std::size_t max_basis,
                          std::size_t candidate_knots);

}  // namespace metabags
