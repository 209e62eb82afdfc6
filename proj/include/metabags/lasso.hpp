#pragma once

#include <vector>

#include "metabags/learners.hpp"

namespace metabags {

struct LassoParams {
  double penalty = 0.01;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-7;
};

/// Linear model y = intercept + coefficients . x in raw feature units.
class LassoModel final : public TrainedModel {
 public:
  LassoModel(std::vector<double> coefficients, double intercept);

  std::string_view identifier() const override { return "lasso"; }
  std::size_t dimension() const override { return coefficients_.size(); }
  double predict(std::span<const double> x) const override;

  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double intercept() const noexcept { return intercept_; }

  /// Objective value after each coordinate-descent sweep (training only).
  const std::vector<double>& objective_trace() const noexcept { return trace_; }
  std::size_t sweeps() const noexcept { return trace_.size(); }
  void set_objective_trace(std::vector<double> trace) { trace_ = std::move(trace); }

 private:
  std::vector<double> coefficients_;
  double intercept_;
  std::vector<double> trace_;
};

/// Coordinate descent on (1/2N)||y - b0 - Zw||^2 + penalty*||w||_1 with Z the
/// standardized features; coefficients are mapped back to raw units.
LassoModel train_lasso(const Dataset& data, double penalty, std::size_t max_iterations,
                       double tolerance);

}  // namespace metabags
