#include "metabags/lasso.hpp"

#include <cmath>
#include <stdexcept>

#include "metabags/stats.hpp"

namespace metabags {

LassoModel::LassoModel(std::vector<double> coefficients, double intercept)
    : coefficients_(std::move(coefficients)), intercept_(intercept) {}

double LassoModel::predict(std::span<const double> x) const {
  check_dimension(x);
  double out = intercept_;
  for (std::size_t j = 0; j < x.size(); ++j) out += coefficients_[j] * x[j];
  return out;
}

namespace {

double soft_threshold(double value, double penalty) {
  if (value > penalty) return value - penalty;
  if (value < -penalty) return value + penalty;
  return 0.0;
}

}  // namespace

LassoModel train_lasso(const Dataset& data, double penalty, std::size_t max_iterations,
                       double tolerance) {
  if (!(penalty >= 0.0)) throw std::invalid_argument("lasso: penalty must be non-negative");
  if (max_iterations == 0) throw std::invalid_argument("lasso: max_iterations must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("lasso: tolerance must be positive");

  const std::size_t n = data.size();
  const std::size_t p = data.dimension();
  const auto inv_n = 1.0 / static_cast<double>(n);
  Standardizer scale(data.features());
  const Matrix z = scale.apply(data.features());
  const double y_mean = mean(data.target());

  // Column-major copy for the coordinate sweeps.
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> col_sq(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      cols[j][i] = z(i, j);
      col_sq[j] += z(i, j) * z(i, j);
    }
    col_sq[j] *= inv_n;
  }

  std::vector<double> beta(p, 0.0);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = data.target()[i] - y_mean;

  auto objective = [&]() {
    double ss = 0.0;
    for (double r : residual) ss += r * r;
    double l1 = 0.0;
    for (double b : beta) l1 += std::abs(b);
    return 0.5 * ss * inv_n + penalty * l1;
  };

  std::vector<double> trace;
  for (std::size_t sweep = 0; sweep < max_iterations; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) continue;  // constant feature
      const auto& zj = cols[j];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += zj[i] * residual[i];
      rho = rho * inv_n + col_sq[j] * beta[j];
      const double updated = soft_threshold(rho, penalty) / col_sq[j];
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= zj[i] * delta;
        beta[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    trace.push_back(objective());
    if (max_change < tolerance) break;
  }

  std::vector<double> coef(p, 0.0);
  double intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    if (scale.stdevs()[j] > 0.0) {
      coef[j] = beta[j] / scale.stdevs()[j];
      intercept -= coef[j] * scale.means()[j];
    }
  }
  LassoModel model(std::move(coef), intercept);
  model.set_objective_trace(std::move(trace));
  return model;
}

}  // namespace metabags
