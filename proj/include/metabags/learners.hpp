#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metabags/dataset.hpp"
#include "metabags/matrix.hpp"

namespace metabags {

/// Hyperparameter values by name. All shipped learners take numeric
/// parameters; integer-valued ones are rounded on use.
using ParamMap = std::map<std::string, double>;

/// A fitted regression model. Immutable after training; predict is
/// deterministic and safe to call concurrently.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;

  virtual std::string_view identifier() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual double predict(std::span<const double> x) const = 0;

  virtual std::vector<double> predict_batch(const Matrix& rows) const {
    std::vector<double> out(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = predict(rows.row(i));
    return out;
  }

 protected:
  void check_dimension(std::span<const double> x) const;
};

using ModelPtr = std::shared_ptr<const TrainedModel>;

/// Learner identifier plus hyperparameters.
struct LearnerSpec {
  std::string id;
  ParamMap params;
};

/// Training half of the learner contract.
class Regressor {
 public:
  explicit Regressor(LearnerSpec spec);

  const std::string& identifier() const noexcept { return spec_.id; }
  const LearnerSpec& spec() const noexcept { return spec_; }

  ModelPtr train(const Dataset& data, std::uint64_t seed = 0) const;

 private:
  LearnerSpec spec_;
};

/// "cart", "rf", "gb", "knn", "lasso", "mars".
const std::vector<std::string>& learner_identifiers();
bool is_learner(std::string_view id);

/// Default hyperparameters for a learner; throws on an unknown identifier.
ParamMap default_params(std::string_view id);

/// Throws std::invalid_argument for unknown learners or parameter names.
void validate_spec(const LearnerSpec& spec);

/// Trains the learner described by `spec`; parameters missing from the spec
/// take their defaults.
ModelPtr train_learner(const LearnerSpec& spec, const Dataset& data, std::uint64_t seed = 0);

}  // namespace metabags
