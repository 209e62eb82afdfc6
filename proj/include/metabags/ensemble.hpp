#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metabags/dataset.hpp"
#include "metabags/knn.hpp"
#include "metabags/landmarking.hpp"
#include "metabags/learners.hpp"
#include "metabags/mdt.hpp"
#include "metabags/meta_features.hpp"
#include "metabags/tuning.hpp"

namespace metabags {

/// rf, gb, knn, lasso, cart with the given tuning budget.
std::vector<LearnerConfig> default_expert_pool(std::size_t tuning_budget = 60);

/// Every MetaBags hyperparameter. Defaults: phi 10, rho 3, psi 100, s 0.10,
/// d 300, epsilon = |I(root)| * 1e-2, upsilon = max(2, ceil(N * 1e-2)).
struct MetaBagsConfig {
  std::vector<LearnerConfig> experts = default_expert_pool();
  bool tune_experts = true;
  std::size_t phi = 10;
  std::size_t rho = 3;
  std::size_t psi = 100;
  double s = 0.10;
  std::size_t d = 300;
  double epsilon_fraction = 1e-2;
  double upsilon_fraction = 1e-2;
  BiasMode bias = BiasMode::SquaredMean;
  std::size_t jobs = 1;

  void validate() const;
  InductionConfig induction(std::uint64_t seed) const;
};

enum class Variant { Full, MetaReg, MBwLM };
Variant parse_variant(std::string_view name);  // "full", "metareg", "mbwlm"
std::string_view variant_name(Variant v);

/// Experts trained (and optionally tuned) on one training split.
struct TrainedPool {
  std::vector<LearnerConfig> configs;  // after tuning
  std::vector<ModelPtr> models;

  std::vector<std::string> identifiers() const;
};

TrainedPool train_experts(const Dataset& train, const std::vector<LearnerConfig>& configs, bool tune,
                          std::uint64_t seed, std::size_t jobs = 1);

struct IntegratorResult {
  double prediction = 0.0;
  std::vector<std::size_t> selected;       // one expert per tree (MetaBags), or a single index
  std::vector<double> weights;             // LS only
  std::vector<double> expert_predictions;  // every expert at the query
};

/// Deployable MetaBags predictor.
class MetaBagsModel {
 public:
  struct Metadata {
    std::uint64_t seed = 0;
    std::uint64_t fingerprint = 0;
    std::size_t training_rows = 0;
    Variant variant = Variant::Full;
    std::string target_name;
  };

  MetaBagsModel(TrainedPool experts, LandmarkerSet landmarkers, MetaFeatureSchema schema,
                std::vector<MetaDecisionTree> trees, MetaBagsConfig config, Metadata metadata);

  std::size_t dimension() const noexcept { return landmarkers_.dimension(); }
  std::size_t expert_count() const noexcept { return experts_.models.size(); }
  const TrainedPool& experts() const noexcept { return experts_; }
  const LandmarkerSet& landmarkers() const noexcept { return landmarkers_; }
  const MetaFeatureSchema& schema() const noexcept { return schema_; }
  const std::vector<MetaDecisionTree>& trees() const noexcept { return trees_; }
  const MetaBagsConfig& config() const noexcept { return config_; }
  const Metadata& metadata() const noexcept { return metadata_; }

  /// Seed used for the query's neighbourhood: a hash of the query bytes mixed
  /// with the model seed, so a query always sees the same neighbourhood.
  std::uint64_t query_seed(std::span<const double> query) const;

  MetaFeatureVector meta_vector(std::span<const double> query) const;
  IntegratorResult predict(std::span<const double> query) const;
  std::vector<double> predict_batch(const Matrix& rows) const;

 private:
  TrainedPool experts_;
  LandmarkerSet landmarkers_;
  MetaFeatureSchema schema_;
  std::vector<MetaDecisionTree> trees_;
  MetaBagsConfig config_;
  Metadata metadata_;
};

/// Everything below the trees: landmarkers, schema and the full meta table.
struct MetaLevel {
  LandmarkerSet landmarkers;
  MetaFeatureSchema schema;  // always with local characteristics
  MetaTable table;
};

MetaLevel build_meta_level(const Dataset& train, const TrainedPool& pool, const MetaBagsConfig& config,
                           std::uint64_t seed);

/// Induces the trees for one variant from a prepared meta level.
MetaBagsModel fit_from_meta_level(const Dataset& train, const TrainedPool& pool, const MetaLevel& level,
                                  const MetaBagsConfig& config, std::uint64_t seed, Variant variant);

MetaBagsModel fit_metabags(const Dataset& train, const TrainedPool& pool, const MetaBagsConfig& config,
                           std::uint64_t seed, Variant variant = Variant::Full);
MetaBagsModel fit_metabags(const Dataset& train, const MetaBagsConfig& config, std::uint64_t seed);
MetaBagsModel fit_ablation(const Dataset& train, const MetaBagsConfig& config, std::uint64_t seed,
                           Variant variant);

/// OLS of the target on expert outputs with intercept (minimum-norm solution).
class LinearStacker {
 public:
  LinearStacker(std::vector<double> weights, double intercept);

  const std::vector<double>& weights() const noexcept { return weights_; }
  double intercept() const noexcept { return intercept_; }
  double combine(std::span<const double> expert_predictions) const;
  IntegratorResult predict(std::span<const ModelPtr> experts, std::span<const double> query) const;

 private:
  std::vector<double> weights_;
  double intercept_;
};

LinearStacker fit_linear_stacking(const Dataset& train, std::span<const ModelPtr> experts);

/// Picks the expert with the lowest RMSE over the query's k nearest training
/// rows (standardized Euclidean); ties go to the lower expert index.
class DynamicSelector {
 public:
  DynamicSelector(const Dataset& train, std::vector<ModelPtr> experts, std::size_t k = 5);

  std::size_t k() const noexcept { return k_; }
  std::size_t select(std::span<const double> query) const;
  IntegratorResult predict(std::span<const double> query) const;

 private:
  std::vector<ModelPtr> experts_;
  NeighborIndex index_;
  Matrix squared_errors_;  // N x M on the training rows
  std::size_t k_;
};

IntegratorResult predict_dynamic_selection(const Dataset& train, std::span<const ModelPtr> experts,
                                           std::span<const double> query, std::size_t k = 5);

/// Index of the config with the lowest k-fold CV RMSE; ties to pool order.
std::size_t select_best(const Dataset& train, const std::vector<LearnerConfig>& configs,
                        std::size_t folds, std::uint64_t seed);

}  // namespace metabags
