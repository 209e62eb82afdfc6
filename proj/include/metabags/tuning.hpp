#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "metabags/dataset.hpp"
#include "metabags/learners.hpp"
#include "metabags/random.hpp"

namespace metabags {

/// Sampling range for one hyperparameter.
struct ParamRange {
  enum class Scale { Integer, Linear, Log };
  Scale scale = Scale::Linear;
  double low = 0.0;
  double high = 1.0;

  double sample(Rng& rng) const;
  bool contains(double value) const;
};

using SearchSpace = std::map<std::string, ParamRange>;

/// Versioned per-learner search spaces, read from a flat key-value file:
///
///   version = 1
///   rf.trees = int 50 300
///   gb.learning_rate = log 0.01 0.3
class SearchSpaces {
 public:
  static SearchSpaces parse(const std::string& text);
  static SearchSpaces load(const std::filesystem::path& path);

  /// The spaces shipped with the library (same content as data/search_spaces.txt).
  static const SearchSpaces& defaults();
  static const std::string& default_text();

  int version() const noexcept { return version_; }
  bool has(const std::string& learner) const { return spaces_.contains(learner); }
  const SearchSpace& at(const std::string& learner) const;

 private:
  int version_ = 0;
  std::map<std::string, SearchSpace> spaces_;
};

/// A learner plus its (possibly partial) hyperparameters and tuning protocol.
struct LearnerConfig {
  std::string learner;
  ParamMap params;
  std::size_t tuning_budget = 60;
  std::size_t tuning_folds = 3;

  LearnerSpec spec() const { return {learner, params}; }
};

/// Mean over folds of the per-fold held-out RMSE.
double cross_validated_rmse(const LearnerSpec& spec, const Dataset& data, std::size_t folds,
                            std::uint64_t seed);

/// Random search: draws `tuning_budget` points from the space, scores each by
/// k-fold CV RMSE and returns the config with the lowest score (first sampled
/// wins ties). Parameters outside the space keep their values from `config`.
LearnerConfig tune(const std::string& learner, const Dataset& data, const LearnerConfig& config,
                   const SearchSpace& space, std::uint64_t seed);

LearnerConfig tune(const std::string& learner, const Dataset& data, const LearnerConfig& config,
                   std::uint64_t seed);

}  // namespace metabags
