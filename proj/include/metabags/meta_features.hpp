#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metabags/landmarking.hpp"
#include "metabags/learners.hpp"
#include "metabags/stats.hpp"

namespace metabags {

enum class MetaFamily { Base, Performance, Landmark };

struct MetaFeatureDescriptor {
  MetaFamily family = MetaFamily::Base;
  std::string source;     // base feature name, model label, or "local"
  std::string statistic;  // "value", "mean", "stdev", "q1", "q3", "prediction", characteristic
  std::size_t position = 0;

  std::string name() const;
};

/// Layout of a meta-feature vector:
///   [n base features | (mean, stdev, q1, q3) for M experts then 4 landmarkers |
///    4 landmarker predictions | 7 local characteristics (optional)]
class MetaFeatureSchema {
 public:
  MetaFeatureSchema(std::vector<std::string> base_names, std::vector<std::string> expert_ids,
                    std::size_t neighborhood_size, bool include_local = true);

  /// n + 4(M + 4) + 4 + 7, minus 7 without the local characteristics.
  static std::size_t expected_size(std::size_t n, std::size_t m, bool include_local = true);

  std::size_t size() const noexcept { return descriptors_.size(); }
  std::size_t base_count() const noexcept { return base_names_.size(); }
  std::size_t expert_count() const noexcept { return expert_ids_.size(); }
  std::size_t neighborhood_size() const noexcept { return neighborhood_size_; }
  bool include_local() const noexcept { return include_local_; }

  const std::vector<std::string>& base_names() const noexcept { return base_names_; }
  const std::vector<std::string>& expert_ids() const noexcept { return expert_ids_; }
  const std::vector<MetaFeatureDescriptor>& descriptors() const noexcept { return descriptors_; }
  std::vector<std::string> column_names() const;

  /// First position of the performance block for model `m` (experts first,
  /// then landmarkers).
  std::size_t performance_offset(std::size_t m) const noexcept { return base_count() + 4 * m; }
  std::size_t landmark_prediction_offset() const noexcept {
    return base_count() + 4 * (expert_count() + kLandmarkerCount);
  }
  std::size_t local_offset() const noexcept { return landmark_prediction_offset() + kLandmarkerCount; }

  /// Same schema with or without the local characteristics.
  MetaFeatureSchema with_local(bool include) const;

 private:
  std::vector<std::string> base_names_;
  std::vector<std::string> expert_ids_;
  std::size_t neighborhood_size_;
  bool include_local_;
  std::vector<MetaFeatureDescriptor> descriptors_;
};

struct MetaFeatureVector {
  std::vector<double> values;
};

/// psi rows of query + scale * xi with xi ~ N(0, I). An empty `scale` means
/// unit noise; passing the training standard deviations gives unit noise in
/// standardized feature space.
Matrix perturb_neighborhood(std::span<const double> query, std::size_t psi, std::uint64_t seed,
                            std::span<const double> scale = {});

/// mean, population stdev, Q1, Q3 of each model's outputs over the rows.
std::vector<Summary> performance_stats(std::span<const ModelPtr> models, const Matrix& neighborhood);

/// Meta-features for one query; experts and landmarkers share one neighbourhood.
MetaFeatureVector build_meta_vector(std::span<const double> query, std::span<const ModelPtr> experts,
                                    const LandmarkerSet& landmarkers,
                                    const MetaFeatureSchema& schema, std::uint64_t seed);

/// Meta-features for every training row plus expert residuals.
struct MetaTable {
  Matrix features;   // N x Q
  Matrix residuals;  // N x M, prediction minus target
};

/// Row i uses derive_seed(seed, i), so rows can be computed in any order.
MetaTable build_meta_table(const Dataset& data, std::span<const ModelPtr> experts,
                           const LandmarkerSet& landmarkers, const MetaFeatureSchema& schema,
                           std::uint64_t seed, std::size_t jobs = 1);

/// Keeps the leading `columns` meta-features (used to derive the table without
/// local characteristics from the full one).
MetaTable truncate_columns(const MetaTable& table, std::size_t columns);

/// Schema-named meta columns followed by one residual column per expert.
void write_meta_table_csv(const MetaTable& table, const MetaFeatureSchema& schema,
                          const std::filesystem::path& path);

}  // namespace metabags
