#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metabags/matrix.hpp"

namespace metabags {

/// Feature matrix plus numeric target. Validated on construction: at least one
/// row, matching row counts, finite values, unique feature names.
class Dataset {
 public:
  Dataset(Matrix features, std::vector<double> target, std::vector<std::string> feature_names,
          std::string target_name = "y");

  /// Convenience constructor with generated names x1..xn.
  Dataset(Matrix features, std::vector<double> target);

  std::size_t size() const noexcept { return target_.size(); }
  std::size_t dimension() const noexcept { return features_.cols(); }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<double>& target() const noexcept { return target_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::string& target_name() const noexcept { return target_name_; }

  std::span<const double> row(std::size_t i) const noexcept { return features_.row(i); }

  /// Rows picked by index; duplicates allowed.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Order-sensitive FNV-1a hash over shape and the raw bytes of all values.
  std::uint64_t fingerprint() const;

 private:
  Matrix features_;
  std::vector<double> target_;
  std::vector<std::string> feature_names_;
  std::string target_name_;
};

std::vector<std::string> default_feature_names(std::size_t count);

/// Reads a comma-separated file. The named target column is extracted; all
/// other columns become features in file order. Without a header, columns are
/// named c1..cK and `target_column` must be one of those names.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 bool has_header = true);

/// Writes features followed by the target column, with a header row.
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Reads a headered feature-only CSV (no target) into a matrix, checking the
/// header against `expected_names` when that list is non-empty.
Matrix load_feature_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_names);

/// y = (x1^4 + x2^4)^(1/2) on i.i.d. uniform [low, high]^2.
Dataset generate_quartic_surface(std::size_t count, double low, double high, std::uint64_t seed);

/// Quartic surface extended with dims-2 uniform noise features on [0, 1].
Dataset generate_scalability_set(std::size_t count, std::size_t dims, std::uint64_t seed,
                                 double low = 0.0, double high = 1.0);

/// Number of values outside the Tukey fences [Q1 - f*IQR, Q3 + f*IQR].
std::size_t tukey_outlier_count(std::span<const double> values, double range_factor);

/// One repetition of k-fold cross validation.
struct SplitPlan {
  std::vector<std::vector<std::size_t>> folds;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;

  /// Indices not in fold `k`, ascending.
  std::vector<std::size_t> training_indices(std::size_t k) const;
};

std::vector<SplitPlan> make_folds(std::size_t dataset_size, std::size_t k,
                                  std::size_t repetitions, std::uint64_t seed);

struct BootstrapSample {
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;
};

/// ceil(fraction * dataset_size) indices drawn uniformly with replacement.
BootstrapSample draw_bootstrap(std::size_t dataset_size, double fraction, std::uint64_t seed);

/// Per-feature affine map to zero mean and unit population variance.
/// Constant features map to zero.
class Standardizer {
 public:
  Standardizer() = default;
  explicit Standardizer(const Matrix& features);
  Standardizer(std::vector<double> means, std::vector<double> stdevs);

  std::size_t dimension() const noexcept { return means_.size(); }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stdevs() const noexcept { return stdevs_; }

  void apply(std::span<const double> in, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> in) const;
  Matrix apply(const Matrix& features) const;

 private:
  std::vector<double> means_;
  std::vector<double> stdevs_;
};

struct StandardizeResult {
  Dataset dataset;
  Standardizer transform;
};

StandardizeResult standardize(const Dataset& dataset);

/// One row of the dataset statistics report.
struct DatasetStats {
  std::string name;
  std::size_t rows = 0;
  std::size_t features = 0;
  double target_min = 0.0;
  double target_max = 0.0;
  std::size_t outliers_15 = 0;
  std::size_t outliers_30 = 0;
};

DatasetStats describe(const Dataset& dataset, std::string name);
std::string stats_csv_header();
std::string stats_csv_row(const DatasetStats& stats);

}  // namespace metabags
