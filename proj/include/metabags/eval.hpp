#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metabags/dataset.hpp"
#include "metabags/ensemble.hpp"

namespace metabags {

/// sqrt(mean((p - t)^2)); throws on empty input or a length mismatch.
double rmse(std::span<const double> predictions, std::span<const double> targets);

enum class Verdict { AWins, BWins, NoDifference };
std::string_view verdict_name(Verdict v);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  Verdict verdict = Verdict::NoDifference;
};

/// Two-sided Welch test on samples of a loss (lower is better): a wins when
/// p < alpha and mean(a) < mean(b).
TTestResult two_sample_t(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Method identifiers understood by the harness besides the expert ids.
const std::vector<std::string>& integrator_methods();  // metabags, metareg, mbwlm, ls, ds, best

/// Expert ids of the pool followed by the integrators.
std::vector<std::string> all_methods(const std::vector<LearnerConfig>& pool);

struct BenchmarkOptions {
  std::size_t folds = 5;
  std::size_t repetitions = 3;
  double alpha = 0.05;
  std::size_t ds_k = 5;
  std::size_t best_folds = 3;
  std::size_t jobs = 1;  // concurrent cells
  MetaBagsConfig config;
  std::vector<std::string> methods;  // empty = all_methods(config.experts)
};

/// Per-method RMSE on one train/test split, NaN where the method failed.
struct SplitResult {
  std::map<std::string, double> rmse;
  std::map<std::string, std::string> errors;
  std::size_t jensen_checked = 0;
  std::size_t jensen_violations = 0;
};

SplitResult evaluate_split(const Dataset& train, const Dataset& test, const BenchmarkOptions& options,
                           std::uint64_t seed);

struct BenchmarkDataset {
  std::string name;
  Dataset data;
};

struct MethodSummary {
  std::vector<double> samples;  // one per fold-repetition, NaN if missing
  double mean = 0.0;            // over present samples
  double std_error = 0.0;
  std::size_t missing = 0;
};

struct PairTest {
  std::string dataset;
  std::string a;
  std::string b;
  TTestResult result;
};

struct EvalReport {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::vector<std::vector<MethodSummary>> summary;  // [dataset][method]
  std::vector<std::vector<double>> ranks;           // [dataset][method], averaged ties
  std::vector<PairTest> tests;                      // every unordered method pair per dataset
  std::vector<std::string> failures;
  std::size_t jensen_checked = 0;
  std::size_t jensen_violations = 0;
  double alpha = 0.05;

  std::size_t method_index(std::string_view method) const;
  const MethodSummary& at(std::size_t dataset, std::string_view method) const;
  /// Test of `a` against `b` on a dataset, relabelled so that `a` is first.
  TTestResult compare(std::size_t dataset, std::string_view a, std::string_view b) const;
};

EvalReport run_benchmark(const std::vector<BenchmarkDataset>& datasets, const BenchmarkOptions& options,
                         std::uint64_t seed);

/// Ranks of `values` (1 = smallest), ties share the average rank. NaN ranks last.
std::vector<double> average_ranks(std::span<const double> values);

struct Improvement {
  std::string competitor;
  std::vector<std::optional<double>> per_dataset;  // nullopt when the competitor RMSE is 0
  std::optional<double> mean;
};

/// 100 * (rmse_competitor - rmse_reference) / rmse_competitor per dataset.
std::vector<Improvement> summarize_improvement(const EvalReport& report,
                                               std::string_view reference = "metabags");

/// Writes rmse.csv, pvalues.csv, ranks.csv, improvement.csv and summary.txt.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
std::string render_summary(const EvalReport& report);

/// "<prefix>-YYYYmmdd-HHMMSS-seed<seed>" under `base`; created on disk.
std::filesystem::path make_run_dir(const std::filesystem::path& base, std::string_view prefix,
                                   std::uint64_t seed);

struct ScalabilityOptions {
  std::vector<std::size_t> sizes = {10000, 20000, 40000};
  std::vector<std::size_t> dims = {10};
  std::size_t repetitions = 3;
  std::size_t psi = 10;
  std::size_t phi = 10;
  std::size_t rho = 3;
  std::size_t jobs = 1;
};

struct ScalabilityRow {
  std::size_t rows = 0;
  std::size_t dims = 0;
  double seconds = 0.0;  // median
  std::vector<double> samples;
  std::size_t tree_nodes = 0;
};

/// Times induce_tree on the full meta table of a scalability dataset, with a
/// fixed {lasso, cart} expert pool. Expert training and meta-table
/// construction are excluded from the timing.
std::vector<ScalabilityRow> scalability_run(const ScalabilityOptions& options, std::uint64_t seed);
std::string scalability_csv(const std::vector<ScalabilityRow>& rows);

}  // namespace metabags
