#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace metabags {

double mean(std::span<const double> values);

/// Population (divide-by-N) standard deviation.
double population_stdev(std::span<const double> values);

/// Sample (divide-by-N-1) standard deviation; 0 for fewer than two values.
double sample_stdev(std::span<const double> values);

/// Quantile by linear interpolation between order statistics at position
/// p*(N-1). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Same as quantile_sorted but sorts a copy first.
double quantile(std::span<const double> values, double p);

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// mean, population stdev, first and third interpolated quartiles.
Summary summarize(std::span<const double> values);

}  // namespace metabags
