#include "metabags/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "metabags/errors.hpp"
#include "metabags/random.hpp"
#include "metabags/stats.hpp"

namespace metabags {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_numeric_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (has_header && table.header.empty()) {
      for (auto& c : cells) table.header.push_back(unquote(c));
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw DataError(path.string() + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " columns, expected " +
                      std::to_string(width));
    }
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (!parse_double(cells[c], values[c])) {
        std::string col = table.header.empty() ? "" : " ('" + table.header[c] + "')";
        throw DataError(path.string() + ": cannot parse '" + cells[c] + "' at row " +
                        std::to_string(line_no) + ", column " + std::to_string(c + 1) + col);
      }
    }
    table.rows.push_back(std::move(values));
  }
  if (table.rows.empty()) throw DataError("empty file (no data rows): " + path.string());
  if (table.header.empty()) {
    for (std::size_t c = 0; c < width; ++c) table.header.push_back("c" + std::to_string(c + 1));
  }
  return table;
}

}  // namespace

std::vector<std::string> default_feature_names(std::size_t count) {
  std::vector<std::string> names(count);
  for (std::size_t i = 0; i < count; ++i) names[i] = "x" + std::to_string(i + 1);
  return names;
}

Dataset::Dataset(Matrix features, std::vector<double> target,
                 std::vector<std::string> feature_names, std::string target_name)
    : features_(std::move(features)),
      target_(std::move(target)),
      feature_names_(std::move(feature_names)),
      target_name_(std::move(target_name)) {
  if (target_.empty()) throw DataError("dataset must contain at least one row");
  if (features_.rows() != target_.size()) {
    throw DataError("feature row count does not match target length");
  }
  if (feature_names_.empty()) feature_names_ = default_feature_names(features_.cols());
  if (feature_names_.size() != features_.cols()) {
    throw DataError("feature name count does not match feature columns");
  }
  std::set<std::string> seen;
  for (const auto& name : feature_names_) {
    if (!seen.insert(name).second) throw DataError("duplicate feature name: " + name);
  }
  for (double v : features_.data()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  for (double v : target_) {
    if (!std::isfinite(v)) throw DataError("non-finite target value");
  }
}

Dataset::Dataset(Matrix features, std::vector<double> target)
    : Dataset(std::move(features), std::move(target), {}, "y") {}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) y[i] = target_.at(indices[i]);
  return Dataset(features_.select_rows(indices), std::move(y), feature_names_, target_name_);
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t shape[2] = {features_.rows(), features_.cols()};
  feed(shape, sizeof(shape));
  feed(features_.data().data(), features_.data().size() * sizeof(double));
  feed(target_.data(), target_.size() * sizeof(double));
  return h;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 bool has_header) {
  if (!std::filesystem::exists(path)) throw DataError("file not found: " + path.string());
  CsvTable table = read_numeric_csv(path, has_header);
  const auto matches = std::count(table.header.begin(), table.header.end(), target_column);
  if (matches == 0) throw DataError("target column '" + target_column + "' not found");
  if (matches > 1) throw DataError("target column '" + target_column + "' is duplicated");
  const auto target_idx = static_cast<std::size_t>(
      std::find(table.header.begin(), table.header.end(), target_column) - table.header.begin());

  const std::size_t width = table.header.size();
  Matrix features(table.rows.size(), width - 1);
  std::vector<double> target(table.rows.size());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < width; ++c) {
    if (c != target_idx) names.push_back(table.header[c]);
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::size_t out = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == target_idx) {
        target[r] = table.rows[r][c];
      } else {
        features(r, out++) = table.rows[r][c];
      }
    }
  }
  return Dataset(std::move(features), std::move(target), std::move(names), target_column);
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.precision(17);
  for (const auto& name : dataset.feature_names()) out << name << ',';
  out << dataset.target_name() << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.row(i)) out << v << ',';
    out << dataset.target()[i] << '\n';
  }
}

Matrix load_feature_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_names) {
  if (!std::filesystem::exists(path)) throw DataError("file not found: " + path.string());
  CsvTable table = read_numeric_csv(path, true);
  if (!expected_names.empty() && table.header != expected_names) {
    throw DataError("schema mismatch: query columns do not match the model's features (expected " +
                    std::to_string(expected_names.size()) + " columns, got " +
                    std::to_string(table.header.size()) + ")");
  }
  Matrix m(table.rows.size(), table.header.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::copy(table.rows[r].begin(), table.rows[r].end(), m.row(r).begin());
  }
  return m;
}

Dataset generate_quartic_surface(std::size_t count, double low, double high, std::uint64_t seed) {
  return generate_scalability_set(count, 2, seed, low, high);
}

Dataset generate_scalability_set(std::size_t count, std::size_t dims, std::uint64_t seed,
                                 double low, double high) {
  if (dims < 2) throw std::invalid_argument("scalability set needs at least 2 dimensions");
  if (!(low < high)) throw std::invalid_argument("sampling interval requires low < high");
  if (count == 0) throw std::invalid_argument("count must be positive");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(low, high);
  Matrix x(count, dims);
  std::vector<double> y(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dims; ++j) x(i, j) = unif(rng);
    const double a = x(i, 0), b = x(i, 1);
    y[i] = std::sqrt(a * a * a * a + b * b * b * b);
  }
  return Dataset(std::move(x), std::move(y));
}

std::size_t tukey_outlier_count(std::span<const double> values, double range_factor) {
  if (values.empty()) throw std::invalid_argument("tukey_outlier_count: empty input");
  if (!(range_factor > 0.0)) throw std::invalid_argument("range_factor must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q3 = quantile_sorted(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - range_factor * iqr;
  const double hi = q3 + range_factor * iqr;
  return static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [&](double v) { return v < lo || v > hi; }));
}

std::vector<std::size_t> SplitPlan::training_indices(std::size_t k) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != k) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SplitPlan> make_folds(std::size_t dataset_size, std::size_t k,
                                  std::size_t repetitions, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be at least 2");
  if (k > dataset_size) throw std::invalid_argument("make_folds: k exceeds dataset size");
  if (repetitions == 0) throw std::invalid_argument("make_folds: repetitions must be positive");
  std::vector<SplitPlan> plans;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    Rng rng = make_rng(derive_seed(seed, rep));
    std::vector<std::size_t> perm(dataset_size);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitPlan plan;
    plan.repetitions = repetitions;
    plan.seed = seed;
    plan.folds.resize(k);
    const std::size_t base = dataset_size / k;
    const std::size_t extra = dataset_size % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t len = base + (f < extra ? 1 : 0);
      plan.folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                           perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
      std::sort(plan.folds[f].begin(), plan.folds[f].end());
      pos += len;
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

BootstrapSample draw_bootstrap(std::size_t dataset_size, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("draw_bootstrap: fraction must lie in (0, 1]");
  }
  if (dataset_size == 0) throw std::invalid_argument("draw_bootstrap: empty dataset");
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(dataset_size)));
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  BootstrapSample sample;
  sample.seed = seed;
  sample.indices.resize(count);
  for (auto& idx : sample.indices) idx = pick(rng);
  return sample;
}

Standardizer::Standardizer(const Matrix& features)
    : means_(features.cols(), 0.0), stdevs_(features.cols(), 0.0) {
  for (std::size_t c = 0; c < features.cols(); ++c) {
    auto col = features.column(c);
    means_[c] = mean(col);
    stdevs_[c] = population_stdev(col);
  }
}

Standardizer::Standardizer(std::vector<double> means, std::vector<double> stdevs)
    : means_(std::move(means)), stdevs_(std::move(stdevs)) {
  if (means_.size() != stdevs_.size()) throw std::invalid_argument("Standardizer: size mismatch");
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != means_.size() || out.size() != means_.size()) {
    throw std::invalid_argument("Standardizer: dimensionality mismatch");
  }
  for (std::size_t c = 0; c < in.size(); ++c) {
    out[c] = stdevs_[c] > 0.0 ? (in[c] - means_[c]) / stdevs_[c] : 0.0;
  }
}

std::vector<double> Standardizer::apply(std::span<const double> in) const {
  std::vector<double> out(in.size());
  apply(in, out);
  return out;
}

Matrix Standardizer::apply(const Matrix& features) const {
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) apply(features.row(r), out.row(r));
  return out;
}

StandardizeResult standardize(const Dataset& dataset) {
  Standardizer transform(dataset.features());
  Dataset scaled(transform.apply(dataset.features()), dataset.target(), dataset.feature_names(),
                 dataset.target_name());
  return {std::move(scaled), std::move(transform)};
}

DatasetStats describe(const Dataset& dataset, std::string name) {
  DatasetStats s;
  s.name = std::move(name);
  s.rows = dataset.size();
  s.features = dataset.dimension();
  const auto& y = dataset.target();
  auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  s.target_min = *mn;
  s.target_max = *mx;
  s.outliers_15 = tukey_outlier_count(y, 1.5);
  s.outliers_30 = tukey_outlier_count(y, 3.0);
  return s;
}

std::string stats_csv_header() { return "name,N,n,target_min,target_max,outliers_1.5,outliers_3.0"; }

std::string stats_csv_row(const DatasetStats& s) {
  std::ostringstream os;
  os.precision(10);
  os << s.name << ',' << s.rows << ',' << s.features << ',' << s.target_min << ','
     << s.target_max << ',' << s.outliers_15 << ',' << s.outliers_30;
  return os.str();
}

}  // namespace metabags
