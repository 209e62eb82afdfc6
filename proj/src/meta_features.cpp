#include "metabags/meta_features.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "metabags/errors.hpp"
#include "metabags/parallel.hpp"
#include "metabags/random.hpp"

namespace metabags {

namespace {

constexpr std::array<const char*, 4> kStatNames = {"mean", "stdev", "q1", "q3"};

std::string expert_label(std::size_t j, const std::string& id) {
  return "e" + std::to_string(j + 1) + "_" + id;
}

}  // namespace

std::string MetaFeatureDescriptor::name() const {
  switch (family) {
    case MetaFamily::Base:
      return source;
    case MetaFamily::Performance:
      return source + "." + statistic;
    case MetaFamily::Landmark:
    default:
      return statistic == "prediction" ? source + ".prediction" : statistic;
  }
}

MetaFeatureSchema::MetaFeatureSchema(std::vector<std::string> base_names,
                                     std::vector<std::string> expert_ids,
                                     std::size_t neighborhood_size, bool include_local)
    : base_names_(std::move(base_names)),
      expert_ids_(std::move(expert_ids)),
      neighborhood_size_(neighborhood_size),
      include_local_(include_local) {
  if (neighborhood_size_ == 0) throw std::invalid_argument("neighbourhood size must be positive");
  std::size_t pos = 0;
  for (const auto& name : base_names_) {
    descriptors_.push_back({MetaFamily::Base, name, "value", pos++});
  }
  std::vector<std::string> sources;
  for (std::size_t j = 0; j < expert_ids_.size(); ++j) sources.push_back(expert_label(j, expert_ids_[j]));
  for (auto id : landmarker_identifiers()) sources.emplace_back(id);
  for (const auto& source : sources) {
    for (const char* stat : kStatNames) {
      descriptors_.push_back({MetaFamily::Performance, source, stat, pos++});
    }
  }
  for (auto id : landmarker_identifiers()) {
    descriptors_.push_back({MetaFamily::Landmark, std::string(id), "prediction", pos++});
  }
  if (include_local_) {
    for (auto name : local_characteristic_names()) {
      descriptors_.push_back({MetaFamily::Landmark, "local", std::string(name), pos++});
    }
  }
}

std::size_t MetaFeatureSchema::expected_size(std::size_t n, std::size_t m, bool include_local) {
  return n + 4 * (m + kLandmarkerCount) + kLandmarkerCount +
         (include_local ? kLocalCharacteristics : 0);
}

std::vector<std::string> MetaFeatureSchema::column_names() const {
  std::vector<std::string> names;
  names.reserve(descriptors_.size());
  for (const auto& d : descriptors_) names.push_back(d.name());
  return names;
}

MetaFeatureSchema MetaFeatureSchema::with_local(bool include) const {
  return MetaFeatureSchema(base_names_, expert_ids_, neighborhood_size_, include);
}

Matrix perturb_neighborhood(std::span<const double> query, std::size_t psi, std::uint64_t seed,
                            std::span<const double> scale) {
  if (psi == 0) throw std::invalid_argument("perturb_neighborhood: psi must be positive");
  if (!scale.empty() && scale.size() != query.size()) {
    throw std::invalid_argument("perturb_neighborhood: scale dimensionality mismatch");
  }
  for (double v : query) {
    if (!std::isfinite(v)) throw std::invalid_argument("perturb_neighborhood: non-finite query");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix rows(psi, query.size());
  for (std::size_t r = 0; r < psi; ++r) {
    for (std::size_t c = 0; c < query.size(); ++c) {
      const double xi = noise(rng);
      rows(r, c) = query[c] + (scale.empty() ? xi : scale[c] * xi);
    }
  }
  return rows;
}

std::vector<Summary> performance_stats(std::span<const ModelPtr> models, const Matrix& neighborhood) {
  if (models.empty()) throw std::invalid_argument("performance_stats: empty model list");
  if (neighborhood.rows() == 0) throw std::invalid_argument("performance_stats: empty neighbourhood");
  std::vector<Summary> out;
  out.reserve(models.size());
  for (const auto& model : models) out.push_back(summarize(model->predict_batch(neighborhood)));
  return out;
}

MetaFeatureVector build_meta_vector(std::span<const double> query, std::span<const ModelPtr> experts,
                                    const LandmarkerSet& landmarkers,
                                    const MetaFeatureSchema& schema, std::uint64_t seed) {
  if (query.size() != schema.base_count() || query.size() != landmarkers.dimension()) {
    throw std::invalid_argument("build_meta_vector: query dimensionality mismatch");
  }
  if (experts.size() != schema.expert_count()) {
    throw std::invalid_argument("build_meta_vector: expert pool does not match schema");
  }
  std::vector<ModelPtr> models(experts.begin(), experts.end());
  for (const auto& lm : landmarkers.models()) models.push_back(lm);

  const auto& scale = landmarkers.nearest_neighbor().index().transform().stdevs();
  const Matrix neighborhood = perturb_neighborhood(query, schema.neighborhood_size(), seed, scale);
  const auto stats = performance_stats(models, neighborhood);
  const LocalLandmarks local = landmarkers.local_landmarks(query);

  MetaFeatureVector v;
  v.values.reserve(schema.size());
  v.values.insert(v.values.end(), query.begin(), query.end());
  for (const auto& s : stats) {
    v.values.insert(v.values.end(), {s.mean, s.stdev, s.q1, s.q3});
  }
  v.values.insert(v.values.end(), local.predictions.begin(), local.predictions.end());
  if (schema.include_local()) {
    const auto c = local.characteristics();
    v.values.insert(v.values.end(), c.begin(), c.end());
  }
  for (double x : v.values) {
    if (!std::isfinite(x)) throw std::runtime_error("meta-feature vector has a non-finite entry");
  }
  return v;
}

MetaTable build_meta_table(const Dataset& data, std::span<const ModelPtr> experts,
                           const LandmarkerSet& landmarkers, const MetaFeatureSchema& schema,
                           std::uint64_t seed, std::size_t jobs) {
  const std::size_t n = data.size();
  MetaTable table{Matrix(n, schema.size()), Matrix(n, experts.size())};
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto v = build_meta_vector(data.row(i), experts, landmarkers, schema, derive_seed(seed, i));
    std::copy(v.values.begin(), v.values.end(), table.features.row(i).begin());
    for (std::size_t j = 0; j < experts.size(); ++j) {
      table.residuals(i, j) = experts[j]->predict(data.row(i)) - data.target()[i];
    }
  });
  return table;
}

MetaTable truncate_columns(const MetaTable& table, std::size_t columns) {
  if (columns > table.features.cols()) throw std::invalid_argument("truncate_columns: too many columns");
  Matrix out(table.features.rows(), columns);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto src = table.features.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(columns), out.row(r).begin());
  }
  return {std::move(out), table.residuals};
}

void write_meta_table_csv(const MetaTable& table, const MetaFeatureSchema& schema,
                          const std::filesystem::path& path) {
  if (table.features.cols() != schema.size()) throw std::invalid_argument("meta table does not match schema");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.precision(17);
  const auto names = schema.column_names();
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  for (std::size_t j = 0; j < table.residuals.cols(); ++j) {
    out << ",residual." << expert_label(j, schema.expert_ids()[j]);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.features.rows(); ++r) {
    auto row = table.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    for (double v : table.residuals.row(r)) out << ',' << v;
    out << '\n';
  }
}

}  // namespace metabags
