#include "metabags/ensemble.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "metabags/parallel.hpp"
#include "metabags/random.hpp"

namespace metabags {

namespace {

// Seed streams of one fit.
enum Stream : std::uint64_t {
  kTuneStream = 0,
  kMetaTableStream = 1,
  kBootstrapStream = 2,
  kTreeStream = 3,
  kQueryStream = 4,
  kTrainStream = 5,
  kPoolStream = 10,
};

std::uint64_t hash_bytes(std::span<const double> values) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

std::vector<LearnerConfig> default_expert_pool(std::size_t tuning_budget) {
  std::vector<LearnerConfig> pool;
  for (const char* id : {"rf", "gb", "knn", "lasso", "cart"}) {
    LearnerConfig c;
    c.learner = id;
    c.tuning_budget = tuning_budget;
    pool.push_back(std::move(c));
  }
  return pool;
}

void MetaBagsConfig::validate() const {
  if (experts.size() < 2) throw std::invalid_argument("MetaBags needs at least 2 experts");
  for (const auto& e : experts) {
    validate_spec(e.spec());
    if (e.tuning_budget == 0) throw std::invalid_argument("tuning budget must be >= 1");
  }
  if (phi == 0) throw std::invalid_argument("phi must be >= 1");
  if (psi == 0) throw std::invalid_argument("psi must be >= 1");
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("s must lie in (0, 1]");
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  if (jobs == 0) throw std::invalid_argument("jobs must be >= 1");
  induction(0).validate();
}

InductionConfig MetaBagsConfig::induction(std::uint64_t seed) const {
  InductionConfig c;
  c.phi = phi;
  c.rho = rho;
  c.epsilon_fraction = epsilon_fraction;
  c.upsilon_fraction = upsilon_fraction;
  c.bias = bias;
  c.seed = seed;
  return c;
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "metareg") return Variant::MetaReg;
  if (name == "mbwlm") return Variant::MBwLM;
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::MetaReg:
      return "metareg";
    case Variant::MBwLM:
      return "mbwlm";
    case Variant::Full:
    default:
      return "full";
  }
}

std::vector<std::string> TrainedPool::identifiers() const {
  std::vector<std::string> ids;
  for (const auto& c : configs) ids.push_back(c.learner);
  return ids;
}

TrainedPool train_experts(const Dataset& train, const std::vector<LearnerConfig>& configs, bool tune_first,
                          std::uint64_t seed, std::size_t jobs) {
  if (configs.empty()) throw std::invalid_argument("train_experts: empty pool");
  TrainedPool pool;
  pool.configs.resize(configs.size());
  pool.models.resize(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t j) {
    LearnerConfig cfg = configs[j];
    if (tune_first) cfg = tune(cfg.learner, train, cfg, derive_seed(derive_seed(seed, kTuneStream), j));
    pool.models[j] = train_learner(cfg.spec(), train, derive_seed(derive_seed(seed, kTrainStream), j));
    pool.configs[j] = std::move(cfg);
  });
  return pool;
}

MetaBagsModel::MetaBagsModel(TrainedPool experts, LandmarkerSet landmarkers, MetaFeatureSchema schema,
                             std::vector<MetaDecisionTree> trees, MetaBagsConfig config, Metadata metadata)
    : experts_(std::move(experts)),
      landmarkers_(std::move(landmarkers)),
      schema_(std::move(schema)),
      trees_(std::move(trees)),
      config_(std::move(config)),
      metadata_(std::move(metadata)) {
  if (trees_.empty()) throw std::invalid_argument("MetaBags model needs at least one tree");
  if (experts_.models.size() != experts_.configs.size() || experts_.models.size() != schema_.expert_count()) {
    throw std::invalid_argument("expert pool does not match the schema");
  }
  for (const auto& m : experts_.models) {
    if (!m || m->dimension() != landmarkers_.dimension()) {
      throw std::invalid_argument("expert dimensionality does not match the landmarkers");
    }
  }
  for (const auto& t : trees_) {
    if (t.feature_count() != schema_.size() || t.expert_count() != experts_.models.size()) {
      throw std::invalid_argument("meta tree does not match the schema");
    }
  }
}

std::uint64_t MetaBagsModel::query_seed(std::span<const double> query) const {
  return derive_seed(derive_seed(metadata_.seed, kQueryStream), hash_bytes(query));
}

MetaFeatureVector MetaBagsModel::meta_vector(std::span<const double> query) const {
  return build_meta_vector(query, experts_.models, landmarkers_, schema_, query_seed(query));
}

IntegratorResult MetaBagsModel::predict(std::span<const double> query) const {
  if (query.size() != dimension()) throw std::invalid_argument("query dimensionality mismatch");
  const MetaFeatureVector z = meta_vector(query);
  IntegratorResult out;
  out.expert_predictions.reserve(expert_count());
  for (const auto& m : experts_.models) out.expert_predictions.push_back(m->predict(query));
  out.selected.reserve(trees_.size());
  std::vector<std::size_t> counts(expert_count(), 0);
  for (const auto& t : trees_) {
    const std::size_t j = t.route(z.values);
    out.selected.push_back(j);
    ++counts[j];
  }
  // Equal selected outputs return that output untouched; re-averaging could
  // move it by an ulp.
  const double first = out.expert_predictions[out.selected.front()];
  bool unanimous = true;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] > 0 && out.expert_predictions[j] != first) unanimous = false;
  }
  if (unanimous) {
    out.prediction = first;
  } else {
    double sum = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      sum += static_cast<double>(counts[j]) * out.expert_predictions[j];
    }
    out.prediction = sum / static_cast<double>(trees_.size());
  }
  return out;
}

std::vector<double> MetaBagsModel::predict_batch(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  parallel_for(rows.rows(), config_.jobs, [&](std::size_t i) { out[i] = predict(rows.row(i)).prediction; });
  return out;
}

MetaLevel build_meta_level(const Dataset& train, const TrainedPool& pool, const MetaBagsConfig& config,
                           std::uint64_t seed) {
  LandmarkerSet landmarkers = fit_landmarkers(train);
  MetaFeatureSchema schema(train.feature_names(), pool.identifiers(), config.psi, true);
  MetaTable table = build_meta_table(train, pool.models, landmarkers, schema,
                                     derive_seed(seed, kMetaTableStream), config.jobs);
  return {std::move(landmarkers), std::move(schema), std::move(table)};
}

MetaBagsModel fit_from_meta_level(const Dataset& train, const TrainedPool& pool, const MetaLevel& level,
                                  const MetaBagsConfig& config, std::uint64_t seed, Variant variant) {
  config.validate();
  if (pool.models.size() < 2) throw std::invalid_argument("MetaBags needs at least 2 experts");
  MetaBagsConfig stored = config;
  MetaFeatureSchema schema = level.schema;
  MetaTable reduced;
  const MetaTable* table = &level.table;
  if (variant == Variant::MBwLM) {
    schema = level.schema.with_local(false);
    reduced = truncate_columns(level.table, schema.size());
    table = &reduced;
  }
  if (variant == Variant::MetaReg) stored.d = 1;

  const std::size_t n = train.size();
  std::vector<MetaDecisionTree> trees(stored.d);
  parallel_for(stored.d, stored.jobs, [&](std::size_t b) {
    const InductionConfig ic = stored.induction(derive_seed(derive_seed(seed, kTreeStream), b));
    if (variant == Variant::MetaReg) {
      trees[b] = induce_tree(table->features, table->residuals, ic);
    } else {
      const BootstrapSample sample =
          draw_bootstrap(n, stored.s, derive_seed(derive_seed(seed, kBootstrapStream), b));
      trees[b] = induce_tree(table->features, table->residuals, sample.indices, ic);
    }
  });
  MetaBagsModel::Metadata meta{seed, train.fingerprint(), n, variant, train.target_name()};
  return MetaBagsModel(pool, level.landmarkers, std::move(schema), std::move(trees), std::move(stored),
                       std::move(meta));
}

MetaBagsModel fit_metabags(const Dataset& train, const TrainedPool& pool, const MetaBagsConfig& config,
                           std::uint64_t seed, Variant variant) {
  config.validate();
  const MetaLevel level = build_meta_level(train, pool, config, seed);
  return fit_from_meta_level(train, pool, level, config, seed, variant);
}

MetaBagsModel fit_ablation(const Dataset& train, const MetaBagsConfig& config, std::uint64_t seed,
                           Variant variant) {
  config.validate();
  const TrainedPool pool =
      train_experts(train, config.experts, config.tune_experts, derive_seed(seed, kPoolStream), config.jobs);
  return fit_metabags(train, pool, config, seed, variant);
}

MetaBagsModel fit_metabags(const Dataset& train, const MetaBagsConfig& config, std::uint64_t seed) {
  return fit_ablation(train, config, seed, Variant::Full);
}

LinearStacker::LinearStacker(std::vector<double> weights, double intercept)
    : weights_(std::move(weights)), intercept_(intercept) {}

double LinearStacker::combine(std::span<const double> expert_predictions) const {
  if (expert_predictions.size() != weights_.size()) throw std::invalid_argument("stacker: wrong pool size");
  double v = intercept_;
  for (std::size_t j = 0; j < weights_.size(); ++j) v += weights_[j] * expert_predictions[j];
  return v;
}

IntegratorResult LinearStacker::predict(std::span<const ModelPtr> experts, std::span<const double> query) const {
  IntegratorResult out;
  for (const auto& m : experts) out.expert_predictions.push_back(m->predict(query));
  out.prediction = combine(out.expert_predictions);
  out.weights = weights_;
  return out;
}

LinearStacker fit_linear_stacking(const Dataset& train, std::span<const ModelPtr> experts) {
  if (experts.empty()) throw std::invalid_argument("linear stacking needs at least one expert");
  const std::size_t n = train.size();
  const std::size_t m = experts.size();
  Eigen::MatrixXd x(n, m + 1);
  Eigen::VectorXd y(n);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < m; ++j) {
    const auto p = experts[j]->predict_batch(train.features());
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = p[i];
  }
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = train.target()[i];
  const Eigen::VectorXd beta = x.completeOrthogonalDecomposition().solve(y);
  std::vector<double> w(m);
  for (std::size_t j = 0; j < m; ++j) w[j] = beta(static_cast<Eigen::Index>(j + 1));
  return LinearStacker(std::move(w), beta(0));
}

DynamicSelector::DynamicSelector(const Dataset& train, std::vector<ModelPtr> experts, std::size_t k)
    : experts_(std::move(experts)), index_(train.features()), k_(k) {
  if (experts_.empty()) throw std::invalid_argument("dynamic selection needs at least one expert");
  if (k_ == 0 || k_ > train.size()) throw std::invalid_argument("dynamic selection: k must lie in [1, N]");
  squared_errors_ = Matrix(train.size(), experts_.size());
  for (std::size_t j = 0; j < experts_.size(); ++j) {
    const auto p = experts_[j]->predict_batch(train.features());
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double e = p[i] - train.target()[i];
      squared_errors_(i, j) = e * e;
    }
  }
}

std::size_t DynamicSelector::select(std::span<const double> query) const {
  const auto neighbors = index_.nearest(query, k_);
  std::size_t best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < experts_.size(); ++j) {
    double sse = 0.0;
    for (const auto& nb : neighbors) sse += squared_errors_(nb.index, j);
    if (sse < best_sse) {
      best_sse = sse;
      best = j;
    }
  }
  return best;
}

IntegratorResult DynamicSelector::predict(std::span<const double> query) const {
  IntegratorResult out;
  for (const auto& m : experts_) out.expert_predictions.push_back(m->predict(query));
  const std::size_t j = select(query);
  out.selected = {j};
  out.prediction = out.expert_predictions[j];
  return out;
}

IntegratorResult predict_dynamic_selection(const Dataset& train, std::span<const ModelPtr> experts,
                                           std::span<const double> query, std::size_t k) {
  const DynamicSelector ds(train, std::vector<ModelPtr>(experts.begin(), experts.end()), k);
  return ds.predict(query);
}

std::size_t select_best(const Dataset& train, const std::vector<LearnerConfig>& configs, std::size_t folds,
                        std::uint64_t seed) {
  if (configs.empty()) throw std::invalid_argument("select_best: empty pool");
  if (folds < 2) throw std::invalid_argument("select_best: folds must be >= 2");
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < configs.size(); ++j) {
    const double score = cross_validated_rmse(configs[j].spec(), train, folds, seed);
    if (score < best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

}  // namespace metabags
