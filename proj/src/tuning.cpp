#include "metabags/tuning.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "metabags/random.hpp"
#include "metabags/stats.hpp"

namespace metabags {

double ParamRange::sample(Rng& rng) const {
  switch (scale) {
    case Scale::Integer: {
      std::uniform_int_distribution<long long> pick(std::llround(low), std::llround(high));
      return static_cast<double>(pick(rng));
    }
    case Scale::Log: {
      std::uniform_real_distribution<double> u(std::log(low), std::log(high));
      return std::exp(u(rng));
    }
    case Scale::Linear:
    default: {
      std::uniform_real_distribution<double> u(low, high);
      return u(rng);
    }
  }
}

bool ParamRange::contains(double value) const {
  // exp(log(x)) may land an ulp outside the bounds.
  const double slack = 1e-12 * std::max(std::abs(low), std::abs(high));
  if (value < low - slack || value > high + slack) return false;
  return scale != Scale::Integer || value == std::round(value);
}

SearchSpaces SearchSpaces::parse(const std::string& text) {
  SearchSpaces out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      throw std::invalid_argument("search spaces line " + std::to_string(line_no) + ": missing '='");
    }
    std::istringstream key_stream(line.substr(0, eq));
    std::string key;
    key_stream >> key;
    std::istringstream value_stream(line.substr(eq + 1));
    if (key == "version") {
      value_stream >> out.version_;
      continue;
    }
    auto dot = key.find('.');
    std::string scale;
    ParamRange range;
    if (dot == std::string::npos || !(value_stream >> scale >> range.low >> range.high)) {
      throw std::invalid_argument("search spaces line " + std::to_string(line_no) +
                                  ": expected '<learner>.<param> = <scale> <low> <high>'");
    }
    if (scale == "int") {
      range.scale = ParamRange::Scale::Integer;
    } else if (scale == "real") {
      range.scale = ParamRange::Scale::Linear;
    } else if (scale == "log") {
      range.scale = ParamRange::Scale::Log;
      if (!(range.low > 0.0)) throw std::invalid_argument("log scale needs a positive lower bound");
    } else {
      throw std::invalid_argument("unknown scale '" + scale + "'");
    }
    if (!(range.low <= range.high)) throw std::invalid_argument("empty range for " + key);
    const std::string learner = key.substr(0, dot);
    const std::string param = key.substr(dot + 1);
    if (!default_params(learner).contains(param)) {
      throw std::invalid_argument("learner '" + learner + "' has no parameter '" + param + "'");
    }
    out.spaces_[learner][param] = range;
  }
  if (out.version_ <= 0) throw std::invalid_argument("search spaces: missing version");
  return out;
}

SearchSpaces SearchSpaces::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open search spaces file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const std::string& SearchSpaces::default_text() {
  static const std::string text = R"(# Random-search spaces for base-learner tuning.
# <learner>.<parameter> = <scale> <low> <high>
#   int  - uniform integer on [low, high]
#   real - uniform on [low, high]
#   log  - log-uniform on [low, high]
version = 1

cart.min_leaf = int 1 40
cart.max_depth = int 2 20

rf.trees = int 50 200
rf.feature_fraction = real 0.2 1.0
rf.min_leaf = int 1 20

gb.trees = int 50 300
gb.learning_rate = log 0.01 0.3
gb.max_depth = int 1 6
gb.min_leaf = int 1 20

knn.k = int 1 30

lasso.penalty = log 0.0001 1.0

mars.max_basis = int 1 20
mars.candidate_knots = int 5 40
)";
  return text;
}

const SearchSpaces& SearchSpaces::defaults() {
  static const SearchSpaces spaces = parse(default_text());
  return spaces;
}

const SearchSpace& SearchSpaces::at(const std::string& learner) const {
  auto it = spaces_.find(learner);
  if (it == spaces_.end()) throw std::invalid_argument("no search space for learner: " + learner);
  return it->second;
}

double cross_validated_rmse(const LearnerSpec& spec, const Dataset& data, std::size_t folds,
                            std::uint64_t seed) {
  const auto plan = make_folds(data.size(), folds, 1, seed).front();
  double total = 0.0;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const auto train_rows = plan.training_indices(k);
    auto model = train_learner(spec, data.subset(train_rows), derive_seed(seed, k));
    double ss = 0.0;
    for (std::size_t idx : plan.folds[k]) {
      const double e = model->predict(data.row(idx)) - data.target()[idx];
      ss += e * e;
    }
    total += std::sqrt(ss / static_cast<double>(plan.folds[k].size()));
  }
  return total / static_cast<double>(plan.folds.size());
}

LearnerConfig tune(const std::string& learner, const Dataset& data, const LearnerConfig& config,
                   const SearchSpace& space, std::uint64_t seed) {
  if (!is_learner(learner)) throw std::invalid_argument("unknown learner: " + learner);
  if (config.tuning_budget == 0) throw std::invalid_argument("tuning budget must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<LearnerConfig> points;
  for (std::size_t b = 0; b < config.tuning_budget; ++b) {
    LearnerConfig point = config;
    point.learner = learner;
    for (const auto& [name, range] : space) point.params[name] = range.sample(rng);
    validate_spec(point.spec());
    points.push_back(std::move(point));
  }
  if (points.size() == 1) return points.front();

  const std::size_t folds = std::min(config.tuning_folds, data.size());
  if (folds < 2) return points.front();
  const std::uint64_t cv_seed = derive_seed(seed, 0xcf);
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double score = cross_validated_rmse(points[i].spec(), data, folds, cv_seed);
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return points[best];
}

LearnerConfig tune(const std::string& learner, const Dataset& data, const LearnerConfig& config,
                   std::uint64_t seed) {
  if (!is_learner(learner)) throw std::invalid_argument("unknown learner: " + learner);
  return tune(learner, data, config, SearchSpaces::defaults().at(learner), seed);
}

}  // namespace metabags
