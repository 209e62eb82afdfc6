#include "metabags/persistence.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "metabags/boosting.hpp"
#include "metabags/errors.hpp"
#include "metabags/forest.hpp"

namespace metabags {

namespace {

using json = nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

json tree_to_json(const RegressionTreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes()) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.variance, n.count, n.depth});
  }
  return {{"dimension", t.dimension()}, {"nodes", std::move(nodes)}};
}

RegressionTreeModel tree_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& a : j.at("nodes")) {
    TreeNode n;
    n.feature = a.at(0).get<std::int32_t>();
    n.threshold = a.at(1).get<double>();
    n.left = a.at(2).get<std::uint32_t>();
    n.right = a.at(3).get<std::uint32_t>();
    n.value = a.at(4).get<double>();
    n.variance = a.at(5).get<double>();
    n.count = a.at(6).get<std::uint32_t>();
    n.depth = a.at(7).get<std::uint32_t>();
    nodes.push_back(n);
  }
  return RegressionTreeModel(std::move(nodes), j.at("dimension").get<std::size_t>());
}

json knn_to_json(const KnnModel& m) {
  return {{"k", m.k()}, {"features", matrix_to_json(m.raw_features())}, {"targets", m.targets()}};
}

KnnModel knn_from_json(const json& j) {
  Dataset data(matrix_from_json(j.at("features")), j.at("targets").get<std::vector<double>>());
  return KnnModel(data, j.at("k").get<std::size_t>());
}

json lasso_to_json(const LassoModel& m) {
  return {{"coefficients", m.coefficients()}, {"intercept", m.intercept()}};
}

LassoModel lasso_from_json(const json& j) {
  return LassoModel(j.at("coefficients").get<std::vector<double>>(), j.at("intercept").get<double>());
}

json mars_to_json(const MarsModel& m) {
  json terms = json::array();
  for (const auto& t : m.terms()) terms.push_back({t.feature, t.knot, t.direction});
  json intervals = json::array();
  for (const auto& f : m.intervals()) intervals.push_back({{"edges", f.edges}, {"mass", f.mass}});
  return {{"intercept", m.intercept()}, {"terms", std::move(terms)}, {"coefficients", m.coefficients()},
          {"intervals", std::move(intervals)}};
}

MarsModel mars_from_json(const json& j) {
  std::vector<HingeTerm> terms;
  for (const auto& a : j.at("terms")) {
    terms.push_back({a.at(0).get<std::size_t>(), a.at(1).get<double>(), a.at(2).get<int>()});
  }
  std::vector<FeatureIntervals> intervals;
  for (const auto& f : j.at("intervals")) {
    intervals.push_back({f.at("edges").get<std::vector<double>>(), f.at("mass").get<std::vector<double>>()});
  }
  return MarsModel(j.at("intercept").get<double>(), std::move(terms),
                   j.at("coefficients").get<std::vector<double>>(), std::move(intervals));
}

json learner_to_json(const TrainedModel& model) {
  json body;
  if (const auto* m = dynamic_cast<const RegressionTreeModel*>(&model)) {
    body = tree_to_json(*m);
  } else if (const auto* m = dynamic_cast<const RandomForestModel*>(&model)) {
    json trees = json::array();
    for (const auto& t : m->trees()) trees.push_back(tree_to_json(t));
    body = {{"dimension", m->dimension()}, {"trees", std::move(trees)}};
  } else if (const auto* m = dynamic_cast<const GradientBoostingModel*>(&model)) {
    json stages = json::array();
    for (const auto& t : m->stages()) stages.push_back(tree_to_json(t));
    body = {{"dimension", m->dimension()}, {"initial", m->initial()},
            {"learning_rate", m->learning_rate()}, {"stages", std::move(stages)}};
  } else if (const auto* m = dynamic_cast<const KnnModel*>(&model)) {
    body = knn_to_json(*m);
  } else if (const auto* m = dynamic_cast<const LassoModel*>(&model)) {
    body = lasso_to_json(*m);
  } else if (const auto* m = dynamic_cast<const MarsModel*>(&model)) {
    body = mars_to_json(*m);
  } else {
    throw ArchiveError("cannot serialize learner: " + std::string(model.identifier()));
  }
  return {{"type", std::string(model.identifier())}, {"model", std::move(body)}};
}

ModelPtr learner_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  const json& b = j.at("model");
  if (type == "cart") return std::make_shared<RegressionTreeModel>(tree_from_json(b));
  if (type == "rf") {
    std::vector<RegressionTreeModel> trees;
    for (const auto& t : b.at("trees")) trees.push_back(tree_from_json(t));
    return std::make_shared<RandomForestModel>(std::move(trees), b.at("dimension").get<std::size_t>());
  }
  if (type == "gb") {
    std::vector<RegressionTreeModel> stages;
    for (const auto& t : b.at("stages")) stages.push_back(tree_from_json(t));
    return std::make_shared<GradientBoostingModel>(b.at("initial").get<double>(),
                                                   b.at("learning_rate").get<double>(), std::move(stages),
                                                   b.at("dimension").get<std::size_t>());
  }
  if (type == "knn") return std::make_shared<KnnModel>(knn_from_json(b));
  if (type == "lasso") return std::make_shared<LassoModel>(lasso_from_json(b));
  if (type == "mars") return std::make_shared<MarsModel>(mars_from_json(b));
  throw ArchiveError("unknown learner type in archive: " + type);
}

json meta_tree_to_json(const MetaDecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes()) {
    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                     {"right", n.right}, {"support", n.support}, {"expert", n.expert},
                     {"gain", n.gain}, {"depth", n.depth}, {"squared_bias", n.squared_bias}});
  }
  return {{"features", t.feature_count()}, {"experts", t.expert_count()}, {"epsilon", t.epsilon()},
          {"upsilon", t.upsilon()}, {"nodes", std::move(nodes)}};
}

MetaDecisionTree meta_tree_from_json(const json& j) {
  std::vector<MetaTreeNode> nodes;
  for (const auto& a : j.at("nodes")) {
    MetaTreeNode n;
    n.feature = a.at("feature").get<int>();
    n.threshold = a.at("threshold").get<double>();
    n.left = a.at("left").get<std::uint32_t>();
    n.right = a.at("right").get<std::uint32_t>();
    n.support = a.at("support").get<std::size_t>();
    n.expert = a.at("expert").get<std::size_t>();
    n.gain = a.at("gain").get<double>();
    n.depth = a.at("depth").get<std::size_t>();
    n.squared_bias = a.at("squared_bias").get<std::vector<double>>();
    nodes.push_back(std::move(n));
  }
  return MetaDecisionTree(std::move(nodes), j.at("features").get<std::size_t>(),
                          j.at("experts").get<std::size_t>(), j.at("epsilon").get<double>(),
                          j.at("upsilon").get<std::size_t>());
}

json learner_config_to_json(const LearnerConfig& c) {
  return {{"learner", c.learner}, {"params", c.params}, {"tuning_budget", c.tuning_budget},
          {"tuning_folds", c.tuning_folds}};
}

LearnerConfig learner_config_from_json(const json& j) {
  LearnerConfig c;
  c.learner = j.at("learner").get<std::string>();
  c.params = j.at("params").get<ParamMap>();
  c.tuning_budget = j.at("tuning_budget").get<std::size_t>();
  c.tuning_folds = j.at("tuning_folds").get<std::size_t>();
  return c;
}

json config_to_json(const MetaBagsConfig& c) {
  json experts = json::array();
  for (const auto& e : c.experts) experts.push_back(learner_config_to_json(e));
  return {{"experts", std::move(experts)},
          {"tune_experts", c.tune_experts},
          {"phi", c.phi},
          {"rho", c.rho},
          {"psi", c.psi},
          {"s", c.s},
          {"d", c.d},
          {"epsilon_fraction", c.epsilon_fraction},
          {"upsilon_fraction", c.upsilon_fraction},
          {"bias", c.bias == BiasMode::SquaredMean ? "squared_mean" : "mean_squared"},
          {"jobs", c.jobs}};
}

MetaBagsConfig config_from_json(const json& j) {
  MetaBagsConfig c;
  c.experts.clear();
  for (const auto& e : j.at("experts")) c.experts.push_back(learner_config_from_json(e));
  c.tune_experts = j.at("tune_experts").get<bool>();
  c.phi = j.at("phi").get<std::size_t>();
  c.rho = j.at("rho").get<std::size_t>();
  c.psi = j.at("psi").get<std::size_t>();
  c.s = j.at("s").get<double>();
  c.d = j.at("d").get<std::size_t>();
  c.epsilon_fraction = j.at("epsilon_fraction").get<double>();
  c.upsilon_fraction = j.at("upsilon_fraction").get<double>();
  const auto bias = j.at("bias").get<std::string>();
  if (bias != "squared_mean" && bias != "mean_squared") throw ArchiveError("unknown bias mode: " + bias);
  c.bias = bias == "squared_mean" ? BiasMode::SquaredMean : BiasMode::MeanSquared;
  c.jobs = j.at("jobs").get<std::size_t>();
  return c;
}

}  // namespace

std::string serialize_model(const MetaBagsModel& model) {
  json experts = json::array();
  const auto& pool = model.experts();
  for (std::size_t j = 0; j < pool.models.size(); ++j) {
    experts.push_back({{"config", learner_config_to_json(pool.configs[j])},
                       {"trained", learner_to_json(*pool.models[j])}});
  }
  json landmarkers = json::array();
  for (const auto& m : model.landmarkers().models()) landmarkers.push_back(learner_to_json(*m));
  json trees = json::array();
  for (const auto& t : model.trees()) trees.push_back(meta_tree_to_json(t));
  const auto& schema = model.schema();
  const auto& meta = model.metadata();
  json root = {
      {"format", kArchiveFormat},
      {"version", kArchiveVersion},
      {"metadata",
       {{"seed", meta.seed},
        {"fingerprint", meta.fingerprint},
        {"training_rows", meta.training_rows},
        {"variant", std::string(variant_name(meta.variant))},
        {"target_name", meta.target_name}}},
      {"config", config_to_json(model.config())},
      {"schema",
       {{"base_names", schema.base_names()},
        {"expert_ids", schema.expert_ids()},
        {"psi", schema.neighborhood_size()},
        {"include_local", schema.include_local()},
        {"columns", schema.column_names()}}},
      {"experts", std::move(experts)},
      {"landmarkers", std::move(landmarkers)},
      {"trees", std::move(trees)},
  };
  return root.dump();
}

MetaBagsModel deserialize_model(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("model archive is not valid JSON: ") + e.what());
  }
  try {
    if (!root.is_object() || root.value("format", std::string()) != kArchiveFormat) {
      throw ArchiveError("not a metabags model archive");
    }
    const int version = root.at("version").get<int>();
    if (version != kArchiveVersion) {
      throw ArchiveError("unsupported archive version " + std::to_string(version) + " (expected " +
                         std::to_string(kArchiveVersion) + ")");
    }
    TrainedPool pool;
    for (const auto& e : root.at("experts")) {
      pool.configs.push_back(learner_config_from_json(e.at("config")));
      pool.models.push_back(learner_from_json(e.at("trained")));
    }
    const auto& lm = root.at("landmarkers");
    if (lm.size() != kLandmarkerCount) throw ArchiveError("archive must hold 4 landmarkers");
    auto lasso = std::dynamic_pointer_cast<const LassoModel>(learner_from_json(lm.at(0)));
    auto nn1 = std::dynamic_pointer_cast<const KnnModel>(learner_from_json(lm.at(1)));
    auto mars = std::dynamic_pointer_cast<const MarsModel>(learner_from_json(lm.at(2)));
    auto cart = std::dynamic_pointer_cast<const RegressionTreeModel>(learner_from_json(lm.at(3)));
    if (!lasso || !nn1 || !mars || !cart) throw ArchiveError("landmarkers stored in the wrong order");
    LandmarkerSet landmarkers(lasso, nn1, mars, cart);

    const auto& s = root.at("schema");
    MetaFeatureSchema schema(s.at("base_names").get<std::vector<std::string>>(),
                             s.at("expert_ids").get<std::vector<std::string>>(),
                             s.at("psi").get<std::size_t>(), s.at("include_local").get<bool>());
    if (schema.column_names() != s.at("columns").get<std::vector<std::string>>()) {
      throw ArchiveError("archive schema columns do not match the schema description");
    }
    std::vector<MetaDecisionTree> trees;
    for (const auto& t : root.at("trees")) trees.push_back(meta_tree_from_json(t));

    const auto& m = root.at("metadata");
    MetaBagsModel::Metadata meta{m.at("seed").get<std::uint64_t>(), m.at("fingerprint").get<std::uint64_t>(),
                                 m.at("training_rows").get<std::size_t>(),
                                 parse_variant(m.at("variant").get<std::string>()),
                                 m.at("target_name").get<std::string>()};
    return MetaBagsModel(std::move(pool), std::move(landmarkers), std::move(schema), std::move(trees),
                         config_from_json(root.at("config")), std::move(meta));
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("malformed model archive: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArchiveError(std::string("inconsistent model archive: ") + e.what());
  }
}

void save_model(const MetaBagsModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArchiveError("cannot write model archive: " + path.string());
  out << serialize_model(model);
  if (!out) throw ArchiveError("failed writing model archive: " + path.string());
}

MetaBagsModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open model archive: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

std::string serialize_learner(const TrainedModel& model) { return learner_to_json(model).dump(); }

ModelPtr deserialize_learner(const std::string& text) {
  try {
    return learner_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ArchiveError(std::string("malformed learner archive: ") + e.what());
  }
}

}  // namespace metabags
