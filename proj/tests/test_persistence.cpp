#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "metabags/dataset.hpp"
#include "metabags/errors.hpp"
#include "metabags/persistence.hpp"

using namespace metabags;

namespace {

MetaBagsConfig config() {
  MetaBagsConfig c;
  c.experts = {{"rf", {{"trees", 10}}, 1, 3}, {"gb", {{"trees", 20}}, 1, 3}, {"knn", {}, 1, 3},
               {"lasso", {}, 1, 3}, {"cart", {}, 1, 3}, {"mars", {}, 1, 3}};
  c.tune_experts = false;
  c.d = 15;
  c.psi = 12;
  return c;
}

}  // namespace

TEST_CASE("learner round trips are bit-exact") {
  const Dataset train = generate_quartic_surface(150, 0.0, 1.0, 1);
  const Dataset test = generate_quartic_surface(60, -0.2, 1.2, 2);
  for (const auto& id : learner_identifiers()) {
    const auto m = train_learner({id, {}}, train, 4);
    const auto back = deserialize_learner(serialize_learner(*m));
    CHECK(back->identifier() == m->identifier());
    for (std::size_t i = 0; i < test.size(); ++i) CHECK(back->predict(test.row(i)) == m->predict(test.row(i)));
  }
}

TEST_CASE("model round trip reproduces predictions bit-exactly") {
  const Dataset train = generate_quartic_surface(200, 0.0, 0.8, 3);
  const Dataset test = generate_quartic_surface(80, 0.0, 1.0, 4);
  for (auto v : {Variant::Full, Variant::MetaReg, Variant::MBwLM}) {
    const auto model = fit_ablation(train, config(), 9, v);
    const auto path = std::filesystem::temp_directory_path() / "metabags_model_rt.json";
    save_model(model, path);
    const auto back = load_model(path);
    CHECK(back.metadata().variant == v);
    CHECK(back.metadata().seed == model.metadata().seed);
    CHECK(back.metadata().fingerprint == train.fingerprint());
    CHECK(back.schema().column_names() == model.schema().column_names());
    CHECK(back.trees().size() == model.trees().size());
    for (std::size_t t = 0; t < model.trees().size(); ++t) CHECK(back.trees()[t].dump() == model.trees()[t].dump());
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto a = model.predict(test.row(i));
      const auto b = back.predict(test.row(i));
      CHECK(a.prediction == b.prediction);
      CHECK(a.selected == b.selected);
    }
    // Serializing the loaded model gives the same archive.
    CHECK(serialize_model(back) == serialize_model(model));
  }
}

TEST_CASE("archive errors") {
  CHECK_THROWS_AS((void)deserialize_model("not json"), ArchiveError);
  CHECK_THROWS_AS((void)deserialize_model("{}"), ArchiveError);
  CHECK_THROWS_AS((void)load_model("/nonexistent/model.json"), ArchiveError);

  const Dataset train = generate_quartic_surface(80, 0.0, 1.0, 5);
  auto cfg = config();
  cfg.d = 2;
  const auto model = fit_metabags(train, cfg, 1);
  auto j = nlohmann::json::parse(serialize_model(model));
  CHECK(j.at("format") == kArchiveFormat);
  CHECK(j.at("version") == kArchiveVersion);

  auto wrong_version = j;
  wrong_version["version"] = kArchiveVersion + 1;
  CHECK_THROWS_AS((void)deserialize_model(wrong_version.dump()), ArchiveError);
  auto wrong_format = j;
  wrong_format["format"] = "something-else";
  CHECK_THROWS_AS((void)deserialize_model(wrong_format.dump()), ArchiveError);

  const std::string text = serialize_model(model);
  CHECK_THROWS_AS((void)deserialize_model(text.substr(0, text.size() / 2)), ArchiveError);
  CHECK_THROWS_AS((void)deserialize_learner("{\"type\": \"svr\"}"), ArchiveError);
}
