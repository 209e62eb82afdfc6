#pragma once

#include <filesystem>
#include <string>

#include "metabags/ensemble.hpp"

namespace metabags {

inline constexpr const char* kArchiveFormat = "metabags-model";
inline constexpr int kArchiveVersion = 1;

/// JSON archive holding config, schema, experts, landmarkers, trees and seeds.
/// Loading reproduces predictions bit-exactly.
std::string serialize_model(const MetaBagsModel& model);
MetaBagsModel deserialize_model(const std::string& text);

void save_model(const MetaBagsModel& model, const std::filesystem::path& path);
MetaBagsModel load_model(const std::filesystem::path& path);

/// Single trained learner, for round-trip checks on individual experts.
std::string serialize_learner(const TrainedModel& model);
ModelPtr deserialize_learner(const std::string& text);

}  // namespace metabags
