#pragma once

#include <filesystem>

#include <json.hpp>

#include "fedngm/federation.hpp"
#include "fedngm/objective.hpp"

namespace fedngm {

// JSON config readers. Unknown keys are rejected so typos surface as config errors (exit 2).
// Missing keys keep their defaults.

nlohmann::json load_json_file(const std::filesystem::path& path);

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
ArchSpec arch_from_json(const nlohmann::json& j, ArchSpec base = {});
SamplerConfig sampler_from_json(const nlohmann::json& j, SamplerConfig base = {});
FederationConfig federation_config_from_json(const nlohmann::json& j, FederationConfig base = {});

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ArchSpec& a);
nlohmann::json to_json(const FederationConfig& c);

}  // namespace fedngm
