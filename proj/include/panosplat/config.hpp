#pragma once

// JSON form of the training configuration. Unknown keys and wrong types are ConfigErrors.

#include "panosplat/trainer.hpp"

#include <json.hpp>

#include <string>

namespace panosplat {

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; `source` prefixes error messages.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& source = "config");
TrainConfig load_train_config(const std::string& path);

} // namespace panosplat
