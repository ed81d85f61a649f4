#pragma once

#include <string>

#include <json.hpp>

#include "coughkit/audio.hpp"
#include "coughkit/train.hpp"

namespace coughkit {

/// Everything the CLI can configure from one JSON document. Flags override
/// config values; config values override these defaults.
struct ToolConfig {
  PreprocessConfig preprocess;
  TrainConfig train;
};

/// Strict parser: unknown sections or keys are schema errors.
ToolConfig tool_config_from_json(const nlohmann::json& j);
ToolConfig load_tool_config(const std::string& path);

nlohmann::json tool_config_to_json(const ToolConfig& cfg);

}  // namespace coughkit
