#pragma once

#include <string>

#include "c2f/config.hpp"
#include "c2f/train.hpp"

namespace c2f {

/// Flat JSON document holding the union of model and training fields under
/// their struct names. Unknown keys are rejected; a named variant expands to
/// its preset first and explicit keys then override.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    bool operator==(const RunConfig&) const = default;
};

RunConfig run_config_from_json_text(const std::string& text);  // ConfigError on bad input
RunConfig run_config_from_file(const std::string& path);       // IoError if unreadable
std::string run_config_to_json_text(const RunConfig& rc);      // canonical field order

/// Model-only codec used inside checkpoint manifests.
std::string model_config_to_json_text(const ModelConfig& mc);
ModelConfig model_config_from_json_text(const std::string& text);

}  // namespace c2f
