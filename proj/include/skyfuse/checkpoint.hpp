#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skyfuse/model.hpp"

namespace skyfuse {

/// Trained model on disk: a text manifest (config, class names, and the
/// name/shape/offset of every tensor) followed by a binary blob of one
/// container per parameter. Round-trips are bit-exact.
struct Checkpoint {
    ModelConfig config;
    std::vector<std::string> class_names;
    ParameterSet<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const std::vector<std::string>& class_names,
                     ParameterSet<float>& params);

Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_text(const ModelConfig& cfg);
ModelConfig parse_model_config_text(const std::string& text);

}  // namespace skyfuse
