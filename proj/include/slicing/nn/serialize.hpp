#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "slicing/nn/network.hpp"

namespace slicing {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

// {"input_shape": [...], "layers": [...]}
nlohmann::json arch_to_json(const Network& net);
// {name: {"shape": [...], "data": [...]}}; names optionally prefixed.
void params_to_json(const ParamMap& params, nlohmann::json& out, const std::string& prefix = "");
ParamMap params_from_json(const nlohmann::json& params, const std::string& prefix = "");

// Rebuilds a network from its arch block and the prefixed parameters.
Network network_from_json(const nlohmann::json& arch, const nlohmann::json& params, const std::string& prefix = "");

// Reads a model file and checks format_version and kind.
nlohmann::json read_model_file(const std::filesystem::path& file, const std::string& expected_kind);
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace slicing
