#pragma once

#include "dualaug/mlp.hpp"

#include <json.hpp>

namespace dualaug {

nlohmann::json to_json(const ParamLayout& layout);
ParamLayout layout_from_json(const nlohmann::json& doc);

// {"layout": [...], "values": [...]}; doubles round-trip exactly.
nlohmann::json to_json(const ParamStore& store);
ParamStore param_store_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& doc);

nlohmann::json parse_json_file(const std::string& path);

}  // namespace dualaug
