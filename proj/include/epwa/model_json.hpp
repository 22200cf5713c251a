#pragma once

#include <json.hpp>

#include "epwa/model.hpp"

namespace epwa {

nlohmann::ordered_json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

}  // namespace epwa
