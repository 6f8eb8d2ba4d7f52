#pragma once

#include <json.hpp>

namespace spoc {

// Insertion-ordered so artifacts read in field order and stay byte-stable.
using Json = nlohmann::ordered_json;

}  // namespace spoc
