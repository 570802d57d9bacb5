// Copyright 2026 The Altar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>

#include "altar/error.hpp"
#include <json.hpp>

namespace altar {

// nlohmann::json keeps object keys in a std::map, so a compact dump is
// already sorted and free of insignificant whitespace.
using Json = nlohmann::json;

inline std::string canonical_json(const Json& value) { return value.dump(); }

// Parses text as JSON; malformed input raises Error(code).
Json parse_json(std::string_view text, ErrorCode code);

}  // namespace altar
