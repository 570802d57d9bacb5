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

// Value semantics shared by the store's query engine and the client-side
// filter evaluator.
//
// A JsonFilter is a map of dotted path -> condition. A condition is either a
// scalar (equality) or an operator object whose keys all come from
// {$eq,$ne,$gt,$gte,$lt,$lte,$in,$contains,$exists}. Entries are AND-ed.
//
//   equality   deep-equal, numbers compare numerically across int/float
//   $ne        negation of equality; true when the path is missing
//   ordering   only number-vs-number or string-vs-string, otherwise false
//   $contains  case-sensitive substring, strings only
//   $in        membership by equality
//   $exists    true iff the path resolves (a null value exists)

#pragma once

#include <optional>
#include <string_view>

#include "altar/json.hpp"

namespace altar {

// Follows flatten_paths addressing: map keys, and decimal indices into lists.
// Returns nullptr when any segment does not resolve.
const Json* resolve_path(const Json& doc, std::string_view path);

// Exact numeric comparison between int64 and double values.
int compare_numbers(const Json& a, const Json& b);

bool values_equal(const Json& a, const Json& b);

// <0, 0, >0 when both are numbers or both strings; nullopt otherwise.
std::optional<int> compare_ordered(const Json& a, const Json& b);

// Total order used by sorts: null < bool < number < string < list < map.
int compare_total(const Json& a, const Json& b);

// Raises FilterInvalid when the filter is malformed.
void validate_filter(const Json& filter);

// Assumes a validated filter.
bool matches(const Json& filter, const Json& doc);

}  // namespace altar
