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

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace altar {

using Timestamp = std::chrono::time_point<std::chrono::system_clock,
                                          std::chrono::milliseconds>;

// Injected wherever "now" matters so tests can drive the clock.
using Clock = std::function<Timestamp()>;

Timestamp system_now();

// RFC 3339, UTC, millisecond precision: 2025-01-23T12:00:00.000Z
std::string format_timestamp(Timestamp t);

// Accepts the format above; the fractional part may have 0-9 digits and is
// truncated to milliseconds. Only the `Z` offset is accepted.
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace altar
