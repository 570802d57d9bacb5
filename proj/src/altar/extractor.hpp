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

// Run export and publication bundles.
//
// Bundle layout:
//   runs.jsonl                       one run per line, as served by the API
//   metrics/<run_id>/<name>.csv      step,value,timestamp
//   artifacts/<run_id>/<name>        artifact bytes
//   annotations.jsonl
//   manifest.json                    {files: [{path, size_bytes, sha256}],
//                                     tool_version, exported_at,
//                                     manifest_sha256}
//
// manifest_sha256 covers the canonical manifest without that field.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "altar/filter_lang.hpp"
#include "altar/json.hpp"

namespace altar {

class ApiClient;

enum class ExportFormat { Jsonl, Csv };

// All runs matching `expr`, ordered by run_id. Compilable expressions are
// evaluated by the server; the rest filter a full fetch client-side.
std::vector<Json> fetch_runs(ApiClient& client, const FilterExpr& expr);

// Column names are the union of `config.<path>` leaves plus run_id,
// experiment_name, status, start_time and result, sorted by byte order.
// Rows end in CRLF; cells are quoted when needed.
void write_runs_csv(const std::vector<Json>& runs, std::ostream& out);
void write_runs_jsonl(const std::vector<Json>& runs, std::ostream& out);

// Returns the number of runs written.
std::uint64_t export_runs(ApiClient& client, const FilterExpr& expr, ExportFormat format,
                          std::ostream& out);

// `out_dir` must be absent or empty. Returns the manifest path after a
// successful verification pass.
std::filesystem::path export_bundle(ApiClient& client, const FilterExpr& expr,
                                    const std::filesystem::path& out_dir);

// Raises ChecksumMismatch naming the first file that differs from the
// manifest. Returns the number of files checked.
std::size_t verify_bundle(const std::filesystem::path& dir);

std::string csv_escape(const std::string& cell);

}  // namespace altar
