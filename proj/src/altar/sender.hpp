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

// Folder ingestion. A folder becomes one run:
//
//   config.json          run config (optional, canonical JSON map)
//   metrics/<name>.csv   metric series, header `step,value[,timestamp]`
//   anything else        data files
//
// Every regular file, including config.json and the CSVs, is also uploaded
// as an artifact named by its '/'-separated relative path.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "altar/json.hpp"

namespace altar {

class ApiClient;

struct FolderFile {
  std::string relative_path;
  std::uint64_t size_bytes = 0;
  std::string sha256;
};

struct IngestPlan {
  std::filesystem::path folder;
  std::string experiment_name;
  Json config = Json::object();
  std::vector<std::string> metric_files;  // relative paths
  std::vector<FolderFile> data_files;
  std::vector<FolderFile> files;          // every regular file, sorted by path
  std::string fingerprint;
};

Json to_json(const IngestPlan& plan);

// SHA-256 over "path\0sha256\n" lines sorted by path.
std::string folder_fingerprint(std::vector<FolderFile> files);

// Raises EmptyFolder, ConfigParseError or IoFailure.
IngestPlan scan_folder(const std::filesystem::path& folder, const std::string& experiment_name);

struct MetricCsv {
  std::string name;
  std::vector<double> steps;
  std::vector<double> values;
  std::vector<std::string> timestamps;  // empty when the column is absent

  // [{name, step, value, timestamp?}, ...] for rows [begin, end).
  Json entries(std::size_t begin, std::size_t end) const;
};

// Raises MetricCsvMalformed on a bad header, a non-numeric or non-finite
// cell, a bad timestamp or a step that does not strictly increase.
MetricCsv parse_metric_csv(const std::filesystem::path& file);

struct IngestResult {
  std::int64_t run_id = 0;
  bool skipped = false;  // an identical COMPLETED run already existed
};

Json to_json(const IngestResult& result);

// Skips when a COMPLETED run carries the same fingerprint. A failure after
// the run exists finishes it as FAILED with a note and raises UploadFailed.
IngestResult ingest(const IngestPlan& plan, ApiClient& client);

}  // namespace altar
