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

// Run lifecycle, metric logging, artifact routing and read access on top of
// the document and blob stores. HttpServer is a thin adapter over this class.
//
// Data directory layout:
//   <data_dir>/db   document store journals
//   <data_dir>/lfs  blob store

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "altar/blob_store.hpp"
#include "altar/doc_store.hpp"
#include "altar/json.hpp"
#include "altar/model.hpp"
#include "altar/time.hpp"

namespace altar {

// Files strictly larger than this go to the blob store (25 MiB).
inline constexpr std::uint64_t kDefaultLargeFileThreshold = 26'214'400;

inline constexpr std::string_view kTruncationMarker = "\n[captured_out truncated]\n";

struct ServiceConfig {
  std::string listen_address = "127.0.0.1:8080";
  std::filesystem::path data_dir = "altar-data";
  std::uint64_t large_file_threshold_bytes = kDefaultLargeFileThreshold;
  std::optional<std::string> auth_token;
  std::uint32_t heartbeat_stale_secs = 120;
  std::uint64_t captured_out_cap_bytes = 1u << 20;
  // Static viewer files served under "/" when set.
  std::filesystem::path ui_dir;
};

struct ArtifactUpload {
  std::string name;
  std::string media_type = "application/octet-stream";
  std::string original_filename;
};

struct ArtifactDownload {
  ArtifactRef ref;
  std::string inline_bytes;
  std::unique_ptr<std::istream> stream;  // set for BLOB artifacts
};

// Cuts `text` to at most `cap` bytes on a UTF-8 boundary and appends
// kTruncationMarker; shorter text is returned unchanged.
std::string truncate_captured_out(std::string text, std::uint64_t cap);

class RunService {
 public:
  explicit RunService(ServiceConfig config, Clock clock = system_now);

  const ServiceConfig& config() const { return config_; }

  // {experiment_name, config?, host?, sources?, ingest_fingerprint?}
  // -> {"run_id": N}
  Json create_run(const Json& body);

  // [{name, step, value, timestamp?}, ...] -> {"accepted": n}. The batch is
  // rejected as a whole when any step does not strictly increase.
  Json log_metrics(std::int64_t run_id, const Json& entries);

  BlobWriter begin_upload();

  // Routes the staged bytes: larger than the threshold -> blob store,
  // otherwise inline (base64) in the `files` collection.
  ArtifactRef add_artifact(std::int64_t run_id, const ArtifactUpload& meta, BlobWriter& staged);

  // {event: complete|fail|interrupt, result?, captured_out?}
  Json finish_run(std::int64_t run_id, const Json& body);

  Json heartbeat(std::int64_t run_id);

  // {"total": n, "runs": [...]}, each run carrying a derived `stale` flag.
  Json query_runs(const Json& filter, const std::vector<SortKey>& sort, std::uint64_t skip,
                  std::uint64_t limit) const;

  Json get_run(std::int64_t run_id) const;
  Json get_metric(std::int64_t run_id, const std::string& name) const;
  ArtifactDownload open_artifact(std::int64_t run_id, const std::string& name) const;
  BlobRead open_blob(const std::string& uid, bool verify) const;
  Json list_experiments() const;

  // Annotations are the only writes accepted on terminal runs; they live in
  // their own collection and never touch the run document.
  Json annotate(std::int64_t run_id, const Json& body);
  Json list_annotations(std::int64_t run_id) const;

  IntegrityReport check_integrity() const;

  DocStore& docs() { return docs_; }
  BlobStore& blobs() { return blobs_; }

 private:
  std::mutex& run_lock(std::int64_t run_id);
  RunRecord load_run(std::int64_t run_id) const;
  void store_run(const RunRecord& run);
  void require_running(const RunRecord& run) const;
  Json decorate(Json run) const;
  std::optional<std::int64_t> metric_doc_id(std::int64_t run_id, const std::string& name) const;

  ServiceConfig config_;
  Clock clock_;
  DocStore docs_;
  BlobStore blobs_;
  std::array<std::mutex, 64> run_locks_;
};

}  // namespace altar
