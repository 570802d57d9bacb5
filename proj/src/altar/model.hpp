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

// Run data model: configuration trees, run records, metric series,
// artifacts and annotations, plus the run status state machine.
//
// Every type here converts to and from canonical JSON. A RunRecord nests its
// experiment name under `experiment.name` so that stored run documents can be
// addressed with the same dotted paths users query with.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "altar/json.hpp"
#include "altar/time.hpp"

namespace altar {

inline constexpr int kMaxConfigDepth = 32;

// Stored documents wrap a config a couple of levels down (run.config,
// manifest.owners[i].config_snapshot), so the store allows some headroom.
inline constexpr int kMaxDocumentDepth = kMaxConfigDepth + 4;

// Checks a configuration tree and returns its normalized copy: unsigned
// integers become signed 64-bit, everything else is kept verbatim.
//
// Rejects keys that are empty, contain '.', or start with '$' (KeyInvalid),
// trees nested deeper than max_depth containers (DepthExceeded), non-finite
// floats or integers outside int64 (NonFiniteNumber), and strings that are not
// valid UTF-8 (InvalidArgument).
Json validate_config(const Json& raw, int max_depth = kMaxConfigDepth);

// Container nesting depth; scalars are 0, `{}` is 1.
int tree_depth(const Json& node);

bool is_scalar(const Json& node);

using FlatLeaf = std::pair<std::string, Json>;

// Every scalar leaf of the tree with its dotted path; list elements are
// addressed by index. Sorted by path (byte order), paths unique.
std::vector<FlatLeaf> flatten_paths(const Json& config);

// ---------------------------------------------------------------------------

enum class RunStatus { Running, Completed, Failed, Interrupted };
enum class RunEvent { Complete, Fail, Interrupt };

std::string_view to_string(RunStatus status);
std::string_view to_string(RunEvent event);
std::optional<RunStatus> parse_run_status(std::string_view text);
std::optional<RunEvent> parse_run_event(std::string_view text);

constexpr bool is_terminal(RunStatus s) { return s != RunStatus::Running; }

// RUNNING -> COMPLETED | FAILED | INTERRUPTED. Terminal states are frozen and
// every event on them raises IllegalTransition.
RunStatus transition(RunStatus current, RunEvent event);

// ---------------------------------------------------------------------------

struct HostInfo {
  std::string hostname;
  std::string os_name;
  std::string os_version;
  std::string runtime_version;
  Timestamp captured_at{};

  bool operator==(const HostInfo&) const = default;
};

// Reads uname(2)/gethostname(2); fields that cannot be read become "unknown".
HostInfo capture_host(const Clock& clock = system_now);

enum class ArtifactKind { Inline, Blob };

struct ArtifactRef {
  std::string name;
  ArtifactKind kind = ArtifactKind::Inline;
  std::uint64_t size_bytes = 0;
  std::string content_hash;
  std::optional<std::string> blob_uid;
  std::string media_type;

  bool operator==(const ArtifactRef&) const = default;
};

struct SourceFile {
  std::string path;
  std::string sha256;

  bool operator==(const SourceFile&) const = default;
};

struct RunRecord {
  std::int64_t run_id = 0;
  std::string experiment_name;
  Json config = Json::object();
  HostInfo host;
  RunStatus status = RunStatus::Running;
  Timestamp start_time{};
  std::optional<Timestamp> stop_time;
  Timestamp heartbeat{};
  std::optional<Json> result;
  std::string captured_out;
  std::vector<ArtifactRef> artifacts;
  std::vector<std::string> metric_names;
  std::optional<std::string> ingest_fingerprint;
  std::vector<SourceFile> sources;

  const ArtifactRef* find_artifact(std::string_view name) const;
  bool has_metric(std::string_view name) const;
};

struct MetricSeries {
  std::int64_t run_id = 0;
  std::string name;
  std::vector<double> steps;
  std::vector<double> values;
  std::vector<Timestamp> timestamps;
};

struct Annotation {
  std::int64_t annotation_id = 0;
  std::int64_t run_id = 0;
  std::string author;
  Timestamp created_at{};
  std::vector<std::string> tags;
  std::string note;
};

Json to_json(const HostInfo& host);
Json to_json(const ArtifactRef& ref);
Json to_json(const RunRecord& run);
Json to_json(const MetricSeries& series);
Json to_json(const Annotation& note);

// The from_json family raises InvalidArgument on shape or invariant
// violations.
HostInfo host_from_json(const Json& j);
ArtifactRef artifact_from_json(const Json& j);
RunRecord run_from_json(const Json& j);
MetricSeries metric_series_from_json(const Json& j);
Annotation annotation_from_json(const Json& j);

std::string_view to_string(ArtifactKind kind);

// Names that become path components on export: non-empty, no NUL or
// backslash, not absolute, and no empty, "." or ".." segments.
bool is_safe_relative_name(std::string_view name);

}  // namespace altar
