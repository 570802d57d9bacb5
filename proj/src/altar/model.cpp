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

#include "altar/model.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "altar/error.hpp"
#include "altar/hash.hpp"

namespace altar {

namespace {

void check_node(Json& node, int depth, int max_depth, const std::string& where) {
  switch (node.type()) {
    case Json::value_t::object:
    case Json::value_t::array:
      if (depth + 1 > max_depth) {
        fail(ErrorCode::DepthExceeded,
             "nesting deeper than " + std::to_string(max_depth) + " at '" + where + "'");
      }
      break;
    case Json::value_t::number_float:
      if (!std::isfinite(node.get<double>())) {
        fail(ErrorCode::NonFiniteNumber, "non-finite number at '" + where + "'");
      }
      return;
    case Json::value_t::number_unsigned: {
      const auto u = node.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        fail(ErrorCode::NonFiniteNumber, "integer out of int64 range at '" + where + "'");
      }
      node = static_cast<std::int64_t>(u);
      return;
    }
    case Json::value_t::binary:
    case Json::value_t::discarded:
      fail(ErrorCode::InvalidArgument, "unsupported value at '" + where + "'");
    default:
      return;
  }

  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string& key = it.key();
      if (key.empty() || key.find('.') != std::string::npos || key.front() == '$') {
        fail(ErrorCode::KeyInvalid, "invalid key '" + key + "' under '" + where + "'");
      }
      check_node(it.value(), depth + 1, max_depth, where.empty() ? key : where + "." + key);
    }
  } else {
    std::size_t i = 0;
    for (auto& child : node) {
      const std::string idx = std::to_string(i++);
      check_node(child, depth + 1, max_depth, where.empty() ? idx : where + "." + idx);
    }
  }
}

void flatten_into(const Json& node, const std::string& prefix, std::vector<FlatLeaf>& out) {
  auto child_path = [&](const std::string& seg) {
    return prefix.empty() ? seg : prefix + "." + seg;
  };
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      flatten_into(it.value(), child_path(it.key()), out);
    }
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      flatten_into(node[i], child_path(std::to_string(i)), out);
    }
  } else if (!prefix.empty()) {
    out.emplace_back(prefix, node);
  }
}

std::string string_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    fail(ErrorCode::InvalidArgument, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::int64_t int_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    fail(ErrorCode::InvalidArgument, std::string("missing integer field '") + key + "'");
  }
  return it->get<std::int64_t>();
}

Timestamp time_field(const Json& j, const char* key) {
  auto t = parse_timestamp(string_field(j, key));
  if (!t) fail(ErrorCode::InvalidArgument, std::string("bad timestamp in '") + key + "'");
  return *t;
}

std::string uname_field(std::string (*pick)(const utsname&)) {
  utsname u{};
  if (uname(&u) != 0) return "unknown";
  std::string v = pick(u);
  return v.empty() ? "unknown" : v;
}

}  // namespace

Json validate_config(const Json& raw, int max_depth) {
  if (!raw.is_object()) fail(ErrorCode::InvalidArgument, "configuration must be a map");
  Json copy = raw;
  check_node(copy, 0, max_depth, "");
  try {
    (void)copy.dump();
  } catch (const Json::type_error&) {
    fail(ErrorCode::InvalidArgument, "string is not valid UTF-8");
  }
  return copy;
}

int tree_depth(const Json& node) {
  if (!node.is_structured()) return 0;
  int deepest = 0;
  for (const auto& child : node) deepest = std::max(deepest, tree_depth(child));
  return deepest + 1;
}

bool is_scalar(const Json& node) { return node.is_primitive(); }

std::vector<FlatLeaf> flatten_paths(const Json& config) {
  std::vector<FlatLeaf> out;
  flatten_into(config, "", out);
  // Depth-first order already sorts keys within a level; a full sort also
  // orders list indices >= 10 and keys containing bytes below '.'.
  std::sort(out.begin(), out.end(),
            [](const FlatLeaf& a, const FlatLeaf& b) { return a.first < b.first; });
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Running: return "RUNNING";
    case RunStatus::Completed: return "COMPLETED";
    case RunStatus::Failed: return "FAILED";
    case RunStatus::Interrupted: return "INTERRUPTED";
  }
  return "RUNNING";
}

std::string_view to_string(RunEvent event) {
  switch (event) {
    case RunEvent::Complete: return "complete";
    case RunEvent::Fail: return "fail";
    case RunEvent::Interrupt: return "interrupt";
  }
  return "complete";
}

std::optional<RunStatus> parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::Running, RunStatus::Completed, RunStatus::Failed,
                 RunStatus::Interrupted}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<RunEvent> parse_run_event(std::string_view text) {
  for (auto e : {RunEvent::Complete, RunEvent::Fail, RunEvent::Interrupt}) {
    if (to_string(e) == text) return e;
  }
  return std::nullopt;
}

RunStatus transition(RunStatus current, RunEvent event) {
  if (is_terminal(current)) {
    fail(ErrorCode::IllegalTransition,
         "run is " + std::string(to_string(current)) + "; '" +
             std::string(to_string(event)) + "' not allowed");
  }
  switch (event) {
    case RunEvent::Complete: return RunStatus::Completed;
    case RunEvent::Fail: return RunStatus::Failed;
    case RunEvent::Interrupt: return RunStatus::Interrupted;
  }
  return current;
}

// ---------------------------------------------------------------------------

HostInfo capture_host(const Clock& clock) {
  HostInfo h;
  char name[256] = {};
  if (gethostname(name, sizeof name - 1) == 0 && name[0] != '\0') {
    h.hostname = name;
  } else {
    h.hostname = "unknown";
  }
  h.os_name = uname_field([](const utsname& u) { return std::string(u.sysname); });
  h.os_version = uname_field([](const utsname& u) { return std::string(u.release); });
#if defined(__VERSION__)
  h.runtime_version = std::string("C++") + std::to_string(__cplusplus) + " " + __VERSION__;
#else
  h.runtime_version = std::string("C++") + std::to_string(__cplusplus);
#endif
  h.captured_at = clock();
  return h;
}

const ArtifactRef* RunRecord::find_artifact(std::string_view name) const {
  for (const auto& a : artifacts) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

bool RunRecord::has_metric(std::string_view name) const {
  return std::find(metric_names.begin(), metric_names.end(), name) != metric_names.end();
}

std::string_view to_string(ArtifactKind kind) {
  return kind == ArtifactKind::Blob ? "BLOB" : "INLINE";
}

bool is_safe_relative_name(std::string_view name) {
  if (name.empty() || name.front() == '/') return false;
  if (name.find('\0') != std::string_view::npos || name.find('\\') != std::string_view::npos) {
    return false;
  }
  std::size_t start = 0;
  while (start <= name.size()) {
    auto end = name.find('/', start);
    if (end == std::string_view::npos) end = name.size();
    const auto seg = name.substr(start, end - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    start = end + 1;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON conversions

Json to_json(const HostInfo& host) {
  return Json{{"hostname", host.hostname},
              {"os_name", host.os_name},
              {"os_version", host.os_version},
              {"runtime_version", host.runtime_version},
              {"captured_at", format_timestamp(host.captured_at)}};
}

Json to_json(const ArtifactRef& ref) {
  Json j{{"name", ref.name},
         {"kind", to_string(ref.kind)},
         {"size_bytes", ref.size_bytes},
         {"content_hash", ref.content_hash},
         {"media_type", ref.media_type}};
  if (ref.blob_uid) j["blob_uid"] = *ref.blob_uid;
  return j;
}

Json to_json(const RunRecord& run) {
  Json artifacts = Json::array();
  for (const auto& a : run.artifacts) artifacts.push_back(to_json(a));
  Json sources = Json::array();
  for (const auto& s : run.sources) sources.push_back({{"path", s.path}, {"sha256", s.sha256}});
  Json j{{"run_id", run.run_id},
         {"experiment", {{"name", run.experiment_name}}},
         {"config", run.config},
         {"host", to_json(run.host)},
         {"status", to_string(run.status)},
         {"start_time", format_timestamp(run.start_time)},
         {"heartbeat", format_timestamp(run.heartbeat)},
         {"captured_out", run.captured_out},
         {"artifacts", std::move(artifacts)},
         {"metric_names", run.metric_names},
         {"sources", std::move(sources)}};
  if (run.stop_time) j["stop_time"] = format_timestamp(*run.stop_time);
  if (run.result) j["result"] = *run.result;
  if (run.ingest_fingerprint) j["ingest_fingerprint"] = *run.ingest_fingerprint;
  return j;
}

Json to_json(const MetricSeries& series) {
  Json stamps = Json::array();
  for (auto t : series.timestamps) stamps.push_back(format_timestamp(t));
  return Json{{"run_id", series.run_id},
              {"name", series.name},
              {"steps", series.steps},
              {"values", series.values},
              {"timestamps", std::move(stamps)}};
}

Json to_json(const Annotation& note) {
  return Json{{"annotation_id", note.annotation_id},
              {"run_id", note.run_id},
              {"author", note.author},
              {"created_at", format_timestamp(note.created_at)},
              {"tags", note.tags},
              {"note", note.note}};
}

HostInfo host_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "host must be a map");
  HostInfo h;
  h.hostname = string_field(j, "hostname");
  h.os_name = string_field(j, "os_name");
  h.os_version = string_field(j, "os_version");
  h.runtime_version = string_field(j, "runtime_version");
  h.captured_at = time_field(j, "captured_at");
  if (h.hostname.empty() || h.os_name.empty() || h.os_version.empty() ||
      h.runtime_version.empty()) {
    fail(ErrorCode::InvalidArgument, "host fields must be non-empty");
  }
  return h;
}

ArtifactRef artifact_from_json(const Json& j) {
  ArtifactRef a;
  a.name = string_field(j, "name");
  const auto kind = string_field(j, "kind");
  if (kind == "BLOB") {
    a.kind = ArtifactKind::Blob;
  } else if (kind == "INLINE") {
    a.kind = ArtifactKind::Inline;
  } else {
    fail(ErrorCode::InvalidArgument, "unknown artifact kind '" + kind + "'");
  }
  auto size = j.find("size_bytes");
  if (size == j.end() || !size->is_number_integer() || size->get<std::int64_t>() < 0) {
    fail(ErrorCode::InvalidArgument, "missing size_bytes");
  }
  a.size_bytes = size->get<std::uint64_t>();
  a.content_hash = string_field(j, "content_hash");
  a.media_type = string_field(j, "media_type");
  if (auto uid = j.find("blob_uid"); uid != j.end()) a.blob_uid = uid->get<std::string>();
  if ((a.kind == ArtifactKind::Blob) != a.blob_uid.has_value()) {
    fail(ErrorCode::InvalidArgument, "blob_uid must be present iff kind is BLOB");
  }
  return a;
}

RunRecord run_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "run must be a map");
  RunRecord r;
  r.run_id = int_field(j, "run_id");
  auto exp = j.find("experiment");
  if (exp == j.end() || !exp->is_object()) fail(ErrorCode::InvalidArgument, "missing experiment");
  r.experiment_name = string_field(*exp, "name");
  r.config = j.value("config", Json::object());
  r.host = host_from_json(j.at("host"));
  auto status = parse_run_status(string_field(j, "status"));
  if (!status) fail(ErrorCode::InvalidArgument, "unknown run status");
  r.status = *status;
  r.start_time = time_field(j, "start_time");
  r.heartbeat = time_field(j, "heartbeat");
  if (j.contains("stop_time")) r.stop_time = time_field(j, "stop_time");
  if (auto res = j.find("result"); res != j.end()) r.result = *res;
  r.captured_out = j.value("captured_out", std::string());
  for (const auto& a : j.value("artifacts", Json::array())) r.artifacts.push_back(artifact_from_json(a));
  for (const auto& m : j.value("metric_names", Json::array())) r.metric_names.push_back(m.get<std::string>());
  if (auto fp = j.find("ingest_fingerprint"); fp != j.end()) r.ingest_fingerprint = fp->get<std::string>();
  for (const auto& s : j.value("sources", Json::array())) {
    r.sources.push_back({string_field(s, "path"), string_field(s, "sha256")});
  }
  return r;
}

MetricSeries metric_series_from_json(const Json& j) {
  MetricSeries m;
  m.run_id = int_field(j, "run_id");
  m.name = string_field(j, "name");
  m.steps = j.at("steps").get<std::vector<double>>();
  m.values = j.at("values").get<std::vector<double>>();
  for (const auto& t : j.at("timestamps")) {
    auto ts = parse_timestamp(t.get<std::string>());
    if (!ts) fail(ErrorCode::InvalidArgument, "bad metric timestamp");
    m.timestamps.push_back(*ts);
  }
  if (m.steps.size() != m.values.size() || m.steps.size() != m.timestamps.size()) {
    fail(ErrorCode::InvalidArgument, "metric columns differ in length");
  }
  return m;
}

Annotation annotation_from_json(const Json& j) {
  Annotation a;
  a.annotation_id = int_field(j, "annotation_id");
  a.run_id = int_field(j, "run_id");
  a.author = string_field(j, "author");
  a.created_at = time_field(j, "created_at");
  a.tags = j.value("tags", std::vector<std::string>{});
  a.note = j.value("note", std::string());
  return a;
}

}  // namespace altar
