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

#include "altar/run_service.hpp"

#include <cmath>
#include <map>

#include "altar/error.hpp"
#include "altar/filter.hpp"
#include "altar/hash.hpp"

namespace altar {

namespace {

const Json& require_object(const Json& body) {
  if (!body.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return body;
}

double finite_number(const Json& entry, const char* key) {
  auto it = entry.find(key);
  if (it == entry.end() || !it->is_number()) {
    fail(ErrorCode::InvalidArgument, std::string("metric entry needs a numeric '") + key + "'");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteNumber, std::string("non-finite ") + key);
  return v;
}

struct PendingPoint {
  double step;
  double value;
  Timestamp at;
};

}  // namespace

std::string truncate_captured_out(std::string text, std::uint64_t cap) {
  if (text.size() <= cap) return text;
  std::size_t cut = static_cast<std::size_t>(cap);
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  text.resize(cut);
  text += kTruncationMarker;
  return text;
}

RunService::RunService(ServiceConfig config, Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      docs_(config_.data_dir / "db"),
      blobs_(config_.data_dir / "lfs", clock_) {
  if (config_.large_file_threshold_bytes == 0) {
    fail(ErrorCode::InvalidArgument, "large file threshold must be positive");
  }
  blobs_.cleanup_staging();
}

std::mutex& RunService::run_lock(std::int64_t run_id) {
  return run_locks_[static_cast<std::size_t>(run_id) % run_locks_.size()];
}

RunRecord RunService::load_run(std::int64_t run_id) const {
  auto doc = docs_.find("runs", run_id);
  if (!doc) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " not found");
  return run_from_json(*doc);
}

void RunService::store_run(const RunRecord& run) { docs_.update("runs", run.run_id, to_json(run)); }

void RunService::require_running(const RunRecord& run) const {
  if (is_terminal(run.status)) {
    fail(ErrorCode::ImmutableRecord, "run " + std::to_string(run.run_id) + " is " +
                                         std::string(to_string(run.status)));
  }
}

Json RunService::decorate(Json run) const {
  bool stale = false;
  if (run.value("status", std::string()) == "RUNNING") {
    if (auto hb = parse_timestamp(run.value("heartbeat", std::string()))) {
      stale = clock_() - *hb > std::chrono::seconds(config_.heartbeat_stale_secs);
    }
  }
  run["stale"] = stale;
  return run;
}

std::optional<std::int64_t> RunService::metric_doc_id(std::int64_t run_id,
                                                      const std::string& name) const {
  auto ids = docs_.find_ids("metrics", Json{{"run_id", run_id}, {"name", name}});
  if (ids.empty()) return std::nullopt;
  return ids.front();
}

Json RunService::create_run(const Json& body) {
  require_object(body);
  auto name = body.find("experiment_name");
  if (name == body.end() || !name->is_string() || name->get_ref<const std::string&>().empty()) {
    fail(ErrorCode::InvalidArgument, "experiment_name is required");
  }
  const Timestamp now = clock_();

  RunRecord run;
  run.experiment_name = name->get<std::string>();
  run.config = validate_config(body.value("config", Json::object()));
  if (auto host = body.find("host"); host != body.end() && !host->is_null()) {
    run.host = host_from_json(*host);
    if (run.host.captured_at > now + std::chrono::seconds(5)) {
      fail(ErrorCode::InvalidArgument, "host captured_at lies after the run start");
    }
  } else {
    run.host = capture_host(clock_);
  }
  if (auto sources = body.find("sources"); sources != body.end() && !sources->is_null()) {
    if (!sources->is_array()) fail(ErrorCode::InvalidArgument, "sources must be a list");
    for (const auto& s : *sources) {
      if (!s.is_object() || !s.contains("path") || !s["path"].is_string() ||
          !s.contains("sha256") || !s["sha256"].is_string() ||
          !is_sha256_hex(s["sha256"].get<std::string>())) {
        fail(ErrorCode::InvalidArgument, "sources entries need path and sha256");
      }
      run.sources.push_back({s["path"].get<std::string>(), s["sha256"].get<std::string>()});
    }
  }
  if (auto fp = body.find("ingest_fingerprint"); fp != body.end() && !fp->is_null()) {
    if (!fp->is_string() || !is_sha256_hex(fp->get<std::string>())) {
      fail(ErrorCode::InvalidArgument, "ingest_fingerprint must be 64 lowercase hex digits");
    }
    run.ingest_fingerprint = fp->get<std::string>();
  }
  run.status = RunStatus::Running;
  run.start_time = now;
  run.heartbeat = now;
  run.run_id = docs_.allocate_run_id();
  docs_.insert("runs", run.run_id, to_json(run));
  return Json{{"run_id", run.run_id}};
}

Json RunService::log_metrics(std::int64_t run_id, const Json& entries) {
  if (!entries.is_array()) fail(ErrorCode::InvalidArgument, "metrics body must be a list");
  const Timestamp now = clock_();

  std::map<std::string, std::vector<PendingPoint>> batches;
  for (const auto& e : entries) {
    if (!e.is_object()) fail(ErrorCode::InvalidArgument, "metric entries must be maps");
    auto name = e.find("name");
    if (name == e.end() || !name->is_string() || !is_safe_relative_name(name->get<std::string>()) ||
        name->get_ref<const std::string&>().find('/') != std::string::npos) {
      fail(ErrorCode::InvalidArgument, "metric entry needs a plain name");
    }
    PendingPoint p{finite_number(e, "step"), finite_number(e, "value"), now};
    if (auto ts = e.find("timestamp"); ts != e.end() && !ts->is_null()) {
      auto parsed = ts->is_string() ? parse_timestamp(ts->get<std::string>()) : std::nullopt;
      if (!parsed) fail(ErrorCode::InvalidArgument, "bad metric timestamp");
      p.at = *parsed;
    }
    batches[name->get<std::string>()].push_back(p);
  }

  std::lock_guard lock(run_lock(run_id));
  RunRecord run = load_run(run_id);
  require_running(run);

  std::vector<std::pair<std::optional<std::int64_t>, MetricSeries>> updated;
  for (auto& [name, points] : batches) {
    MetricSeries series;
    auto id = metric_doc_id(run_id, name);
    if (id) {
      series = metric_series_from_json(docs_.get("metrics", *id));
    } else {
      series.run_id = run_id;
      series.name = name;
    }
    double last = series.steps.empty() ? -INFINITY : series.steps.back();
    for (const auto& p : points) {
      if (!(p.step > last)) {
        fail(ErrorCode::NonMonotonicStep, "metric '" + name + "': step " + std::to_string(p.step) +
                                              " does not exceed " + std::to_string(last));
      }
      last = p.step;
      series.steps.push_back(p.step);
      series.values.push_back(p.value);
      series.timestamps.push_back(p.at);
    }
    updated.emplace_back(id, std::move(series));
  }

  for (auto& [id, series] : updated) {
    if (id) {
      docs_.update("metrics", *id, to_json(series));
    } else {
      docs_.insert("metrics", to_json(series));
    }
    if (!run.has_metric(series.name)) run.metric_names.push_back(series.name);
  }
  run.heartbeat = now;
  store_run(run);
  return Json{{"accepted", entries.size()}};
}

BlobWriter RunService::begin_upload() { return blobs_.begin_write(); }

ArtifactRef RunService::add_artifact(std::int64_t run_id, const ArtifactUpload& meta,
                                     BlobWriter& staged) {
  if (!is_safe_relative_name(meta.name)) {
    fail(ErrorCode::InvalidArgument, "invalid artifact name '" + meta.name + "'");
  }
  const std::string hash = staged.finish();

  std::lock_guard lock(run_lock(run_id));
  RunRecord run = load_run(run_id);
  require_running(run);
  if (run.find_artifact(meta.name)) {
    fail(ErrorCode::Conflict, "run " + std::to_string(run_id) + " already has artifact '" +
                                  meta.name + "'");
  }

  ArtifactRef ref;
  ref.name = meta.name;
  ref.size_bytes = staged.size();
  ref.content_hash = hash;
  ref.media_type = meta.media_type.empty() ? "application/octet-stream" : meta.media_type;

  if (staged.size() > config_.large_file_threshold_bytes) {
    BlobOwner owner{run_id, run.experiment_name,
                    meta.original_filename.empty() ? meta.name : meta.original_filename,
                    run.config};
    ref.kind = ArtifactKind::Blob;
    ref.blob_uid = blobs_.commit(staged, owner);
  } else {
    ref.kind = ArtifactKind::Inline;
    const std::string bytes = staged.read_all();
    staged.discard();
    docs_.insert("files", Json{{"run_id", run_id},
                               {"name", ref.name},
                               {"media_type", ref.media_type},
                               {"size_bytes", ref.size_bytes},
                               {"content_hash", ref.content_hash},
                               {"data", base64_encode(bytes)}});
  }

  run.artifacts.push_back(ref);
  run.heartbeat = clock_();
  store_run(run);
  return ref;
}

Json RunService::finish_run(std::int64_t run_id, const Json& body) {
  require_object(body);
  auto event_field = body.find("event");
  std::optional<RunEvent> event;
  if (event_field != body.end() && event_field->is_string()) {
    event = parse_run_event(event_field->get<std::string>());
  }
  if (!event) fail(ErrorCode::InvalidArgument, "event must be complete, fail or interrupt");
  std::optional<Json> result;
  if (auto r = body.find("result"); r != body.end()) {
    if (!r->is_primitive()) fail(ErrorCode::InvalidArgument, "result must be a scalar");
    if (r->is_number_float() && !std::isfinite(r->get<double>())) {
      fail(ErrorCode::NonFiniteNumber, "non-finite result");
    }
    result = *r;
  }
  std::optional<std::string> out;
  if (auto c = body.find("captured_out"); c != body.end() && !c->is_null()) {
    if (!c->is_string()) fail(ErrorCode::InvalidArgument, "captured_out must be a string");
    out = truncate_captured_out(c->get<std::string>(), config_.captured_out_cap_bytes);
  }

  std::lock_guard lock(run_lock(run_id));
  RunRecord run = load_run(run_id);
  run.status = transition(run.status, *event);
  run.stop_time = std::max(clock_(), run.start_time);
  if (result) run.result = std::move(result);
  if (out) run.captured_out = std::move(*out);
  store_run(run);
  return decorate(to_json(run));
}

Json RunService::heartbeat(std::int64_t run_id) {
  std::lock_guard lock(run_lock(run_id));
  RunRecord run = load_run(run_id);
  require_running(run);
  run.heartbeat = std::max(clock_(), run.start_time);
  store_run(run);
  return Json{{"heartbeat", format_timestamp(run.heartbeat)}};
}

Json RunService::query_runs(const Json& filter, const std::vector<SortKey>& sort,
                            std::uint64_t skip, std::uint64_t limit) const {
  QueryResult r = docs_.query("runs", filter, sort, skip, limit);
  Json runs = Json::array();
  for (auto& rec : r.page) runs.push_back(decorate(std::move(rec.doc)));
  return Json{{"total", r.total_matched}, {"runs", std::move(runs)}};
}

Json RunService::get_run(std::int64_t run_id) const {
  auto doc = docs_.find("runs", run_id);
  if (!doc) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " not found");
  return decorate(std::move(*doc));
}

Json RunService::get_metric(std::int64_t run_id, const std::string& name) const {
  if (!docs_.find("runs", run_id)) {
    fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " not found");
  }
  auto id = metric_doc_id(run_id, name);
  if (!id) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " has no metric '" + name + "'");
  return docs_.get("metrics", *id);
}

ArtifactDownload RunService::open_artifact(std::int64_t run_id, const std::string& name) const {
  const RunRecord run = load_run(run_id);
  const ArtifactRef* ref = run.find_artifact(name);
  if (!ref) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " has no artifact '" + name + "'");
  ArtifactDownload d;
  d.ref = *ref;
  if (ref->kind == ArtifactKind::Blob) {
    d.stream = blobs_.get(*ref->blob_uid).stream;
  } else {
    auto ids = docs_.find_ids("files", Json{{"run_id", run_id}, {"name", name}});
    if (ids.empty()) fail(ErrorCode::NotFound, "inline content of '" + name + "' missing");
    d.inline_bytes = base64_decode(docs_.get("files", ids.front()).at("data").get<std::string>());
  }
  return d;
}

BlobRead RunService::open_blob(const std::string& uid, bool verify) const {
  if (!is_sha256_hex(uid)) fail(ErrorCode::NotFound, "blob " + uid + " not found");
  return blobs_.get(uid, verify);
}

Json RunService::list_experiments() const {
  std::map<std::string, std::uint64_t> counts;
  docs_.for_each("runs", [&](std::int64_t, const Json& doc) {
    if (const Json* name = resolve_path(doc, "experiment.name"); name && name->is_string()) {
      ++counts[name->get<std::string>()];
    }
  });
  Json out = Json::array();
  for (const auto& [name, n] : counts) out.push_back({{"name", name}, {"run_count", n}});
  return out;
}

Json RunService::annotate(std::int64_t run_id, const Json& body) {
  require_object(body);
  Annotation a;
  a.run_id = run_id;
  a.author = body.value("author", std::string());
  if (a.author.empty()) fail(ErrorCode::InvalidArgument, "author is required");
  if (auto tags = body.find("tags"); tags != body.end() && !tags->is_null()) {
    if (!tags->is_array()) fail(ErrorCode::InvalidArgument, "tags must be a list of strings");
    for (const auto& t : *tags) {
      if (!t.is_string()) fail(ErrorCode::InvalidArgument, "tags must be a list of strings");
      a.tags.push_back(t.get<std::string>());
    }
  }
  if (auto note = body.find("note"); note != body.end() && !note->is_null()) {
    if (!note->is_string()) fail(ErrorCode::InvalidArgument, "note must be a string");
    a.note = note->get<std::string>();
  }
  if (!docs_.find("runs", run_id)) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " not found");
  a.created_at = clock_();
  a.annotation_id = docs_.allocate_id("annotations");
  const Json doc = to_json(a);
  docs_.insert("annotations", a.annotation_id, doc);
  return doc;
}

Json RunService::list_annotations(std::int64_t run_id) const {
  if (!docs_.find("runs", run_id)) fail(ErrorCode::NotFound, "run " + std::to_string(run_id) + " not found");
  Json out = Json::array();
  for (auto id : docs_.find_ids("annotations", Json{{"run_id", run_id}})) {
    out.push_back(docs_.get("annotations", id));
  }
  return out;
}

IntegrityReport RunService::check_integrity() const { return scan_integrity(blobs_, docs_); }

}  // namespace altar
