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

#include "altar/extractor.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "altar/api_client.hpp"
#include "altar/error.hpp"
#include "altar/hash.hpp"
#include "altar/model.hpp"
#include "altar/time.hpp"
#include "altar/version.hpp"

namespace altar {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPageSize = 1000;

[[noreturn]] void write_failure(const fs::path& path) {
  const int err = errno;
  fail(err == ENOSPC || err == EDQUOT ? ErrorCode::StorageFull : ErrorCode::IoFailure,
       "cannot write " + path.string() + ": " + std::strerror(err));
}

void write_file(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) write_failure(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) write_failure(path);
}

std::string cell_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string run_base(const Json& run) { return "/api/runs/" + std::to_string(run.at("run_id").get<std::int64_t>()); }

Json manifest_without_hash(Json manifest) {
  manifest.erase("manifest_sha256");
  return manifest;
}

}  // namespace

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<Json> fetch_runs(ApiClient& client, const FilterExpr& expr) {
  const CompiledFilter compiled = compile_filter(expr);
  const Json* server_filter = std::get_if<Json>(&compiled);
  const Json filter = server_filter ? *server_filter : Json::object();

  std::vector<Json> runs;
  for (std::uint64_t skip = 0;; skip += kPageSize) {
    const Json page = client.query_runs(filter, "run_id", skip, kPageSize);
    for (const auto& run : page.at("runs")) {
      if (!server_filter) {
        Json stored = run;
        stored.erase("stale");
        if (!std::get<ResidualPredicate>(compiled)(stored)) continue;
      }
      runs.push_back(run);
    }
    if (page.at("runs").size() < kPageSize) break;
  }
  return runs;
}

void write_runs_jsonl(const std::vector<Json>& runs, std::ostream& out) {
  for (const auto& run : runs) out << canonical_json(run) << '\n';
}

void write_runs_csv(const std::vector<Json>& runs, std::ostream& out) {
  std::vector<std::map<std::string, std::string>> rows;
  std::set<std::string> columns = {"experiment_name", "result", "run_id", "start_time", "status"};
  for (const auto& run : runs) {
    std::map<std::string, std::string> row;
    row["run_id"] = cell_text(run.at("run_id"));
    row["experiment_name"] = cell_text(run.at("experiment").at("name"));
    row["status"] = cell_text(run.at("status"));
    row["start_time"] = cell_text(run.at("start_time"));
    if (auto r = run.find("result"); r != run.end()) row["result"] = cell_text(*r);
    for (const auto& [path, value] : flatten_paths(run.value("config", Json::object()))) {
      const std::string column = "config." + path;
      columns.insert(column);
      row[column] = cell_text(value);
    }
    rows.push_back(std::move(row));
  }

  bool first = true;
  for (const auto& c : columns) {
    out << (first ? "" : ",") << csv_escape(c);
    first = false;
  }
  out << "\r\n";
  for (const auto& row : rows) {
    first = true;
    for (const auto& c : columns) {
      out << (first ? "" : ",");
      if (auto it = row.find(c); it != row.end()) out << csv_escape(it->second);
      first = false;
    }
    out << "\r\n";
  }
}

std::uint64_t export_runs(ApiClient& client, const FilterExpr& expr, ExportFormat format,
                          std::ostream& out) {
  const auto runs = fetch_runs(client, expr);
  if (format == ExportFormat::Csv) {
    write_runs_csv(runs, out);
  } else {
    write_runs_jsonl(runs, out);
  }
  out.flush();
  if (!out) fail(ErrorCode::IoFailure, "export output failed");
  return runs.size();
}

fs::path export_bundle(ApiClient& client, const FilterExpr& expr, const fs::path& out_dir) {
  std::error_code ec;
  if (fs::exists(out_dir, ec) && !fs::is_empty(out_dir, ec)) {
    fail(ErrorCode::InvalidArgument, out_dir.string() + " is not empty");
  }
  fs::create_directories(out_dir);

  const auto runs = fetch_runs(client, expr);
  Json files = Json::array();
  auto record = [&](const std::string& rel, std::uint64_t size, const std::string& sha) {
    files.push_back({{"path", rel}, {"size_bytes", size}, {"sha256", sha}});
  };
  auto emit = [&](const std::string& rel, const std::string& bytes) {
    write_file(out_dir / rel, bytes);
    record(rel, bytes.size(), sha256_hex(bytes));
  };

  std::ostringstream runs_text;
  write_runs_jsonl(runs, runs_text);
  emit("runs.jsonl", runs_text.str());

  std::string annotations;
  for (const auto& run : runs) {
    const std::string id = std::to_string(run.at("run_id").get<std::int64_t>());
    const std::string base = run_base(run);

    for (const auto& name_json : run.value("metric_names", Json::array())) {
      const auto name = name_json.get<std::string>();
      if (!is_safe_relative_name(name) || name.find('/') != std::string::npos) {
        fail(ErrorCode::InvalidArgument, "metric name '" + name + "' cannot be exported as a file");
      }
      const Json series = client.get_json(base + "/metrics/" + encode_path(name));
      const auto& steps = series.at("steps");
      const auto& values = series.at("values");
      const auto& stamps = series.at("timestamps");
      std::string csv = "step,value,timestamp\r\n";
      for (std::size_t i = 0; i < steps.size(); ++i) {
        csv += steps[i].dump() + "," + values[i].dump() + "," +
               (i < stamps.size() ? stamps[i].get<std::string>() : std::string()) + "\r\n";
      }
      emit("metrics/" + id + "/" + name + ".csv", csv);
    }

    for (const auto& art : run.value("artifacts", Json::array())) {
      const ArtifactRef ref = artifact_from_json(art);
      if (!is_safe_relative_name(ref.name)) {
        fail(ErrorCode::InvalidArgument, "artifact name '" + ref.name + "' cannot be exported as a file");
      }
      const std::string rel = "artifacts/" + id + "/" + ref.name;
      const fs::path target = out_dir / rel;
      fs::create_directories(target.parent_path());
      std::ofstream out(target, std::ios::binary | std::ios::trunc);
      if (!out) write_failure(target);
      Sha256 hasher;
      const std::string path = ref.blob_uid ? "/api/blobs/" + *ref.blob_uid + "?verify=1"
                                            : base + "/artifacts/" + encode_path(ref.name);
      const auto size = client.download(path, [&](const char* data, std::size_t n) {
        hasher.update(std::string_view(data, n));
        out.write(data, static_cast<std::streamsize>(n));
      });
      out.flush();
      if (!out) write_failure(target);
      const std::string sha = hasher.hex_digest();
      if (sha != ref.content_hash || size != ref.size_bytes) {
        fail(ErrorCode::ChecksumMismatch, rel + ": downloaded bytes do not match the stored hash");
      }
      record(rel, size, sha);
    }

    for (const auto& note : client.get_json(base + "/annotations")) {
      annotations += canonical_json(note) + "\n";
    }
  }
  emit("annotations.jsonl", annotations);

  Json manifest{{"files", std::move(files)},
                {"tool_version", kVersion},
                {"exported_at", format_timestamp(system_now())}};
  manifest["manifest_sha256"] = sha256_hex(canonical_json(manifest));
  const fs::path manifest_path = out_dir / "manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");

  verify_bundle(out_dir);
  return manifest_path;
}

std::size_t verify_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) fail(ErrorCode::ChecksumMismatch, "manifest.json: missing or unreadable");
  std::stringstream text;
  text << in.rdbuf();

  Json manifest;
  try {
    manifest = Json::parse(text.str());
  } catch (const Json::exception&) {
    fail(ErrorCode::ChecksumMismatch, "manifest.json: not valid JSON");
  }
  if (!manifest.is_object() || !manifest.contains("files") || !manifest["files"].is_array() ||
      !manifest.value("manifest_sha256", Json()).is_string() ||
      manifest["manifest_sha256"].get<std::string>() !=
          sha256_hex(canonical_json(manifest_without_hash(manifest)))) {
    fail(ErrorCode::ChecksumMismatch, "manifest.json: content does not match its recorded hash");
  }

  std::size_t checked = 0;
  for (const auto& entry : manifest["files"]) {
    const auto rel = entry.at("path").get<std::string>();
    if (!is_safe_relative_name(rel)) fail(ErrorCode::ChecksumMismatch, rel + ": unsafe path in manifest");
    const fs::path file = dir / rel;
    std::error_code ec;
    const auto size = fs::file_size(file, ec);
    if (ec) fail(ErrorCode::ChecksumMismatch, rel + ": missing");
    if (size != entry.at("size_bytes").get<std::uint64_t>() ||
        sha256_file(file) != entry.at("sha256").get<std::string>()) {
      fail(ErrorCode::ChecksumMismatch, rel + ": content differs from manifest");
    }
    ++checked;
  }
  return checked;
}

}  // namespace altar
