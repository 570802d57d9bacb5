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

#include "altar/sender.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "altar/api_client.hpp"
#include "altar/error.hpp"
#include "altar/hash.hpp"
#include "altar/model.hpp"
#include "altar/time.hpp"

namespace altar {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMetricBatch = 5000;

bool is_metric_path(const std::string& rel) {
  return rel.rfind("metrics/", 0) == 0 && rel.find('/', 8) == std::string::npos &&
         rel.size() > 12 && rel.compare(rel.size() - 4, 4, ".csv") == 0;
}

std::string media_type_for(const std::string& rel) {
  const auto ext = fs::path(rel).extension().string();
  if (ext == ".json") return "application/json";
  if (ext == ".csv") return "text/csv";
  if (ext == ".txt" || ext == ".log") return "text/plain";
  return "application/octet-stream";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

[[noreturn]] void malformed(const fs::path& file, std::size_t line, const std::string& why) {
  fail(ErrorCode::MetricCsvMalformed, file.string() + ":" + std::to_string(line) + ": " + why);
}

double parse_cell(const std::string& cell, const fs::path& file, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    malformed(file, line, "'" + cell + "' is not a finite number");
  }
  return v;
}

}  // namespace

Json to_json(const IngestPlan& plan) {
  Json data = Json::array();
  for (const auto& f : plan.data_files) {
    data.push_back({{"path", f.relative_path}, {"size_bytes", f.size_bytes}, {"sha256", f.sha256}});
  }
  return Json{{"folder", plan.folder.string()},
              {"experiment_name", plan.experiment_name},
              {"config", plan.config},
              {"metric_files", plan.metric_files},
              {"data_files", std::move(data)},
              {"fingerprint", plan.fingerprint}};
}

std::string folder_fingerprint(std::vector<FolderFile> files) {
  std::sort(files.begin(), files.end(),
            [](const FolderFile& a, const FolderFile& b) { return a.relative_path < b.relative_path; });
  Sha256 h;
  for (const auto& f : files) {
    h.update(f.relative_path);
    h.update(std::string_view("\0", 1));
    h.update(f.sha256);
    h.update("\n");
  }
  return h.hex_digest();
}

IngestPlan scan_folder(const fs::path& folder, const std::string& experiment_name) {
  std::error_code ec;
  if (!fs::is_directory(folder, ec)) fail(ErrorCode::IoFailure, folder.string() + " is not a readable directory");

  IngestPlan plan;
  plan.folder = folder;
  plan.experiment_name = experiment_name;

  fs::recursive_directory_iterator it(folder, ec), end;
  if (ec) fail(ErrorCode::IoFailure, "cannot read " + folder.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) fail(ErrorCode::IoFailure, "cannot read " + folder.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    FolderFile f;
    f.relative_path = fs::relative(it->path(), folder).generic_string();
    f.size_bytes = it->file_size();
    f.sha256 = sha256_file(it->path());
    plan.files.push_back(std::move(f));
  }
  if (plan.files.empty()) fail(ErrorCode::EmptyFolder, folder.string() + " contains no files");
  std::sort(plan.files.begin(), plan.files.end(),
            [](const FolderFile& a, const FolderFile& b) { return a.relative_path < b.relative_path; });

  for (const auto& f : plan.files) {
    if (f.relative_path == "config.json") {
      std::ifstream in(folder / "config.json", std::ios::binary);
      std::stringstream text;
      text << in.rdbuf();
      try {
        plan.config = validate_config(parse_json(text.str(), ErrorCode::ConfigParseError));
      } catch (const Error& e) {
        fail(ErrorCode::ConfigParseError, "config.json: " + std::string(e.what()));
      }
    } else if (is_metric_path(f.relative_path)) {
      plan.metric_files.push_back(f.relative_path);
    } else {
      plan.data_files.push_back(f);
    }
  }
  plan.fingerprint = folder_fingerprint(plan.files);
  return plan;
}

Json MetricCsv::entries(std::size_t begin, std::size_t end) const {
  Json out = Json::array();
  for (std::size_t i = begin; i < end && i < steps.size(); ++i) {
    Json e{{"name", name}, {"step", steps[i]}, {"value", values[i]}};
    if (!timestamps.empty()) e["timestamp"] = timestamps[i];
    out.push_back(std::move(e));
  }
  return out;
}

MetricCsv parse_metric_csv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + file.string());

  MetricCsv csv;
  csv.name = file.stem().string();
  std::string line;
  std::size_t lineno = 0;
  bool with_timestamp = false;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      if (cells == std::vector<std::string>{"step", "value"}) {
        with_timestamp = false;
      } else if (cells == std::vector<std::string>{"step", "value", "timestamp"}) {
        with_timestamp = true;
      } else {
        malformed(file, lineno, "header must be step,value[,timestamp]");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != (with_timestamp ? 3u : 2u)) malformed(file, lineno, "wrong number of columns");
    const double step = parse_cell(cells[0], file, lineno);
    const double value = parse_cell(cells[1], file, lineno);
    if (!csv.steps.empty() && !(step > csv.steps.back())) {
      malformed(file, lineno, "step does not strictly increase");
    }
    if (with_timestamp) {
      if (!parse_timestamp(cells[2])) malformed(file, lineno, "bad timestamp '" + cells[2] + "'");
      csv.timestamps.push_back(cells[2]);
    }
    csv.steps.push_back(step);
    csv.values.push_back(value);
  }
  if (!header_seen) malformed(file, lineno, "missing header");
  return csv;
}

Json to_json(const IngestResult& result) {
  if (result.skipped) return Json{{"skipped", result.run_id}};
  return Json{{"run_id", result.run_id}};
}

IngestResult ingest(const IngestPlan& plan, ApiClient& client) {
  const Json existing = client.query_runs(
      Json{{"ingest_fingerprint", plan.fingerprint}, {"status", "COMPLETED"}}, "run_id", 0, 1);
  if (!existing.at("runs").empty()) {
    return IngestResult{existing["runs"][0].at("run_id").get<std::int64_t>(), true};
  }

  std::vector<MetricCsv> metrics;
  for (const auto& rel : plan.metric_files) metrics.push_back(parse_metric_csv(plan.folder / rel));

  const Json created = client.post_json(
      "/api/runs", Json{{"experiment_name", plan.experiment_name},
                        {"config", plan.config},
                        {"ingest_fingerprint", plan.fingerprint}});
  const auto run_id = created.at("run_id").get<std::int64_t>();
  const std::string base = "/api/runs/" + std::to_string(run_id);

  try {
    for (const auto& m : metrics) {
      for (std::size_t i = 0; i < m.steps.size(); i += kMetricBatch) {
        client.post_json(base + "/metrics", m.entries(i, i + kMetricBatch));
      }
    }
    for (const auto& f : plan.files) {
      client.upload_file(run_id, f.relative_path, plan.folder / f.relative_path,
                         media_type_for(f.relative_path));
    }
    client.post_json(base + "/finish", Json{{"event", "complete"}});
  } catch (const Error& e) {
    const std::string note = "ingest of " + plan.folder.string() + " failed: " + e.what();
    try {
      client.post_json(base + "/finish", Json{{"event", "fail"}, {"captured_out", note}});
    } catch (const Error&) {
    }
    fail(ErrorCode::UploadFailed, note);
  }
  return IngestResult{run_id, false};
}

}  // namespace altar
