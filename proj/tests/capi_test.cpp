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

// Exercises the shared library through its C interface only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "altar/altar.h"

using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Scratch {
 public:
  Scratch() {
    std::string tmpl = (fs::temp_directory_path() / "altar-capi-XXXXXX").string();
    REQUIRE(mkdtemp(tmpl.data()) != nullptr);
    path_ = tmpl;
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  altar_string_free(s);
  return out;
}

struct Service {
  altar_service* svc = nullptr;
  int port = 0;

  explicit Service(const fs::path& dir, uint64_t threshold = 0) {
    altar_service_config cfg;
    altar_service_config_init(&cfg);
    const std::string d = dir.string();
    cfg.listen_address = "127.0.0.1:0";
    cfg.data_dir = d.c_str();
    if (threshold) cfg.large_file_threshold_bytes = threshold;
    REQUIRE(altar_service_create(&cfg, &svc) == ALTAR_OK);
    REQUIRE(altar_service_start(svc, &port) == ALTAR_OK);
  }
  ~Service() {
    altar_service_stop(svc);
    altar_service_destroy(svc);
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(altar_status_name(ALTAR_OK)) == "Ok");
  CHECK(std::string(altar_status_name(ALTAR_E_NON_MONOTONIC_STEP)) == "NonMonotonicStep");
  CHECK(std::string(altar_status_name(ALTAR_E_CHECKSUM_MISMATCH)) == "ChecksumMismatch");
  CHECK(std::string(altar_version()).size() >= 5);
}

TEST_CASE("config validation and flattening") {
  char* out = nullptr;
  CHECK(altar_validate_config(R"({"b":1,"a":{"c":[1,2]}})", &out) == ALTAR_OK);
  CHECK(take(out) == R"({"a":{"c":[1,2]},"b":1})");

  CHECK(altar_validate_config(R"({"a.b":1})", &out) == ALTAR_E_KEY_INVALID);
  CHECK(std::string(altar_last_error_message()).find("a.b") != std::string::npos);
  CHECK(altar_validate_config("not json", &out) == ALTAR_E_CONFIG_PARSE_ERROR);
  CHECK(altar_validate_config(nullptr, &out) == ALTAR_E_INVALID_ARGUMENT);

  CHECK(altar_flatten_paths(R"({"pulse":{"LED_pin":1},"gain":10})", &out) == ALTAR_OK);
  CHECK(Json::parse(take(out)) == Json::parse(R"([["gain",10],["pulse.LED_pin",1]])"));
}

TEST_CASE("filter parse, compile and evaluate") {
  char* out = nullptr;
  size_t offset = 0;
  CHECK(altar_filter_parse("A = 1  AND b >= 2", &out, &offset) == ALTAR_OK);
  CHECK(take(out) == "A = 1 and b >= 2");
  CHECK(altar_filter_parse("a = ", &out, &offset) == ALTAR_E_SYNTAX_ERROR);
  CHECK(offset == 5);

  int residual = -1;
  CHECK(altar_filter_compile("a = 1 and b.c >= 2", &out, &residual) == ALTAR_OK);
  CHECK(residual == 0);
  CHECK(Json::parse(take(out)) == Json::parse(R"({"a":1,"b.c":{"$gte":2}})"));
  CHECK(altar_filter_compile("a = 1 or b = 2", &out, &residual) == ALTAR_OK);
  CHECK(residual == 1);
  CHECK(take(out) == "null");

  int match = -1;
  CHECK(altar_filter_evaluate("not a = 1", R"({"a":2})", &match) == ALTAR_OK);
  CHECK(match == 1);
  CHECK(altar_filter_evaluate("a = 1", R"({"a":2})", &match) == ALTAR_OK);
  CHECK(match == 0);
}

TEST_CASE("service, sender and extractor round trip through the C interface") {
  Scratch dir;
  write(dir / "rec/config.json", R"({"frame_acquisition":{"gain":10}})");
  write(dir / "rec/metrics/Average_fluorescence.csv", "step,value\n0,1\n0.1,2\n");
  write(dir / "rec/video.bin", std::string(5000, 'v'));

  char* plan = nullptr;
  REQUIRE(altar_sender_plan((dir / "rec").c_str(), "get_movie", &plan) == ALTAR_OK);
  CHECK(Json::parse(take(plan))["metric_files"] == Json::array({"metrics/Average_fluorescence.csv"}));
  CHECK(altar_sender_plan((dir / "missing").c_str(), "x", &plan) != ALTAR_OK);

  Service service(dir / "data", 1024);
  CHECK(altar_service_port(service.svc) == service.port);

  altar_client* client = nullptr;
  REQUIRE(altar_client_create(service.url().c_str(), nullptr, &client) == ALTAR_OK);
  char* result = nullptr;
  REQUIRE(altar_sender_ingest(client, (dir / "rec").c_str(), "get_movie", &result) == ALTAR_OK);
  CHECK(Json::parse(take(result)) == Json{{"run_id", 1}});
  REQUIRE(altar_sender_ingest(client, (dir / "rec").c_str(), "get_movie", &result) == ALTAR_OK);
  CHECK(Json::parse(take(result)) == Json{{"skipped", 1}});

  uint64_t count = 0;
  const std::string csv = (dir / "runs.csv").string();
  CHECK(altar_extract_runs(client, "config.frame_acquisition.gain >= 10", "csv", csv.c_str(), &count) == ALTAR_OK);
  CHECK(count == 1);
  CHECK(altar_extract_runs(client, "a = ", "csv", csv.c_str(), &count) == ALTAR_E_SYNTAX_ERROR);
  CHECK(altar_extract_runs(client, "a = 1", "xml", csv.c_str(), &count) == ALTAR_E_INVALID_ARGUMENT);

  char* manifest = nullptr;
  const std::string bundle = (dir / "bundle").string();
  REQUIRE(altar_extract_bundle(client, "run_id exists", bundle.c_str(), &manifest) == ALTAR_OK);
  CHECK(take(manifest) == (dir / "bundle/manifest.json").string());
  size_t checked = 0;
  CHECK(altar_verify_bundle(bundle.c_str(), &checked) == ALTAR_OK);
  CHECK(checked >= 5);
  write(dir / "bundle/artifacts/1/video.bin", std::string(5000, 'w'));
  CHECK(altar_verify_bundle(bundle.c_str(), &checked) == ALTAR_E_CHECKSUM_MISMATCH);
  CHECK(std::string(altar_last_error_message()).find("artifacts/1/video.bin") != std::string::npos);
  altar_client_destroy(client);

  altar_client* dead = nullptr;
  REQUIRE(altar_client_create("http://127.0.0.1:1", nullptr, &dead) == ALTAR_OK);
  CHECK(altar_sender_ingest(dead, (dir / "rec").c_str(), "e", &result) == ALTAR_E_SERVER_UNREACHABLE);
  altar_client_destroy(dead);
}

TEST_CASE("a data directory has one owner at a time") {
  Scratch dir;
  {
    Service first(dir / "data");
    altar_service_config cfg;
    altar_service_config_init(&cfg);
    const std::string d = (dir / "data").string();
    cfg.data_dir = d.c_str();
    altar_service* second = nullptr;
    CHECK(altar_service_create(&cfg, &second) == ALTAR_E_LOCK_HELD);
    CHECK(second == nullptr);
    char* report = nullptr;
    CHECK(altar_store_scan_integrity(d.c_str(), &report) == ALTAR_E_LOCK_HELD);
  }
  char* report = nullptr;
  REQUIRE(altar_store_scan_integrity((dir / "data").c_str(), &report) == ALTAR_OK);
  CHECK(Json::parse(take(report)) == Json::parse(R"({"corrupt":[],"dangling_refs":[],"orphan_blobs":[]})"));
  CHECK(altar_store_compact((dir / "data").c_str()) == ALTAR_OK);
}

TEST_CASE("the shared library exports only the C interface") {
  FILE* p = popen("nm -D --defined-only " ALTAR_SHARED_LIBRARY " 2>/dev/null", "r");
  REQUIRE(p != nullptr);
  char line[1024];
  int exported = 0;
  std::string foreign;
  while (fgets(line, sizeof line, p)) {
    std::string s(line);
    const auto sp = s.rfind(' ');
    std::string sym = s.substr(sp + 1);
    if (!sym.empty() && sym.back() == '\n') sym.pop_back();
    const char type = s.size() > 17 ? s[17] : '?';
    if (type != 'T') continue;
    if (sym.rfind("altar_", 0) == 0) {
      ++exported;
    } else if (sym.rfind("_init", 0) != 0 && sym.rfind("_fini", 0) != 0) {
      foreign += sym + " ";
    }
  }
  pclose(p);
  CHECK(exported >= 25);
  CHECK(foreign == "");
}
