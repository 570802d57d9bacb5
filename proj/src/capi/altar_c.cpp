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

#include "altar/altar.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include "altar/api_client.hpp"
#include "altar/blob_store.hpp"
#include "altar/doc_store.hpp"
#include "altar/error.hpp"
#include "altar/extractor.hpp"
#include "altar/filter.hpp"
#include "altar/filter_lang.hpp"
#include "altar/http_server.hpp"
#include "altar/model.hpp"
#include "altar/run_service.hpp"
#include "altar/sender.hpp"
#include "altar/version.hpp"

static_assert(ALTAR_E_INVALID_ARGUMENT == static_cast<int>(altar::ErrorCode::InvalidArgument) + 1);
static_assert(ALTAR_E_CHECKSUM_MISMATCH == static_cast<int>(altar::ErrorCode::ChecksumMismatch) + 1);
static_assert(ALTAR_E_SYNTAX_ERROR == static_cast<int>(altar::ErrorCode::SyntaxError) + 1);

struct altar_service {
  std::unique_ptr<altar::RunService> service;
  std::unique_ptr<altar::HttpServer> http;
  std::thread worker;
  std::atomic<int> port{-1};
};

struct altar_client {
  std::unique_ptr<altar::ApiClient> api;
};

namespace {

thread_local std::string g_last_error;

altar_status to_status(altar::ErrorCode code) { return static_cast<altar_status>(static_cast<int>(code) + 1); }

template <class Fn>
altar_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return ALTAR_OK;
  } catch (const altar::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const altar::Json::exception& e) {
    g_last_error = e.what();
    return ALTAR_E_INVALID_ARGUMENT;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return ALTAR_E_IO_FAILURE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ALTAR_E_IO_FAILURE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ALTAR_E_IO_FAILURE;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) altar::fail(altar::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

}  // namespace

extern "C" {

const char* altar_version(void) { return altar::kVersion; }

const char* altar_status_name(altar_status status) {
  if (status == ALTAR_OK) return "Ok";
  if (status < ALTAR_E_INVALID_ARGUMENT || status > ALTAR_E_CHECKSUM_MISMATCH) return "Unknown";
  return altar::error_name(static_cast<altar::ErrorCode>(static_cast<int>(status) - 1)).data();
}

const char* altar_last_error_message(void) { return g_last_error.c_str(); }

void altar_string_free(char* s) { std::free(s); }

void altar_service_config_init(altar_service_config* config) {
  if (!config) return;
  static const altar::ServiceConfig defaults;
  config->listen_address = "127.0.0.1:8080";
  config->data_dir = "altar-data";
  config->large_file_threshold_bytes = defaults.large_file_threshold_bytes;
  config->auth_token = nullptr;
  config->heartbeat_stale_secs = defaults.heartbeat_stale_secs;
  config->captured_out_cap_bytes = defaults.captured_out_cap_bytes;
  config->ui_dir = nullptr;
}

altar_status altar_service_create(const altar_service_config* config, altar_service** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    altar::ServiceConfig sc;
    if (config->listen_address) sc.listen_address = config->listen_address;
    if (config->data_dir) sc.data_dir = config->data_dir;
    sc.large_file_threshold_bytes = config->large_file_threshold_bytes;
    if (config->auth_token && *config->auth_token) sc.auth_token = config->auth_token;
    sc.heartbeat_stale_secs = config->heartbeat_stale_secs;
    sc.captured_out_cap_bytes = config->captured_out_cap_bytes;
    if (config->ui_dir && *config->ui_dir) sc.ui_dir = config->ui_dir;
    altar::split_listen_address(sc.listen_address);

    auto handle = std::make_unique<altar_service>();
    handle->service = std::make_unique<altar::RunService>(std::move(sc));
    handle->http = std::make_unique<altar::HttpServer>(*handle->service);
    *out = handle.release();
  });
}

static void bind_once(altar_service* s) {
  if (s->port.load() < 0) s->port = s->http->bind(s->service->config().listen_address);
}

altar_status altar_service_start(altar_service* service, int* out_port) {
  return guard([&] {
    require(service, "service");
    if (service->worker.joinable()) altar::fail(altar::ErrorCode::Conflict, "service already started");
    bind_once(service);
    service->worker = std::thread([s = service] { s->http->serve(); });
    if (out_port) *out_port = service->port;
  });
}

altar_status altar_service_run(altar_service* service) {
  return guard([&] {
    require(service, "service");
    bind_once(service);
    service->http->serve();
  });
}

int altar_service_port(const altar_service* service) { return service ? service->port.load() : -1; }

altar_status altar_service_stop(altar_service* service) {
  return guard([&] {
    require(service, "service");
    service->http->stop();
  });
}

void altar_service_destroy(altar_service* service) {
  if (!service) return;
  service->http->stop();
  if (service->worker.joinable()) service->worker.join();
  delete service;
}

altar_status altar_store_scan_integrity(const char* data_dir, char** out_report_json) {
  return guard([&] {
    require(data_dir, "data_dir");
    const std::filesystem::path root(data_dir);
    altar::DocStore docs(root / "db");
    altar::BlobStore blobs(root / "lfs");
    put(out_report_json, altar::to_json(altar::scan_integrity(blobs, docs)).dump());
  });
}

altar_status altar_store_compact(const char* data_dir) {
  return guard([&] {
    require(data_dir, "data_dir");
    altar::DocStore docs(std::filesystem::path(data_dir) / "db");
    docs.compact();
  });
}

altar_status altar_validate_config(const char* config_json, char** out_normalized_json) {
  return guard([&] {
    require(config_json, "config_json");
    put(out_normalized_json,
        altar::canonical_json(altar::validate_config(
            altar::parse_json(config_json, altar::ErrorCode::ConfigParseError))));
  });
}

altar_status altar_flatten_paths(const char* config_json, char** out_json) {
  return guard([&] {
    require(config_json, "config_json");
    const auto config = altar::validate_config(altar::parse_json(config_json, altar::ErrorCode::ConfigParseError));
    altar::Json out = altar::Json::array();
    for (const auto& [path, value] : altar::flatten_paths(config)) out.push_back({path, value});
    put(out_json, out.dump());
  });
}

altar_status altar_filter_parse(const char* text, char** out_canonical, size_t* out_error_offset) {
  if (out_error_offset) *out_error_offset = 0;
  return guard([&] {
    require(text, "text");
    try {
      put(out_canonical, altar::print_filter(altar::parse_filter(text)));
    } catch (const altar::FilterSyntaxError& e) {
      if (out_error_offset) *out_error_offset = e.offset();
      throw;
    }
  });
}

altar_status altar_filter_compile(const char* text, char** out_filter_json, int* out_is_residual) {
  return guard([&] {
    require(text, "text");
    const auto compiled = altar::compile_filter(altar::parse_filter(text));
    const auto* json = std::get_if<altar::Json>(&compiled);
    if (out_is_residual) *out_is_residual = json ? 0 : 1;
    put(out_filter_json, json ? altar::canonical_json(*json) : std::string("null"));
  });
}

altar_status altar_filter_evaluate(const char* text, const char* doc_json, int* out_match) {
  return guard([&] {
    require(text, "text");
    require(doc_json, "doc_json");
    const bool match = altar::evaluate(altar::parse_filter(text),
                                       altar::parse_json(doc_json, altar::ErrorCode::InvalidArgument));
    if (out_match) *out_match = match ? 1 : 0;
  });
}

altar_status altar_client_create(const char* server_url, const char* token, altar_client** out) {
  return guard([&] {
    require(server_url, "server_url");
    require(out, "out");
    *out = nullptr;
    std::optional<std::string> tok;
    if (token && *token) tok = token;
    auto handle = std::make_unique<altar_client>();
    handle->api = std::make_unique<altar::ApiClient>(server_url, tok);
    *out = handle.release();
  });
}

void altar_client_destroy(altar_client* client) { delete client; }

altar_status altar_sender_plan(const char* folder, const char* experiment_name, char** out_plan_json) {
  return guard([&] {
    require(folder, "folder");
    require(experiment_name, "experiment_name");
    put(out_plan_json, altar::to_json(altar::scan_folder(folder, experiment_name)).dump(2));
  });
}

altar_status altar_sender_ingest(altar_client* client, const char* folder,
                                 const char* experiment_name, char** out_result_json) {
  return guard([&] {
    require(client, "client");
    require(folder, "folder");
    require(experiment_name, "experiment_name");
    const auto plan = altar::scan_folder(folder, experiment_name);
    put(out_result_json, altar::canonical_json(altar::to_json(altar::ingest(plan, *client->api))));
  });
}

altar_status altar_extract_runs(altar_client* client, const char* filter_text, const char* format,
                                const char* out_path, uint64_t* out_count) {
  return guard([&] {
    require(client, "client");
    require(filter_text, "filter_text");
    const std::string fmt = format ? format : "jsonl";
    if (fmt != "jsonl" && fmt != "csv") {
      altar::fail(altar::ErrorCode::InvalidArgument, "format must be jsonl or csv");
    }
    const auto expr = altar::parse_filter(filter_text);
    const auto kind = fmt == "csv" ? altar::ExportFormat::Csv : altar::ExportFormat::Jsonl;
    std::uint64_t count = 0;
    if (out_path && *out_path) {
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) altar::fail(altar::ErrorCode::IoFailure, std::string("cannot write ") + out_path);
      count = altar::export_runs(*client->api, expr, kind, out);
    } else {
      count = altar::export_runs(*client->api, expr, kind, std::cout);
    }
    if (out_count) *out_count = count;
  });
}

altar_status altar_extract_bundle(altar_client* client, const char* filter_text, const char* out_dir,
                                  char** out_manifest_path) {
  return guard([&] {
    require(client, "client");
    require(filter_text, "filter_text");
    require(out_dir, "out_dir");
    const auto path = altar::export_bundle(*client->api, altar::parse_filter(filter_text), out_dir);
    put(out_manifest_path, path.string());
  });
}

altar_status altar_verify_bundle(const char* dir, size_t* out_files_checked) {
  return guard([&] {
    require(dir, "dir");
    const auto n = altar::verify_bundle(dir);
    if (out_files_checked) *out_files_checked = n;
  });
}

}  // extern "C"
