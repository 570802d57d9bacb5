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

// altar-server: runs the HTTP API, or performs offline store maintenance.

#include <CLI11.hpp>
#include <altar/altar.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

namespace {

int report_failure(altar_status st) {
  std::fprintf(stderr, "altar-server: %s: %s\n", altar_status_name(st), altar_last_error_message());
  return st == ALTAR_E_LOCK_HELD ? 4 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiment tracking server"};
  app.set_version_flag("--version", altar_version());

  altar_service_config config;
  altar_service_config_init(&config);

  std::string listen = config.listen_address;
  std::string data_dir = config.data_dir;
  std::uint64_t threshold = config.large_file_threshold_bytes;
  std::uint32_t stale_secs = config.heartbeat_stale_secs;
  std::string token;
  std::string ui_dir;

  app.add_option("--listen", listen, "host:port to bind (port 0 picks a free port)")->capture_default_str();
  app.add_option("--data-dir", data_dir, "Data directory")->capture_default_str();
  app.add_option("--threshold-bytes", threshold, "Files larger than this go to the blob store")
      ->capture_default_str();
  app.add_option("--token", token, "Bearer token required on /api (ALTAR_TOKEN overrides)");
  app.add_option("--ui-dir", ui_dir, "Static viewer files served under /");
  app.add_option("--stale-secs", stale_secs, "Heartbeat age after which a RUNNING run is stale")
      ->capture_default_str();

  auto* scan = app.add_subcommand("scan", "Check blob and document cross-references offline");
  auto* compact = app.add_subcommand("compact", "Rewrite journals without superseded entries");
  app.require_subcommand(0, 1);

  CLI11_PARSE(app, argc, argv);

  if (*scan) {
    char* report = nullptr;
    const auto st = altar_store_scan_integrity(data_dir.c_str(), &report);
    if (st != ALTAR_OK) return report_failure(st);
    std::printf("%s\n", report);
    const bool clean = std::string(report) ==
                       R"({"corrupt":[],"dangling_refs":[],"orphan_blobs":[]})";
    altar_string_free(report);
    return clean ? 0 : 3;
  }
  if (*compact) {
    const auto st = altar_store_compact(data_dir.c_str());
    return st == ALTAR_OK ? 0 : report_failure(st);
  }

  if (const char* env = std::getenv("ALTAR_TOKEN"); env && *env) token = env;
  config.listen_address = listen.c_str();
  config.data_dir = data_dir.c_str();
  config.large_file_threshold_bytes = threshold;
  config.heartbeat_stale_secs = stale_secs;
  config.auth_token = token.empty() ? nullptr : token.c_str();
  config.ui_dir = ui_dir.empty() ? nullptr : ui_dir.c_str();

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  altar_service* service = nullptr;
  auto st = altar_service_create(&config, &service);
  if (st != ALTAR_OK) return report_failure(st);

  int port = -1;
  st = altar_service_start(service, &port);
  if (st != ALTAR_OK) {
    altar_service_destroy(service);
    return report_failure(st);
  }
  const auto colon = listen.rfind(':');
  std::printf("altar-server listening on %s:%d\n", listen.substr(0, colon).c_str(), port);
  std::fflush(stdout);

  int received = 0;
  sigwait(&signals, &received);
  altar_service_destroy(service);
  return 0;
}
