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

// altar-send: ingests an experiment folder as one run.

#include <CLI11.hpp>
#include <altar/altar.h>

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Upload an experiment folder as a run"};
  app.set_version_flag("--version", altar_version());

  std::string folder;
  std::string name;
  std::string server = "http://127.0.0.1:8080";
  std::string token;
  bool dry_run = false;

  app.add_option("folder", folder, "Experiment folder")->required();
  app.add_option("--name", name, "Experiment name")->required();
  app.add_option("--server", server, "Server URL")->capture_default_str();
  app.add_option("--token", token, "Bearer token (defaults to ALTAR_TOKEN)");
  app.add_flag("--dry-run", dry_run, "Print the ingest plan as JSON and exit");

  CLI11_PARSE(app, argc, argv);

  if (token.empty()) {
    if (const char* env = std::getenv("ALTAR_TOKEN")) token = env;
  }

  char* out = nullptr;
  altar_status st;
  if (dry_run) {
    st = altar_sender_plan(folder.c_str(), name.c_str(), &out);
  } else {
    altar_client* client = nullptr;
    st = altar_client_create(server.c_str(), token.c_str(), &client);
    if (st == ALTAR_OK) st = altar_sender_ingest(client, folder.c_str(), name.c_str(), &out);
    altar_client_destroy(client);
  }
  if (st != ALTAR_OK) {
    std::fprintf(stderr, "altar-send: %s: %s\n", altar_status_name(st), altar_last_error_message());
    return 1;
  }
  std::printf("%s\n", out);
  altar_string_free(out);
  return 0;
}
