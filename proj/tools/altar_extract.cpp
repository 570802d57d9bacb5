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

// altar-extract: query export, publication bundles and bundle verification.
// Exit codes: 0 success, 1 other failure, 2 filter syntax error,
// 3 verification failure.

#include <CLI11.hpp>
#include <altar/altar.h>

#include <cstdio>
#include <cstdlib>
#include <string>

namespace {

int exit_code(altar_status st) {
  if (st == ALTAR_OK) return 0;
  std::fprintf(stderr, "altar-extract: %s: %s\n", altar_status_name(st), altar_last_error_message());
  if (st == ALTAR_E_SYNTAX_ERROR) return 2;
  if (st == ALTAR_E_CHECKSUM_MISMATCH) return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query, export and verify runs"};
  app.set_version_flag("--version", altar_version());
  app.require_subcommand(1);

  std::string server = "http://127.0.0.1:8080";
  std::string token;
  app.add_option("--server", server, "Server URL")->capture_default_str();
  app.add_option("--token", token, "Bearer token (defaults to ALTAR_TOKEN)");

  std::string filter;
  std::string format = "jsonl";
  std::string out;
  auto* query = app.add_subcommand("query", "Export matching runs as jsonl or csv");
  query->add_option("filter", filter, "Filter expression")->required();
  query->add_option("--format", format, "jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}))
      ->capture_default_str();
  query->add_option("--out", out, "Output file (default stdout)");

  std::string bundle_filter;
  std::string bundle_out;
  auto* bundle = app.add_subcommand("bundle", "Write a checksummed bundle of matching runs");
  bundle->add_option("filter", bundle_filter, "Filter expression")->required();
  bundle->add_option("--out", bundle_out, "Bundle directory (absent or empty)")->required();

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Re-hash every file listed in a bundle manifest");
  verify->add_option("dir", verify_dir, "Bundle directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (token.empty()) {
    if (const char* env = std::getenv("ALTAR_TOKEN")) token = env;
  }

  if (*verify) {
    size_t files = 0;
    const auto st = altar_verify_bundle(verify_dir.c_str(), &files);
    if (st == ALTAR_OK) std::fprintf(stderr, "verified %zu files\n", files);
    return exit_code(st);
  }

  // Syntax errors are reported before any connection is attempted.
  size_t offset = 0;
  if (auto st = altar_filter_parse(*query ? filter.c_str() : bundle_filter.c_str(), nullptr, &offset);
      st != ALTAR_OK) {
    return exit_code(st);
  }

  altar_client* client = nullptr;
  auto st = altar_client_create(server.c_str(), token.c_str(), &client);
  if (st != ALTAR_OK) return exit_code(st);

  if (*query) {
    uint64_t count = 0;
    st = altar_extract_runs(client, filter.c_str(), format.c_str(), out.empty() ? nullptr : out.c_str(),
                            &count);
    if (st == ALTAR_OK) std::fprintf(stderr, "exported %llu runs\n", static_cast<unsigned long long>(count));
  } else {
    char* manifest = nullptr;
    st = altar_extract_bundle(client, bundle_filter.c_str(), bundle_out.c_str(), &manifest);
    if (st == ALTAR_OK) {
      std::printf("%s\n", manifest);
      altar_string_free(manifest);
    }
  }
  altar_client_destroy(client);
  return exit_code(st);
}
