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

// Blocking client for the HTTP API. Transport failures raise
// ServerUnreachable; error responses raise the code named in the body.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "altar/json.hpp"

namespace altar {

class ApiClient {
 public:
  // `server` is "http://host:port" or "host:port".
  explicit ApiClient(const std::string& server, std::optional<std::string> token = std::nullopt);
  ~ApiClient();

  ApiClient(const ApiClient&) = delete;
  ApiClient& operator=(const ApiClient&) = delete;

  Json get_json(const std::string& path);
  Json post_json(const std::string& path, const Json& body);

  // Streams a local file as multipart fields name/media_type/file.
  Json upload_file(std::int64_t run_id, const std::string& name, const std::filesystem::path& file,
                   const std::string& media_type = "application/octet-stream");

  // Streams a response body to `sink`; returns bytes received.
  std::uint64_t download(const std::string& path,
                         const std::function<void(const char*, std::size_t)>& sink);

  Json query_runs(const Json& filter, const std::string& sort, std::uint64_t skip,
                  std::uint64_t limit);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Percent-encodes each path segment, keeping '/' separators.
std::string encode_path(std::string_view path);
std::string encode_query_value(std::string_view value);

}  // namespace altar
