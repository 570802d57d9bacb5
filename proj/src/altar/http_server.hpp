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

// HTTP/1.1 JSON API over RunService.
//
//   POST /api/runs                          create_run
//   GET  /api/runs?filter=&sort=&skip=&limit=
//   GET  /api/runs/{id}
//   POST /api/runs/{id}/metrics             [{name, step, value, timestamp?}]
//   GET  /api/runs/{id}/metrics/{name}
//   POST /api/runs/{id}/artifacts           multipart: name, media_type, file
//   GET  /api/runs/{id}/artifacts/{name}
//   POST /api/runs/{id}/finish              {event, result?, captured_out?}
//   POST /api/runs/{id}/heartbeat
//   POST /api/runs/{id}/annotations         {author, tags, note}
//   GET  /api/runs/{id}/annotations
//   GET  /api/blobs/{uid}[?verify=1]
//   GET  /api/experiments
//   GET  /api/health
//
// `sort` is a comma-separated list of `path` or `path:asc|desc`. Errors are
// returned as {"error": <code name>, "message": ...}.

#pragma once

#include <memory>
#include <string>

#include "altar/error.hpp"

namespace altar {

class RunService;

int http_status_for(ErrorCode code);

class HttpServer {
 public:
  explicit HttpServer(RunService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds "host:port"; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& listen_address);

  // Serves until stop() is called.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Splits "host:port" (IPv6 hosts may be bracketed). InvalidArgument on junk.
std::pair<std::string, int> split_listen_address(const std::string& address);

}  // namespace altar
