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

#include "altar/http_server.hpp"

#include <charconv>
#include <map>
#include <mutex>
#include <optional>

#include <httplib.h>

#include "altar/json.hpp"
#include "altar/run_service.hpp"

namespace altar {

namespace {

constexpr std::size_t kMaxFormFieldBytes = 64 * 1024;

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(canonical_json(body), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, Json{{"error", error_name(code)}, {"message", message}}, http_status_for(code));
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const Json::exception& e) {
    send_error(res, ErrorCode::InvalidArgument, e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::IoFailure, e.what());
  }
}

std::int64_t parse_id(const std::string& text) {
  std::int64_t id = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc() || ptr != text.data() + text.size() || id <= 0) {
    fail(ErrorCode::NotFound, "no run '" + text + "'");
  }
  return id;
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return parse_json(req.body, ErrorCode::InvalidArgument);
}

std::uint64_t parse_count(const httplib::Request& req, const char* key, std::uint64_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::InvalidArgument, std::string("bad ") + key + " '" + text + "'");
  }
  return v;
}

std::vector<SortKey> parse_sort(const std::string& text) {
  std::vector<SortKey> keys;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    SortKey key;
    if (auto colon = item.rfind(':'); colon != std::string::npos) {
      const std::string dir = item.substr(colon + 1);
      if (dir == "desc") {
        key.descending = true;
      } else if (dir != "asc") {
        fail(ErrorCode::InvalidArgument, "sort direction must be asc or desc");
      }
      item.resize(colon);
    }
    if (item.empty()) fail(ErrorCode::InvalidArgument, "empty sort path");
    key.path = std::move(item);
    keys.push_back(std::move(key));
  }
  return keys;
}

void stream_response(httplib::Response& res, std::unique_ptr<std::istream> in, std::uint64_t size,
                     const std::string& media_type) {
  std::shared_ptr<std::istream> stream(std::move(in));
  res.status = 200;
  res.set_content_provider(
      static_cast<std::size_t>(size), media_type,
      [stream](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
        if (static_cast<std::size_t>(stream->tellg()) != offset) {
          stream->clear();
          stream->seekg(static_cast<std::streamoff>(offset));
        }
        std::string buf(std::min<std::size_t>(length, 1 << 16), '\0');
        stream->read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto n = stream->gcount();
        if (n <= 0) return false;
        return sink.write(buf.data(), static_cast<std::size_t>(n));
      });
}

}  // namespace

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::KeyInvalid:
    case ErrorCode::DepthExceeded:
    case ErrorCode::NonFiniteNumber:
    case ErrorCode::LimitExceeded:
    case ErrorCode::FilterInvalid:
    case ErrorCode::SyntaxError:
    case ErrorCode::ConfigParseError:
    case ErrorCode::MetricCsvMalformed:
      return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::ImmutableRecord:
    case ErrorCode::IllegalTransition:
    case ErrorCode::Conflict:
      return 409;
    case ErrorCode::NonMonotonicStep: return 422;
    case ErrorCode::LockHeld: return 503;
    case ErrorCode::StorageFull: return 507;
    default: return 500;
  }
}

std::pair<std::string, int> split_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::InvalidArgument, "listen address needs host:port");
  std::string host = address.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host.empty()) host = "0.0.0.0";
  const std::string port_text = address.substr(colon + 1);
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    fail(ErrorCode::InvalidArgument, "bad port in '" + address + "'");
  }
  return {host, port};
}

struct HttpServer::Impl {
  RunService& service;
  httplib::Server server;
  std::mutex lifecycle;
  bool serving = false;
  bool stopped = false;

  explicit Impl(RunService& s) : service(s) { routes(); }

  bool authorized(const httplib::Request& req) const {
    const auto& token = service.config().auth_token;
    if (!token || token->empty()) return true;
    return req.get_header_value("Authorization") == "Bearer " + *token;
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      const bool api = req.path.rfind("/api/", 0) == 0 && req.path != "/api/health";
      if (api && !authorized(req)) {
        send_error(res, ErrorCode::Unauthorized, "missing or wrong bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, Json{{"status", "ok"}});
    });

    server.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, service.create_run(parse_body(req))); });
    });

    server.Get("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Json filter = Json::object();
        if (req.has_param("filter") && !req.get_param_value("filter").empty()) {
          filter = parse_json(req.get_param_value("filter"), ErrorCode::FilterInvalid);
        }
        const auto sort = parse_sort(req.has_param("sort") ? req.get_param_value("sort") : "");
        send_json(res, service.query_runs(filter, sort, parse_count(req, "skip", 0),
                                          parse_count(req, "limit", 100)));
      });
    });

    server.Get(R"(/api/runs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, service.get_run(parse_id(req.matches[1]))); });
    });

    server.Post(R"(/api/runs/(\d+)/metrics)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const auto id = parse_id(req.matches[1]);
                    const Json body = req.body.empty() ? Json::array() : parse_body(req);
                    send_json(res, service.log_metrics(id, body));
                  });
                });

    server.Get(R"(/api/runs/(\d+)/metrics/(.+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   send_json(res, service.get_metric(parse_id(req.matches[1]), req.matches[2]));
                 });
               });

    server.Post(R"(/api/runs/(\d+)/artifacts)",
                [this](const httplib::Request& req, httplib::Response& res,
                       const httplib::ContentReader& reader) {
                  guarded(res, [&] { upload(req, res, reader); });
                });

    server.Get(R"(/api/runs/(\d+)/artifacts/(.+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   ArtifactDownload d = service.open_artifact(parse_id(req.matches[1]), req.matches[2]);
                   if (d.stream) {
                     stream_response(res, std::move(d.stream), d.ref.size_bytes, d.ref.media_type);
                   } else {
                     res.status = 200;
                     res.set_content(std::move(d.inline_bytes), d.ref.media_type);
                   }
                 });
               });

    server.Post(R"(/api/runs/(\d+)/finish)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    send_json(res, service.finish_run(parse_id(req.matches[1]), parse_body(req)));
                  });
                });

    server.Post(R"(/api/runs/(\d+)/heartbeat)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { send_json(res, service.heartbeat(parse_id(req.matches[1]))); });
                });

    server.Post(R"(/api/runs/(\d+)/annotations)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    send_json(res, service.annotate(parse_id(req.matches[1]), parse_body(req)));
                  });
                });

    server.Get(R"(/api/runs/(\d+)/annotations)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_json(res, service.list_annotations(parse_id(req.matches[1]))); });
               });

    server.Get(R"(/api/blobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const bool verify = req.has_param("verify") && req.get_param_value("verify") != "0";
        BlobRead blob = service.open_blob(req.matches[1], verify);
        stream_response(res, std::move(blob.stream), blob.manifest.size_bytes,
                        "application/octet-stream");
      });
    });

    server.Get("/api/experiments", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, service.list_experiments()); });
    });

    // Run documents have no generic write endpoints.
    auto not_allowed = [](const httplib::Request&, httplib::Response& res) {
      send_json(res, Json{{"error", "MethodNotAllowed"}, {"message", "runs are append-only"}}, 405);
    };
    server.Put(R"(/api/runs.*)", not_allowed);
    server.Patch(R"(/api/runs.*)", not_allowed);
    server.Delete(R"(/api/runs.*)", not_allowed);

    if (!service.config().ui_dir.empty()) {
      server.set_mount_point("/", service.config().ui_dir.string());
    }
  }

  void upload(const httplib::Request& req, httplib::Response& res,
              const httplib::ContentReader& reader) {
    const auto run_id = parse_id(req.matches[1]);
    if (!req.is_multipart_form_data()) {
      fail(ErrorCode::InvalidArgument, "artifact upload must be multipart/form-data");
    }
    std::optional<BlobWriter> writer;
    std::map<std::string, std::string> fields;
    std::string current;
    std::string file_content_type;
    ArtifactUpload meta;
    std::optional<Error> failure;

    reader(
        [&](const httplib::MultipartFormData& part) {
          current = part.name;
          if (part.name == "file") {
            if (writer) {
              failure = Error(ErrorCode::InvalidArgument, "more than one file part");
              return false;
            }
            try {
              writer.emplace(service.begin_upload());
            } catch (const Error& e) {
              failure = e;
              return false;
            }
            meta.original_filename = part.filename;
            file_content_type = part.content_type;
          } else {
            fields[current].clear();
          }
          return true;
        },
        [&](const char* data, std::size_t n) {
          try {
            if (current == "file") {
              writer->write(std::string_view(data, n));
            } else {
              auto& value = fields[current];
              if (value.size() + n > kMaxFormFieldBytes) {
                fail(ErrorCode::InvalidArgument, "form field '" + current + "' too large");
              }
              value.append(data, n);
            }
          } catch (const Error& e) {
            failure = e;
            return false;
          }
          return true;
        });

    if (failure) throw *failure;
    if (!writer) fail(ErrorCode::InvalidArgument, "missing 'file' part");
    if (auto it = fields.find("name"); it != fields.end() && !it->second.empty()) {
      meta.name = it->second;
    } else {
      meta.name = meta.original_filename;
    }
    if (auto it = fields.find("media_type"); it != fields.end() && !it->second.empty()) {
      meta.media_type = it->second;
    } else if (!file_content_type.empty()) {
      meta.media_type = file_content_type;
    }
    send_json(res, to_json(service.add_artifact(run_id, meta, *writer)));
  }
};

HttpServer::HttpServer(RunService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& listen_address) {
  auto [host, port] = split_listen_address(listen_address);
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::IoFailure, "cannot bind " + listen_address);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) fail(ErrorCode::IoFailure, "cannot bind " + listen_address);
  return port;
}

void HttpServer::serve() {
  {
    std::lock_guard lock(impl_->lifecycle);
    if (impl_->stopped) return;
    impl_->serving = true;
  }
  impl_->server.listen_after_bind();
}

// Safe before, during or after serve(); a stop that wins the race makes
// serve() return without listening.
void HttpServer::stop() {
  if (!impl_) return;
  bool serving = false;
  {
    std::lock_guard lock(impl_->lifecycle);
    impl_->stopped = true;
    serving = impl_->serving;
  }
  if (serving) {
    impl_->server.wait_until_ready();
    impl_->server.stop();
  }
}

}  // namespace altar
