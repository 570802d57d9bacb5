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

#include "altar/api_client.hpp"

#include <httplib.h>

#include <cctype>
#include <fstream>

#include "altar/error.hpp"

namespace altar {

namespace {

constexpr time_t kTimeoutSecs = 300;

bool unreserved(unsigned char c) {
  return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~';
}

std::string percent_encode(std::string_view s, bool keep_slash) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (unreserved(c) || (keep_slash && c == '/')) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::string normalize_server(const std::string& server) {
  if (server.rfind("http://", 0) == 0 || server.rfind("https://", 0) == 0) return server;
  return "http://" + server;
}

}  // namespace

std::string encode_path(std::string_view path) { return percent_encode(path, true); }

std::string encode_query_value(std::string_view value) { return percent_encode(value, false); }

struct ApiClient::Impl {
  std::string server;
  httplib::Client client;
  httplib::Headers headers;

  Impl(const std::string& s, const std::optional<std::string>& token)
      : server(normalize_server(s)), client(server) {
    if (!client.is_valid()) fail(ErrorCode::InvalidArgument, "bad server address '" + s + "'");
    client.set_url_encode(false);
    client.set_connection_timeout(10);
    client.set_read_timeout(kTimeoutSecs);
    client.set_write_timeout(kTimeoutSecs);
    if (token && !token->empty()) headers.emplace("Authorization", "Bearer " + *token);
  }

  [[noreturn]] void transport_failure(const httplib::Result& r) const {
    fail(ErrorCode::ServerUnreachable, "cannot reach " + server + ": " + httplib::to_string(r.error()));
  }

  Json check(const httplib::Result& r) const {
    if (!r) transport_failure(r);
    return decode(r->status, r->body);
  }

  static Json decode(int status, const std::string& body) {
    if (status >= 200 && status < 300) {
      if (body.empty()) return Json::object();
      return parse_json(body, ErrorCode::IoFailure);
    }
    std::string code = "IoFailure";
    std::string message = "HTTP " + std::to_string(status);
    try {
      const Json err = Json::parse(body);
      if (err.is_object()) {
        code = err.value("error", code);
        message = err.value("message", message);
      }
    } catch (const Json::exception&) {
    }
    throw Error(error_code_from_name(code), message);
  }
};

ApiClient::ApiClient(const std::string& server, std::optional<std::string> token)
    : impl_(std::make_unique<Impl>(server, token)) {}

ApiClient::~ApiClient() = default;

Json ApiClient::get_json(const std::string& path) {
  return impl_->check(impl_->client.Get(path, impl_->headers));
}

Json ApiClient::post_json(const std::string& path, const Json& body) {
  return impl_->check(impl_->client.Post(path, impl_->headers, canonical_json(body), "application/json"));
}

Json ApiClient::upload_file(std::int64_t run_id, const std::string& name,
                            const std::filesystem::path& file, const std::string& media_type) {
  auto in = std::make_shared<std::ifstream>(file, std::ios::binary);
  if (!*in) fail(ErrorCode::IoFailure, "cannot open " + file.string());

  httplib::MultipartFormDataItems fields = {
      {"name", name, "", ""},
      {"media_type", media_type, "", ""},
  };
  httplib::MultipartFormDataProviderItems files = {
      {"file",
       [in](std::size_t, httplib::DataSink& sink) {
         char buf[1 << 16];
         in->read(buf, sizeof buf);
         const auto n = in->gcount();
         if (n > 0 && !sink.write(buf, static_cast<std::size_t>(n))) return false;
         if (!*in) sink.done();
         return true;
       },
       file.filename().string(), media_type},
  };
  const std::string path = "/api/runs/" + std::to_string(run_id) + "/artifacts";
  return impl_->check(impl_->client.Post(path, impl_->headers, fields, files));
}

std::uint64_t ApiClient::download(const std::string& path,
                                  const std::function<void(const char*, std::size_t)>& sink) {
  std::uint64_t received = 0;
  int status = 0;
  std::string error_body;
  auto r = impl_->client.Get(
      path, impl_->headers,
      [&](const httplib::Response& res) {
        status = res.status;
        return true;
      },
      [&](const char* data, std::size_t n) {
        if (status >= 200 && status < 300) {
          sink(data, n);
          received += n;
        } else {
          error_body.append(data, n);
        }
        return true;
      });
  if (!r) impl_->transport_failure(r);
  if (status < 200 || status >= 300) Impl::decode(status, error_body);
  return received;
}

Json ApiClient::query_runs(const Json& filter, const std::string& sort, std::uint64_t skip,
                           std::uint64_t limit) {
  std::string path = "/api/runs?filter=" + encode_query_value(canonical_json(filter)) +
                     "&skip=" + std::to_string(skip) + "&limit=" + std::to_string(limit);
  if (!sort.empty()) path += "&sort=" + encode_query_value(sort);
  return get_json(path);
}

}  // namespace altar
