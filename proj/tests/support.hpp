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

// Shared fixtures and independent oracles. Nothing here calls into the
// filter, sort or flatten code under test.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "altar/http_server.hpp"
#include "altar/json.hpp"
#include "altar/run_service.hpp"

namespace testing {

namespace fs = std::filesystem;
using altar::Json;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "altar-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string out(n, '\0');
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, 8);
  }
  for (; i < n; ++i) out[i] = static_cast<char>(rng());
  return out;
}

inline void write_random_file(const fs::path& p, std::uint64_t size, std::uint64_t seed) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  std::mt19937_64 rng(seed);
  std::string chunk(1 << 20, '\0');
  for (std::uint64_t left = size; left > 0;) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(left, chunk.size()));
    for (std::size_t i = 0; i < n; ++i) chunk[i] = static_cast<char>(rng() >> 56);
    out.write(chunk.data(), static_cast<std::streamsize>(n));
    left -= n;
  }
}

// SHA-256 computed by the system's coreutils, used as an external oracle.
inline std::string sha256sum_tool(const fs::path& p) {
  const std::string cmd = "sha256sum '" + p.string() + "'";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  char buf[128] = {0};
  std::string out;
  if (std::fgets(buf, sizeof buf, pipe)) out = buf;
  pclose(pipe);
  return out.substr(0, 64);
}

// RunService plus HttpServer on an ephemeral loopback port.
class TestServer {
 public:
  explicit TestServer(altar::ServiceConfig config = {}, fs::path data_dir = {}) {
    if (data_dir.empty()) {
      owned_ = std::make_unique<TempDir>();
      data_dir = owned_->path() / "data";
    }
    config.data_dir = data_dir;
    config.listen_address = "127.0.0.1:0";
    service_ = std::make_unique<altar::RunService>(std::move(config));
    http_ = std::make_unique<altar::HttpServer>(*service_);
    port_ = http_->bind("127.0.0.1:0");
    thread_ = std::thread([this] { http_->serve(); });
  }
  ~TestServer() {
    http_->stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }
  altar::RunService& service() { return *service_; }
  const fs::path& data_dir() const { return service_->config().data_dir; }

 private:
  std::unique_ptr<TempDir> owned_;
  std::unique_ptr<altar::RunService> service_;
  std::unique_ptr<altar::HttpServer> http_;
  int port_ = 0;
  std::thread thread_;
};

// ---------------------------------------------------------------------------
// Naive oracle for filters and sorts.

namespace oracle {

inline std::vector<std::string> split(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline const Json* lookup(const Json& doc, const std::string& path) {
  const Json* node = &doc;
  for (const auto& seg : split(path)) {
    if (node->is_object()) {
      auto it = node->find(seg);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else if (node->is_array()) {
      if (seg.empty() || seg.size() > 9) return nullptr;
      if (seg.size() > 1 && seg[0] == '0') return nullptr;
      for (char c : seg) {
        if (c < '0' || c > '9') return nullptr;
      }
      const std::size_t idx = std::stoul(seg);
      if (idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else {
      return nullptr;
    }
  }
  return node;
}

// x87 long double holds every int64 and every double exactly.
inline long double as_ld(const Json& v) {
  if (v.is_number_integer() && v.is_number_unsigned()) return static_cast<long double>(v.get<std::uint64_t>());
  if (v.is_number_integer()) return static_cast<long double>(v.get<std::int64_t>());
  return static_cast<long double>(v.get<double>());
}

inline int rank(const Json& v) {
  if (v.is_null()) return 0;
  if (v.is_boolean()) return 1;
  if (v.is_number()) return 2;
  if (v.is_string()) return 3;
  if (v.is_array()) return 4;
  return 5;
}

inline int sign(long double x) { return (x > 0) - (x < 0); }

inline int total(const Json& a, const Json& b) {
  const int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 1) return int(a.get<bool>()) - int(b.get<bool>());
  if (ra == 2) return sign(as_ld(a) - as_ld(b));
  if (ra == 3) {
    const auto& sa = a.get_ref<const std::string&>();
    const auto& sb = b.get_ref<const std::string&>();
    return sa < sb ? -1 : (sb < sa ? 1 : 0);
  }
  if (ra == 4) {
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      if (int c = total(a[i], b[i])) return c;
    }
    return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
  }
  std::vector<std::pair<std::string, Json>> ea, eb;
  for (auto& [k, v] : a.items()) ea.emplace_back(k, v);
  for (auto& [k, v] : b.items()) eb.emplace_back(k, v);
  std::sort(ea.begin(), ea.end(), [](auto& x, auto& y) { return x.first < y.first; });
  std::sort(eb.begin(), eb.end(), [](auto& x, auto& y) { return x.first < y.first; });
  for (std::size_t i = 0; i < ea.size() && i < eb.size(); ++i) {
    if (ea[i].first != eb[i].first) return ea[i].first < eb[i].first ? -1 : 1;
    if (int c = total(ea[i].second, eb[i].second)) return c;
  }
  return ea.size() < eb.size() ? -1 : (ea.size() > eb.size() ? 1 : 0);
}

inline bool equal(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return as_ld(a) == as_ld(b);
  if (rank(a) != rank(b)) return false;
  return total(a, b) == 0;
}

// Ordering operators: numbers with numbers, strings with strings.
inline bool ordered(const Json& a, const Json& b, int& out) {
  if (a.is_number() && b.is_number()) {
    out = sign(as_ld(a) - as_ld(b));
    return true;
  }
  if (a.is_string() && b.is_string()) {
    out = total(a, b);
    return true;
  }
  return false;
}

inline bool op_holds(const std::string& op, const Json* v, const Json& arg) {
  if (op == "$exists") return (v != nullptr) == arg.get<bool>();
  if (op == "$ne") return v == nullptr || !equal(*v, arg);
  if (v == nullptr) return false;
  if (op == "$eq") return equal(*v, arg);
  if (op == "$in") {
    for (const auto& x : arg) {
      if (equal(*v, x)) return true;
    }
    return false;
  }
  if (op == "$contains") {
    return v->is_string() && arg.is_string() &&
           v->get<std::string>().find(arg.get<std::string>()) != std::string::npos;
  }
  int c = 0;
  if (!ordered(*v, arg, c)) return false;
  if (op == "$lt") return c < 0;
  if (op == "$lte") return c <= 0;
  if (op == "$gt") return c > 0;
  if (op == "$gte") return c >= 0;
  throw std::logic_error("unknown operator " + op);
}

inline bool match(const Json& filter, const Json& doc) {
  for (auto& [path, cond] : filter.items()) {
    const Json* v = lookup(doc, path);
    if (!cond.is_object()) {
      if (v == nullptr || !equal(*v, cond)) return false;
      continue;
    }
    for (auto& [op, arg] : cond.items()) {
      if (!op_holds(op, v, arg)) return false;
    }
  }
  return true;
}

struct SortSpec {
  std::string path;
  bool descending = false;
};

// Returns ids in result order.
inline std::vector<std::int64_t> run_query(const std::vector<std::pair<std::int64_t, Json>>& docs,
                                           const Json& filter, const std::vector<SortSpec>& sort,
                                           std::uint64_t& total_out) {
  std::vector<std::pair<std::int64_t, const Json*>> hits;
  for (const auto& [id, doc] : docs) {
    if (match(filter, doc)) hits.emplace_back(id, &doc);
  }
  total_out = hits.size();
  std::sort(hits.begin(), hits.end(), [&](const auto& x, const auto& y) {
    for (const auto& s : sort) {
      const Json* a = lookup(*x.second, s.path);
      const Json* b = lookup(*y.second, s.path);
      int c;
      if (a == nullptr && b == nullptr) {
        c = 0;
      } else if (a == nullptr) {
        c = -1;
      } else if (b == nullptr) {
        c = 1;
      } else {
        c = total(*a, *b);
      }
      if (s.descending) c = -c;
      if (c != 0) return c < 0;
    }
    return x.first < y.first;
  });
  std::vector<std::int64_t> ids;
  for (const auto& h : hits) ids.push_back(h.first);
  return ids;
}

// Recursive leaf walk used to cross-check flatten_paths.
inline void leaves(const Json& node, const std::string& prefix, std::vector<std::pair<std::string, Json>>& out) {
  if (node.is_object()) {
    for (auto& [k, v] : node.items()) leaves(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      leaves(node[i], prefix.empty() ? std::to_string(i) : prefix + "." + std::to_string(i), out);
    }
  } else {
    out.emplace_back(prefix, node);
  }
}

}  // namespace oracle

// ---------------------------------------------------------------------------
// Random heterogeneous documents and filters.

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  Json scalar() {
    switch (uniform(0, 9)) {
      case 0: return nullptr;
      case 1: return coin();
      case 2:
      case 3: return uniform(-3, 3);
      case 4: return pick(std::vector<double>{-1.5, 0.0, 1.0, 2.5, 3.0, 0.1});
      case 5: return pick(std::vector<std::int64_t>{9007199254740993LL, 9007199254740992LL, -7});
      case 6: return pick(std::vector<double>{9007199254740992.0, 1e300, -0.5});
      default:
        return pick(std::vector<std::string>{"", "a", "ab", "b", "get_movie", "Get", "movie", "\xc3\xa9t\xc3\xa9"});
    }
  }

  Json value(int depth) {
    const int kind = depth <= 0 ? 0 : uniform(0, 9);
    if (kind <= 6) return scalar();
    if (kind <= 7) {
      Json list = Json::array();
      for (int i = uniform(0, 3); i > 0; --i) list.push_back(value(depth - 1));
      return list;
    }
    return object(depth - 1);
  }

  Json object(int depth) {
    Json obj = Json::object();
    for (const auto& key : keys_) {
      if (coin(0.65)) obj[key] = value(depth);
    }
    return obj;
  }

  Json document() { return object(3); }

  std::string path() {
    static const std::vector<std::string> top = {"a", "b", "c", "name"};
    static const std::vector<std::string> deep = {"a.a", "a.b", "b.c", "c.0", "c.1",
                                                  "a.c.0", "name.a", "missing", "b.b.b"};
    return coin(0.6) ? pick(top) : pick(deep);
  }

  Json filter() {
    static const std::vector<std::string> ops = {"$eq", "$ne", "$gt", "$gte", "$lt",
                                                 "$lte", "$in", "$contains", "$exists"};
    Json f = Json::object();
    for (int n = coin(0.1) ? 0 : uniform(1, 2); n > 0; --n) {
      const std::string p = path();
      if (coin(0.3)) {
        f[p] = scalar();
        continue;
      }
      Json cond = Json::object();
      for (int m = coin(0.7) ? 1 : 2; m > 0; --m) {
        const std::string op = pick(ops);
        if (op == "$in") {
          Json list = Json::array();
          for (int k = uniform(0, 4); k > 0; --k) list.push_back(scalar());
          cond[op] = list;
        } else if (op == "$exists") {
          cond[op] = coin();
        } else {
          cond[op] = scalar();
        }
      }
      f[p] = cond;
    }
    return f;
  }

  std::vector<oracle::SortSpec> sort() {
    std::vector<oracle::SortSpec> s;
    for (int n = uniform(0, 2); n > 0; --n) s.push_back({path(), coin()});
    return s;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> keys_ = {"a", "b", "c", "name"};
};

}  // namespace testing
