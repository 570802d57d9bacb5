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

#include "altar/doc_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "altar/error.hpp"
#include "altar/filter.hpp"
#include "altar/model.hpp"

namespace fs = std::filesystem;

namespace altar {

namespace {

[[noreturn]] void fail_errno(const std::string& what) {
  const int err = errno;
  fail(err == ENOSPC || err == EDQUOT ? ErrorCode::StorageFull : ErrorCode::IoFailure,
       what + ": " + std::strerror(err));
}

void write_all(int fd, std::string_view bytes, const std::string& what) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_errno(what);
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void sync_directory(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

bool is_terminal_run(const Json& doc) {
  auto it = doc.find("status");
  if (it == doc.end() || !it->is_string()) return false;
  auto s = parse_run_status(it->get<std::string>());
  return s && is_terminal(*s);
}

Json journal_line(std::string_view op, std::int64_t id, const Json* doc, std::uint64_t seq) {
  Json line = {{"seq", seq}, {"op", op}, {"id", id}};
  line["doc"] = doc ? *doc : Json(nullptr);
  return line;
}

}  // namespace

struct DocStore::Journal {
  fs::path path;
  int fd = -1;
  std::uint64_t next_seq = 1;
  std::uint64_t size = 0;

  ~Journal() {
    if (fd >= 0) ::close(fd);
  }

  void open_for_append() {
    fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) fail_errno("open " + path.string());
  }

  // Appends one line durably. A failed write is rolled back so the journal
  // never holds a torn line followed by good ones.
  void append(const std::string& line) {
    try {
      write_all(fd, line, "write " + path.string());
      if (::fsync(fd) != 0) fail_errno("fsync " + path.string());
    } catch (...) {
      if (::ftruncate(fd, static_cast<off_t>(size)) == 0) ::fsync(fd);
      throw;
    }
    size += line.size();
    ++next_seq;
  }
};

const std::vector<std::string>& DocStore::collections() {
  static const std::vector<std::string> kNames = {"runs", "metrics", "annotations",
                                                  "counters", "files"};
  return kNames;
}

DocStore::DocStore(const fs::path& dir) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir_.string() + ": " + ec.message());

  const fs::path lock_path = dir_ / "LOCK";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) fail_errno("open " + lock_path.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    fail(ErrorCode::LockHeld, "store " + dir_.string() + " is locked by another owner");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(lock_fd_, 0) == 0) {
    [[maybe_unused]] auto n = ::pwrite(lock_fd_, pid.data(), pid.size(), 0);
  }

  try {
    for (const auto& name : collections()) {
      Collection c;
      c.journal = std::make_unique<Journal>();
      c.journal->path = dir_ / (name + ".jsonl");
      replay(name, c);
      c.journal->open_for_append();
      collections_.emplace(name, std::move(c));
    }
    sync_directory(dir_);
  } catch (...) {
    collections_.clear();
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw;
  }
}

DocStore::~DocStore() {
  collections_.clear();
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

void DocStore::replay(const std::string& name, Collection& c) {
  Journal& j = *c.journal;
  std::ifstream in(j.path, std::ios::binary);
  if (!in) return;

  std::uint64_t good_bytes = 0;
  std::uint64_t last_seq = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (in.eof()) break;  // no trailing newline: torn tail
    auto where = [&] { return j.path.string() + ":" + std::to_string(line_no); };
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::CorruptJournal, where() + ": " + e.what());
    }
    auto seq = rec.find("seq");
    auto op = rec.find("op");
    auto id = rec.find("id");
    auto doc = rec.find("doc");
    if (!rec.is_object() || seq == rec.end() || !seq->is_number_unsigned() ||
        op == rec.end() || !op->is_string() || id == rec.end() ||
        !id->is_number_integer() || doc == rec.end()) {
      fail(ErrorCode::CorruptJournal, where() + ": malformed record");
    }
    const auto s = seq->get<std::uint64_t>();
    if (s <= last_seq) fail(ErrorCode::CorruptJournal, where() + ": sequence not increasing");
    last_seq = s;
    const auto key = id->get<std::int64_t>();
    const auto& kind = op->get_ref<const std::string&>();
    if (kind == "insert" || kind == "update") {
      if (!doc->is_object()) fail(ErrorCode::CorruptJournal, where() + ": missing document");
      c.records[key] = std::move(*doc);
    } else if (kind == "delete") {
      c.records.erase(key);
    } else {
      fail(ErrorCode::CorruptJournal, where() + ": unknown op '" + kind + "'");
    }
    c.next_id = std::max(c.next_id, key + 1);
    good_bytes += line.size() + 1;
  }
  in.close();

  j.next_seq = last_seq + 1;
  j.size = good_bytes;
  std::error_code ec;
  if (fs::file_size(j.path, ec) != good_bytes && !ec) {
    fs::resize_file(j.path, good_bytes, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot drop torn tail of " + name + ": " + ec.message());
  }
}

DocStore::Collection& DocStore::collection(std::string_view name) {
  auto it = collections_.find(name);
  if (it == collections_.end()) {
    fail(ErrorCode::InvalidArgument, "unknown collection '" + std::string(name) + "'");
  }
  return it->second;
}

const DocStore::Collection& DocStore::collection(std::string_view name) const {
  return const_cast<DocStore*>(this)->collection(name);
}

void DocStore::append(Collection& c, std::string_view op, std::int64_t id, const Json* doc) {
  c.journal->append(canonical_json(journal_line(op, id, doc, c.journal->next_seq)) + "\n");
}

void DocStore::check_mutable(std::string_view name, const Collection& c, std::int64_t id) const {
  if (name != "runs") return;
  auto it = c.records.find(id);
  if (it != c.records.end() && is_terminal_run(it->second)) {
    fail(ErrorCode::ImmutableRecord, "run " + std::to_string(id) + " is terminal");
  }
}

std::int64_t DocStore::allocate_id(std::string_view counter) {
  std::unique_lock lock(mu_);
  Collection& c = collection("counters");
  std::int64_t slot = 0;
  std::int64_t value = 0;
  for (const auto& [id, doc] : c.records) {
    if (doc.value("name", std::string()) == counter) {
      slot = id;
      value = doc.value("value", std::int64_t{0});
      break;
    }
  }
  const Json doc = {{"name", counter}, {"value", value + 1}};
  if (slot == 0) {
    slot = c.next_id;
    append(c, "insert", slot, &doc);
    c.next_id = slot + 1;
  } else {
    append(c, "update", slot, &doc);
  }
  c.records[slot] = doc;
  return value + 1;
}

std::int64_t DocStore::insert(std::string_view name, const Json& doc) {
  const Json clean = validate_config(doc, kMaxDocumentDepth);
  std::unique_lock lock(mu_);
  Collection& c = collection(name);
  const std::int64_t id = c.next_id;
  append(c, "insert", id, &clean);
  c.records[id] = clean;
  c.next_id = id + 1;
  return id;
}

void DocStore::insert(std::string_view name, std::int64_t id, const Json& doc) {
  if (id <= 0) fail(ErrorCode::InvalidArgument, "ids must be positive");
  const Json clean = validate_config(doc, kMaxDocumentDepth);
  std::unique_lock lock(mu_);
  Collection& c = collection(name);
  if (c.records.count(id)) {
    fail(ErrorCode::Conflict, std::string(name) + " id " + std::to_string(id) + " exists");
  }
  append(c, "insert", id, &clean);
  c.records[id] = clean;
  c.next_id = std::max(c.next_id, id + 1);
}

Json DocStore::get(std::string_view name, std::int64_t id) const {
  auto doc = find(name, id);
  if (!doc) fail(ErrorCode::NotFound, std::string(name) + " " + std::to_string(id) + " not found");
  return std::move(*doc);
}

std::optional<Json> DocStore::find(std::string_view name, std::int64_t id) const {
  std::shared_lock lock(mu_);
  const Collection& c = collection(name);
  auto it = c.records.find(id);
  if (it == c.records.end()) return std::nullopt;
  return it->second;
}

void DocStore::update(std::string_view name, std::int64_t id, const Json& doc) {
  const Json clean = validate_config(doc, kMaxDocumentDepth);
  std::unique_lock lock(mu_);
  Collection& c = collection(name);
  if (!c.records.count(id)) {
    fail(ErrorCode::NotFound, std::string(name) + " " + std::to_string(id) + " not found");
  }
  check_mutable(name, c, id);
  append(c, "update", id, &clean);
  c.records[id] = clean;
}

void DocStore::remove(std::string_view name, std::int64_t id) {
  std::unique_lock lock(mu_);
  Collection& c = collection(name);
  if (!c.records.count(id)) {
    fail(ErrorCode::NotFound, std::string(name) + " " + std::to_string(id) + " not found");
  }
  check_mutable(name, c, id);
  append(c, "delete", id, nullptr);
  c.records.erase(id);
}

QueryResult DocStore::query(std::string_view name, const Json& filter,
                            const std::vector<SortKey>& sort, std::uint64_t skip,
                            std::uint64_t limit) const {
  if (limit > kMaxQueryLimit) {
    fail(ErrorCode::LimitExceeded, "limit " + std::to_string(limit) + " exceeds " +
                                       std::to_string(kMaxQueryLimit));
  }
  validate_filter(filter);
  std::shared_lock lock(mu_);
  const Collection& c = collection(name);

  std::vector<std::pair<std::int64_t, const Json*>> hits;
  for (const auto& [id, doc] : c.records) {
    if (matches(filter, doc)) hits.emplace_back(id, &doc);
  }

  auto before = [&](const std::pair<std::int64_t, const Json*>& a,
                    const std::pair<std::int64_t, const Json*>& b) {
    for (const auto& key : sort) {
      const Json* va = resolve_path(*a.second, key.path);
      const Json* vb = resolve_path(*b.second, key.path);
      int cmp;
      if (!va || !vb) {
        cmp = (va != nullptr) - (vb != nullptr);
      } else {
        cmp = compare_total(*va, *vb);
      }
      if (cmp != 0) return key.descending ? cmp > 0 : cmp < 0;
    }
    return a.first < b.first;
  };
  if (!sort.empty()) std::sort(hits.begin(), hits.end(), before);

  QueryResult result;
  result.total_matched = hits.size();
  const std::uint64_t first = std::min<std::uint64_t>(skip, hits.size());
  const std::uint64_t last = std::min<std::uint64_t>(first + limit, hits.size());
  result.page.reserve(last - first);
  for (std::uint64_t i = first; i < last; ++i) {
    result.page.push_back({hits[i].first, *hits[i].second});
  }
  return result;
}

std::vector<std::int64_t> DocStore::find_ids(std::string_view name, const Json& filter) const {
  validate_filter(filter);
  std::shared_lock lock(mu_);
  std::vector<std::int64_t> ids;
  for (const auto& [id, doc] : collection(name).records) {
    if (matches(filter, doc)) ids.push_back(id);
  }
  return ids;
}

std::size_t DocStore::size(std::string_view name) const {
  std::shared_lock lock(mu_);
  return collection(name).records.size();
}

void DocStore::for_each(std::string_view name,
                        const std::function<void(std::int64_t, const Json&)>& fn) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, doc] : collection(name).records) fn(id, doc);
}

void DocStore::compact() {
  std::unique_lock lock(mu_);
  for (auto& [name, c] : collections_) {
    Journal& j = *c.journal;
    const fs::path tmp = j.path.string() + ".compact";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) fail_errno("open " + tmp.string());
    std::uint64_t seq = 1;
    std::uint64_t bytes = 0;
    try {
      std::string buffer;
      for (const auto& [id, doc] : c.records) {
        buffer += canonical_json(journal_line("insert", id, &doc, seq++));
        buffer += '\n';
        if (buffer.size() > (1u << 20)) {
          write_all(fd, buffer, "write " + tmp.string());
          bytes += buffer.size();
          buffer.clear();
        }
      }
      write_all(fd, buffer, "write " + tmp.string());
      bytes += buffer.size();
      if (::fsync(fd) != 0) fail_errno("fsync " + tmp.string());
    } catch (...) {
      ::close(fd);
      ::unlink(tmp.c_str());
      throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), j.path.c_str()) != 0) {
      ::unlink(tmp.c_str());
      fail_errno("rename " + tmp.string());
    }
    ::close(j.fd);
    j.fd = -1;
    j.open_for_append();
    j.next_seq = seq;
    j.size = bytes;
  }
  sync_directory(dir_);
}

}  // namespace altar
