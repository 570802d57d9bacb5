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

// Embedded, journal-backed document store.
//
// On-disk layout, one journal per collection:
//
//   <dir>/runs.jsonl  metrics.jsonl  annotations.jsonl  counters.jsonl
//   <dir>/files.jsonl  LOCK
//
// Each journal line is the canonical JSON of
//   {"doc":{...},"id":K,"op":"insert"|"update"|"delete","seq":N}
// with seq strictly increasing within the file. Every acknowledged write is
// fsync'ed before the call returns. On open, journals are replayed; a final
// line missing its newline is a torn write and is dropped (and truncated
// away), while an unreadable complete line raises CorruptJournal.
//
// One writer at a time; readers share a lock and see a consistent snapshot
// per call. A flock(2) on LOCK keeps other processes out.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "altar/json.hpp"

namespace altar {

inline constexpr std::uint64_t kMaxQueryLimit = 1000;

struct SortKey {
  std::string path;
  bool descending = false;
};

struct Record {
  std::int64_t id = 0;
  Json doc;
};

struct QueryResult {
  std::uint64_t total_matched = 0;
  std::vector<Record> page;
};

class DocStore {
 public:
  static const std::vector<std::string>& collections();

  // Opens (creating if needed) the store in `dir` and replays its journals.
  explicit DocStore(const std::filesystem::path& dir);
  ~DocStore();

  DocStore(const DocStore&) = delete;
  DocStore& operator=(const DocStore&) = delete;

  const std::filesystem::path& directory() const { return dir_; }

  // Increments the named counter in `counters` and returns the new value.
  // The first call for a name returns 1.
  std::int64_t allocate_id(std::string_view counter);
  std::int64_t allocate_run_id() { return allocate_id("runs"); }

  // Inserts under the next free id of the collection.
  std::int64_t insert(std::string_view collection, const Json& doc);
  // Inserts under an explicit id; Conflict if it is taken.
  void insert(std::string_view collection, std::int64_t id, const Json& doc);

  Json get(std::string_view collection, std::int64_t id) const;
  std::optional<Json> find(std::string_view collection, std::int64_t id) const;

  // Replaces the document. In `runs`, a stored document whose status is
  // terminal is frozen: update and remove raise ImmutableRecord.
  void update(std::string_view collection, std::int64_t id, const Json& doc);
  void remove(std::string_view collection, std::int64_t id);

  // limit must be <= kMaxQueryLimit (LimitExceeded). Matches are ordered by
  // the sort keys (missing values first when ascending; cross-type order
  // null < bool < number < string < list < map) and then by id.
  QueryResult query(std::string_view collection, const Json& filter,
                    const std::vector<SortKey>& sort, std::uint64_t skip,
                    std::uint64_t limit) const;

  // Ids of every match in ascending order, without copying documents.
  std::vector<std::int64_t> find_ids(std::string_view collection, const Json& filter) const;

  std::size_t size(std::string_view collection) const;

  // Visits every record under the read lock, in id order.
  void for_each(std::string_view collection,
                const std::function<void(std::int64_t, const Json&)>& fn) const;

  // Rewrites every journal as one insert per live record and atomically
  // replaces the old files.
  void compact();

 private:
  struct Journal;
  struct Collection {
    std::map<std::int64_t, Json> records;
    std::int64_t next_id = 1;
    std::unique_ptr<Journal> journal;
  };

  Collection& collection(std::string_view name);
  const Collection& collection(std::string_view name) const;
  void replay(const std::string& name, Collection& c);
  void append(Collection& c, std::string_view op, std::int64_t id, const Json* doc);
  void check_mutable(std::string_view name, const Collection& c, std::int64_t id) const;

  std::filesystem::path dir_;
  int lock_fd_ = -1;
  mutable std::shared_mutex mu_;
  std::map<std::string, Collection, std::less<>> collections_;
};

}  // namespace altar
