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

// Content-identified large-file store.
//
// A blob's uid is the lowercase hex SHA-256 of its bytes. Layout under the
// store root:
//
//   objects/<uid[0:2]>/<uid>                 the bytes
//   objects/<uid[0:2]>/<uid>.manifest.json   owners and config snapshots
//   tmp/                                     staged uploads
//
// Uploads are staged in tmp/ while being hashed and then renamed into place,
// so objects/ never holds a file whose hash differs from its name. Putting
// content that already exists keeps the existing object and appends an
// owner to its manifest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "altar/hash.hpp"
#include "altar/json.hpp"
#include "altar/time.hpp"

namespace altar {

class DocStore;

struct ObjectStat {
  std::string key;
  std::uint64_t size_bytes = 0;
};

// Object-store style backend: flat keys, whole-object writes, no partial
// updates. The local filesystem implementation maps keys to relative paths.
class ObjectBackend {
 public:
  virtual ~ObjectBackend() = default;

  // Local scratch space for uploads; staged files are handed to put_file.
  virtual std::filesystem::path staging_dir() const = 0;

  // Moves the staged file under `key` unless the key already exists, in
  // which case the staged file is deleted. Returns true if it was stored.
  virtual bool put_file_if_absent(const std::string& key, const std::filesystem::path& staged) = 0;

  // Atomically creates or replaces a small object.
  virtual void put_bytes(const std::string& key, std::string_view bytes) = 0;

  virtual std::optional<ObjectStat> stat(const std::string& key) const = 0;
  virtual std::unique_ptr<std::istream> open(const std::string& key) const = 0;
  virtual std::vector<ObjectStat> list(std::string_view prefix) const = 0;
  virtual void remove(const std::string& key) = 0;
};

class LocalFsBackend final : public ObjectBackend {
 public:
  explicit LocalFsBackend(std::filesystem::path root);

  std::filesystem::path staging_dir() const override;
  bool put_file_if_absent(const std::string& key, const std::filesystem::path& staged) override;
  void put_bytes(const std::string& key, std::string_view bytes) override;
  std::optional<ObjectStat> stat(const std::string& key) const override;
  std::unique_ptr<std::istream> open(const std::string& key) const override;
  std::vector<ObjectStat> list(std::string_view prefix) const override;
  void remove(const std::string& key) override;

  std::filesystem::path path_of(const std::string& key) const;

 private:
  std::filesystem::path root_;
};

struct BlobOwner {
  std::int64_t run_id = 0;
  std::string experiment_name;
  std::string original_filename;
  Json config_snapshot = Json::object();
};

struct BlobManifest {
  std::string uid;
  std::uint64_t size_bytes = 0;
  Timestamp created_at{};
  std::vector<BlobOwner> owners;
};

Json to_json(const BlobManifest& manifest);
BlobManifest manifest_from_json(const Json& j);

// A staged upload. Bytes are hashed as they are written; if the writer is
// destroyed without being committed, the staged file is removed.
class BlobWriter {
 public:
  BlobWriter(BlobWriter&&) noexcept;
  BlobWriter& operator=(BlobWriter&&) noexcept;
  ~BlobWriter();

  void write(std::string_view bytes);

  // Flushes, syncs and closes the staged file; returns the content uid.
  const std::string& finish();

  std::uint64_t size() const { return size_; }
  const std::filesystem::path& staged_path() const { return path_; }

  // Reads the finished staged file back (used for small inline artifacts).
  std::string read_all() const;

  // Deletes the staged file now.
  void discard();

 private:
  friend class BlobStore;
  explicit BlobWriter(std::filesystem::path path);

  std::filesystem::path path_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
  std::unique_ptr<Sha256> hasher_;
  std::string uid_;
  bool finished_ = false;
  bool released_ = false;
};

struct BlobRead {
  std::unique_ptr<std::istream> stream;
  BlobManifest manifest;
};

class BlobStore {
 public:
  explicit BlobStore(std::unique_ptr<ObjectBackend> backend, Clock clock = system_now);
  // Local filesystem store rooted at `root`.
  explicit BlobStore(const std::filesystem::path& root, Clock clock = system_now);

  BlobWriter begin_write();

  // Finishes the writer if needed, moves the bytes into objects/ and records
  // the owner in the manifest. Returns the uid.
  std::string commit(BlobWriter& writer, const BlobOwner& owner);

  // Streams `in` into the store.
  std::string put(std::istream& in, const BlobOwner& owner);

  bool contains(const std::string& uid) const;
  std::uint64_t size_of(const std::string& uid) const;
  BlobManifest manifest(const std::string& uid) const;

  // NotFound for unknown uids; with verify, the bytes are re-hashed first and
  // a mismatch raises HashMismatch.
  BlobRead get(const std::string& uid, bool verify = false) const;

  // Re-hashes the stored bytes.
  bool verify(const std::string& uid) const;

  // Every stored object uid, sorted.
  std::vector<std::string> list_uids() const;

  // Removes leftover staged files (from crashed uploads). Returns the count.
  std::size_t cleanup_staging();

  ObjectBackend& backend() { return *backend_; }

  static std::string object_key(const std::string& uid);
  static std::string manifest_key(const std::string& uid);

 private:
  std::unique_ptr<ObjectBackend> backend_;
  Clock clock_;
  std::mutex manifest_mu_;
};

struct DanglingRef {
  std::int64_t run_id = 0;
  std::string artifact_name;
  std::string blob_uid;
};

struct IntegrityReport {
  std::vector<std::string> orphan_blobs;
  std::vector<DanglingRef> dangling_refs;
  std::vector<std::string> corrupt;

  bool clean() const { return orphan_blobs.empty() && dangling_refs.empty() && corrupt.empty(); }
};

Json to_json(const IntegrityReport& report);

// orphan: stored object with no BLOB artifact referencing it.
// dangling: BLOB artifact whose object is absent.
// corrupt: stored object whose bytes do not hash to its uid.
IntegrityReport scan_integrity(const BlobStore& blobs, const DocStore& docs);

}  // namespace altar
