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

#include "altar/blob_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>

#include "altar/doc_store.hpp"
#include "altar/error.hpp"
#include "altar/model.hpp"

namespace fs = std::filesystem;

namespace altar {

namespace {

constexpr std::string_view kManifestSuffix = ".manifest.json";

[[noreturn]] void fail_errno(const std::string& what, int err = errno) {
  fail(err == ENOSPC || err == EDQUOT ? ErrorCode::StorageFull : ErrorCode::IoFailure,
       what + ": " + std::strerror(err));
}

void sync_directory(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

int make_staged_file(const fs::path& dir, fs::path& out) {
  std::string tmpl = (dir / "upload-XXXXXX").string();
  const int fd = ::mkostemp(tmpl.data(), O_CLOEXEC);
  if (fd < 0) fail_errno("mkstemp in " + dir.string());
  out = tmpl;
  return fd;
}

void write_fd(int fd, std::string_view bytes, const fs::path& path) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_errno("write " + path.string());
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

Json owner_json(const BlobOwner& o) {
  return Json{{"run_id", o.run_id},
              {"experiment_name", o.experiment_name},
              {"original_filename", o.original_filename},
              {"config_snapshot", o.config_snapshot}};
}

}  // namespace

// ---------------------------------------------------------------------------
// LocalFsBackend

LocalFsBackend::LocalFsBackend(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "objects", ec);
  fs::create_directories(root_ / "tmp", ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + root_.string() + ": " + ec.message());
}

fs::path LocalFsBackend::staging_dir() const { return root_ / "tmp"; }

fs::path LocalFsBackend::path_of(const std::string& key) const { return root_ / key; }

bool LocalFsBackend::put_file_if_absent(const std::string& key, const fs::path& staged) {
  const fs::path target = path_of(key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + target.parent_path().string());
  if (fs::exists(target, ec)) {
    fs::remove(staged, ec);
    return false;
  }
  // A concurrent writer of the same content may win between the check and
  // the rename; both files hold identical bytes, so either outcome is valid.
  if (::rename(staged.c_str(), target.c_str()) != 0) {
    const int err = errno;
    fs::remove(staged, ec);
    fail_errno("rename into " + target.string(), err);
  }
  sync_directory(target.parent_path());
  return true;
}

void LocalFsBackend::put_bytes(const std::string& key, std::string_view bytes) {
  const fs::path target = path_of(key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  fs::path staged;
  const int fd = make_staged_file(staging_dir(), staged);
  try {
    write_fd(fd, bytes, staged);
    if (::fsync(fd) != 0) fail_errno("fsync " + staged.string());
  } catch (...) {
    ::close(fd);
    fs::remove(staged, ec);
    throw;
  }
  ::close(fd);
  if (::rename(staged.c_str(), target.c_str()) != 0) {
    const int err = errno;
    fs::remove(staged, ec);
    fail_errno("rename into " + target.string(), err);
  }
  sync_directory(target.parent_path());
}

std::optional<ObjectStat> LocalFsBackend::stat(const std::string& key) const {
  std::error_code ec;
  const auto size = fs::file_size(path_of(key), ec);
  if (ec) return std::nullopt;
  return ObjectStat{key, size};
}

std::unique_ptr<std::istream> LocalFsBackend::open(const std::string& key) const {
  auto in = std::make_unique<std::ifstream>(path_of(key), std::ios::binary);
  if (!*in) return nullptr;
  return in;
}

std::vector<ObjectStat> LocalFsBackend::list(std::string_view prefix) const {
  std::vector<ObjectStat> out;
  const fs::path objects = root_ / "objects";
  std::error_code ec;
  for (fs::recursive_directory_iterator it(objects, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file(ec)) continue;
    std::string key = fs::relative(it->path(), root_, ec).generic_string();
    if (key.compare(0, prefix.size(), prefix) != 0) continue;
    out.push_back({std::move(key), it->file_size(ec)});
  }
  std::sort(out.begin(), out.end(),
            [](const ObjectStat& a, const ObjectStat& b) { return a.key < b.key; });
  return out;
}

void LocalFsBackend::remove(const std::string& key) {
  std::error_code ec;
  fs::remove(path_of(key), ec);
}

// ---------------------------------------------------------------------------
// Manifest

Json to_json(const BlobManifest& m) {
  Json owners = Json::array();
  for (const auto& o : m.owners) owners.push_back(owner_json(o));
  return Json{{"uid", m.uid},
              {"size_bytes", m.size_bytes},
              {"created_at", format_timestamp(m.created_at)},
              {"owners", std::move(owners)}};
}

BlobManifest manifest_from_json(const Json& j) {
  try {
    BlobManifest m;
    m.uid = j.at("uid").get<std::string>();
    m.size_bytes = j.at("size_bytes").get<std::uint64_t>();
    auto t = parse_timestamp(j.at("created_at").get<std::string>());
    if (!t) fail(ErrorCode::InvalidArgument, "bad manifest timestamp");
    m.created_at = *t;
    for (const auto& o : j.at("owners")) {
      m.owners.push_back({o.at("run_id").get<std::int64_t>(),
                          o.at("experiment_name").get<std::string>(),
                          o.at("original_filename").get<std::string>(),
                          o.at("config_snapshot")});
    }
    return m;
  } catch (const Json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// BlobWriter

BlobWriter::BlobWriter(fs::path path) : path_(std::move(path)), hasher_(std::make_unique<Sha256>()) {}

BlobWriter::BlobWriter(BlobWriter&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      size_(other.size_),
      hasher_(std::move(other.hasher_)),
      uid_(std::move(other.uid_)),
      finished_(other.finished_),
      released_(std::exchange(other.released_, true)) {}

BlobWriter& BlobWriter::operator=(BlobWriter&& other) noexcept {
  if (this != &other) {
    discard();
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    size_ = other.size_;
    hasher_ = std::move(other.hasher_);
    uid_ = std::move(other.uid_);
    finished_ = other.finished_;
    released_ = std::exchange(other.released_, true);
  }
  return *this;
}

BlobWriter::~BlobWriter() { discard(); }

void BlobWriter::write(std::string_view bytes) {
  if (finished_ || fd_ < 0) fail(ErrorCode::InvalidArgument, "blob writer is closed");
  write_fd(fd_, bytes, path_);
  hasher_->update(bytes);
  size_ += bytes.size();
}

const std::string& BlobWriter::finish() {
  if (!finished_) {
    if (fd_ < 0) fail(ErrorCode::InvalidArgument, "blob writer is closed");
    if (::fsync(fd_) != 0) fail_errno("fsync " + path_.string());
    ::close(fd_);
    fd_ = -1;
    uid_ = hasher_->hex_digest();
    finished_ = true;
  }
  return uid_;
}

std::string BlobWriter::read_all() const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot reopen " + path_.string());
  std::string bytes(size_, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(size_));
  if (static_cast<std::uint64_t>(in.gcount()) != size_) {
    fail(ErrorCode::IoFailure, "short read of " + path_.string());
  }
  return bytes;
}

void BlobWriter::discard() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (!released_ && !path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  released_ = true;
}

// ---------------------------------------------------------------------------
// BlobStore

BlobStore::BlobStore(std::unique_ptr<ObjectBackend> backend, Clock clock)
    : backend_(std::move(backend)), clock_(std::move(clock)) {}

BlobStore::BlobStore(const fs::path& root, Clock clock)
    : BlobStore(std::make_unique<LocalFsBackend>(root), std::move(clock)) {}

std::string BlobStore::object_key(const std::string& uid) {
  return "objects/" + uid.substr(0, 2) + "/" + uid;
}

std::string BlobStore::manifest_key(const std::string& uid) {
  return object_key(uid) + std::string(kManifestSuffix);
}

BlobWriter BlobStore::begin_write() {
  fs::path staged;
  const int fd = make_staged_file(backend_->staging_dir(), staged);
  BlobWriter w(std::move(staged));
  w.fd_ = fd;
  return w;
}

std::string BlobStore::commit(BlobWriter& writer, const BlobOwner& owner) {
  const std::string uid = writer.finish();
  const std::uint64_t size = writer.size();
  backend_->put_file_if_absent(object_key(uid), writer.staged_path());
  writer.released_ = true;

  std::lock_guard lock(manifest_mu_);
  BlobManifest m;
  if (auto in = backend_->open(manifest_key(uid))) {
    std::string text((std::istreambuf_iterator<char>(*in)), std::istreambuf_iterator<char>());
    m = manifest_from_json(parse_json(text, ErrorCode::IoFailure));
  } else {
    m.uid = uid;
    m.size_bytes = size;
    m.created_at = clock_();
  }
  const bool known = std::any_of(m.owners.begin(), m.owners.end(), [&](const BlobOwner& o) {
    return o.run_id == owner.run_id && o.original_filename == owner.original_filename;
  });
  if (!known) {
    m.owners.push_back(owner);
    backend_->put_bytes(manifest_key(uid), canonical_json(to_json(m)));
  }
  return uid;
}

std::string BlobStore::put(std::istream& in, const BlobOwner& owner) {
  BlobWriter w = begin_write();
  std::string buf(1 << 16, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n > 0) w.write(std::string_view(buf.data(), n));
  }
  if (in.bad()) fail(ErrorCode::IoFailure, "read error while staging blob");
  return commit(w, owner);
}

bool BlobStore::contains(const std::string& uid) const {
  return is_sha256_hex(uid) && backend_->stat(object_key(uid)).has_value();
}

std::uint64_t BlobStore::size_of(const std::string& uid) const {
  auto st = is_sha256_hex(uid) ? backend_->stat(object_key(uid)) : std::nullopt;
  if (!st) fail(ErrorCode::NotFound, "blob " + uid + " not found");
  return st->size_bytes;
}

BlobManifest BlobStore::manifest(const std::string& uid) const {
  if (!is_sha256_hex(uid)) fail(ErrorCode::InvalidArgument, "malformed uid '" + uid + "'");
  auto in = backend_->open(manifest_key(uid));
  if (!in) fail(ErrorCode::NotFound, "no manifest for blob " + uid);
  std::string text((std::istreambuf_iterator<char>(*in)), std::istreambuf_iterator<char>());
  return manifest_from_json(parse_json(text, ErrorCode::IoFailure));
}

bool BlobStore::verify(const std::string& uid) const {
  auto in = backend_->open(object_key(uid));
  if (!in) fail(ErrorCode::NotFound, "blob " + uid + " not found");
  Sha256 h;
  std::string buf(1 << 16, '\0');
  while (*in) {
    in->read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in->gcount())));
  }
  return h.hex_digest() == uid;
}

BlobRead BlobStore::get(const std::string& uid, bool verify_bytes) const {
  if (!is_sha256_hex(uid)) fail(ErrorCode::InvalidArgument, "malformed uid '" + uid + "'");
  if (!contains(uid)) fail(ErrorCode::NotFound, "blob " + uid + " not found");
  if (verify_bytes && !verify(uid)) {
    fail(ErrorCode::HashMismatch, "blob " + uid + " does not match its hash");
  }
  BlobRead r;
  r.manifest = manifest(uid);
  r.stream = backend_->open(object_key(uid));
  if (!r.stream) fail(ErrorCode::NotFound, "blob " + uid + " not found");
  return r;
}

std::vector<std::string> BlobStore::list_uids() const {
  std::vector<std::string> uids;
  for (const auto& st : backend_->list("objects/")) {
    const auto slash = st.key.rfind('/');
    const std::string name = st.key.substr(slash + 1);
    if (is_sha256_hex(name)) uids.push_back(name);
  }
  std::sort(uids.begin(), uids.end());
  return uids;
}

std::size_t BlobStore::cleanup_staging() {
  std::size_t removed = 0;
  std::error_code ec;
  for (fs::directory_iterator it(backend_->staging_dir(), ec), end; !ec && it != end;
       it.increment(ec)) {
    if (fs::remove(it->path(), ec)) ++removed;
  }
  return removed;
}

// ---------------------------------------------------------------------------

Json to_json(const IntegrityReport& report) {
  Json dangling = Json::array();
  for (const auto& d : report.dangling_refs) {
    dangling.push_back({{"run_id", d.run_id}, {"artifact_name", d.artifact_name}, {"blob_uid", d.blob_uid}});
  }
  return Json{{"orphan_blobs", report.orphan_blobs},
              {"dangling_refs", std::move(dangling)},
              {"corrupt", report.corrupt}};
}

IntegrityReport scan_integrity(const BlobStore& blobs, const DocStore& docs) {
  IntegrityReport report;
  const auto stored = blobs.list_uids();
  const std::set<std::string> present(stored.begin(), stored.end());
  std::set<std::string> referenced;

  docs.for_each("runs", [&](std::int64_t id, const Json& doc) {
    auto arts = doc.find("artifacts");
    if (arts == doc.end() || !arts->is_array()) return;
    for (const auto& a : *arts) {
      if (a.value("kind", std::string()) != "BLOB") continue;
      const std::string uid = a.value("blob_uid", std::string());
      referenced.insert(uid);
      if (!present.count(uid)) {
        report.dangling_refs.push_back({id, a.value("name", std::string()), uid});
      }
    }
  });

  for (const auto& uid : stored) {
    if (!referenced.count(uid)) report.orphan_blobs.push_back(uid);
    if (!blobs.verify(uid)) report.corrupt.push_back(uid);
  }
  return report;
}

}  // namespace altar
