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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <sstream>
#include <thread>

#include "altar/blob_store.hpp"
#include "altar/doc_store.hpp"
#include "altar/error.hpp"
#include "altar/model.hpp"
#include "support.hpp"

using altar::BlobOwner;
using altar::BlobStore;
using altar::ErrorCode;
using altar::Json;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const altar::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoFailure;
}

BlobOwner owner(std::int64_t run_id, const std::string& file = "video.bin") {
  return BlobOwner{run_id, "get_movie", file, Json{{"gain", run_id}}};
}

std::string put_string(BlobStore& store, const std::string& bytes, const BlobOwner& o) {
  std::istringstream in(bytes);
  return store.put(in, o);
}

std::string slurp(std::istream& in) {
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::uint64_t tree_bytes(const fs::path& dir) {
  std::uint64_t total = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) total += e.file_size();
  }
  return total;
}

std::size_t count_files(const fs::path& dir, bool manifests) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const bool is_manifest = e.path().string().find(".manifest.json") != std::string::npos;
    if (is_manifest == manifests) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("put then get returns identical bytes under the content hash") {
  TempDir dir;
  BlobStore store(dir.path());
  const std::string bytes = testing::random_bytes(300'000, 1);
  const auto uid = put_string(store, bytes, owner(1));
  CHECK(uid == altar::sha256_hex(bytes));
  CHECK(fs::exists(dir / ("objects/" + uid.substr(0, 2) + "/" + uid)));
  CHECK(fs::exists(dir / ("objects/" + uid.substr(0, 2) + "/" + uid + ".manifest.json")));
  auto read = store.get(uid);
  CHECK(slurp(*read.stream) == bytes);
  CHECK(read.manifest.uid == uid);
  CHECK(read.manifest.size_bytes == bytes.size());
  REQUIRE(read.manifest.owners.size() == 1);
  CHECK(read.manifest.owners[0].config_snapshot == Json{{"gain", 1}});
  CHECK(testing::sha256sum_tool(dir / ("objects/" + uid.substr(0, 2) + "/" + uid)) == uid);
}

TEST_CASE("empty content hashes to the empty digest") {
  TempDir dir;
  BlobStore store(dir.path());
  const auto uid = put_string(store, "", owner(1));
  testing::write_file(dir / "empty", "");
  CHECK(uid == testing::sha256sum_tool(dir / "empty"));
  CHECK(store.size_of(uid) == 0);
}

TEST_CASE("identical content under two runs is stored once with two owners") {
  TempDir dir;
  BlobStore store(dir.path());
  const std::string bytes = testing::random_bytes(30 * 1024 * 1024, 2);
  const auto a = put_string(store, bytes, owner(1, "a.bin"));
  const auto b = put_string(store, bytes, owner(2, "b.bin"));
  CHECK(a == b);
  CHECK(count_files(dir / "objects", false) == 1);
  const auto m = store.manifest(a);
  REQUIRE(m.owners.size() == 2);
  CHECK(m.owners[0].run_id == 1);
  CHECK(m.owners[1].run_id == 2);
  CHECK(m.owners[1].original_filename == "b.bin");
  CHECK(tree_bytes(dir / "objects") < 31u * 1024 * 1024);
  CHECK(store.list_uids() == std::vector<std::string>{a});

  put_string(store, bytes, owner(2, "b.bin"));
  CHECK(store.manifest(a).owners.size() == 2);
}

TEST_CASE("manifest JSON layout") {
  TempDir dir;
  BlobStore store(dir.path());
  const auto uid = put_string(store, "abc", owner(3));
  const Json m = Json::parse(testing::read_file(dir / BlobStore::manifest_key(uid)));
  CHECK(m["uid"] == uid);
  CHECK(m["size_bytes"] == 3);
  CHECK(m["created_at"].is_string());
  REQUIRE(m["owners"].size() == 1);
  CHECK(m["owners"][0] == Json{{"run_id", 3},
                               {"experiment_name", "get_movie"},
                               {"original_filename", "video.bin"},
                               {"config_snapshot", {{"gain", 3}}}});
  CHECK(altar::to_json(altar::manifest_from_json(m)) == m);
}

TEST_CASE("unknown uids are NotFound and malformed ones are rejected") {
  TempDir dir;
  BlobStore store(dir.path());
  CHECK(code_of([&] { store.get(std::string(64, 'a')); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { store.get("../etc/passwd"); }) == ErrorCode::InvalidArgument);
  CHECK_FALSE(store.contains("zz"));
}

TEST_CASE("a flipped byte is caught by verify") {
  TempDir dir;
  BlobStore store(dir.path());
  const std::string bytes = testing::random_bytes(4096, 3);
  const auto uid = put_string(store, bytes, owner(1));
  CHECK(store.verify(uid));
  {
    std::fstream f(dir / BlobStore::object_key(uid), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put(static_cast<char>(bytes[100] ^ 0x01));
  }
  CHECK_FALSE(store.verify(uid));
  CHECK(code_of([&] { store.get(uid, true); }) == ErrorCode::HashMismatch);
  CHECK_NOTHROW(store.get(uid, false));
}

TEST_CASE("an uncommitted writer leaves no object and no staged file") {
  TempDir dir;
  BlobStore store(dir.path());
  fs::path staged;
  {
    auto w = store.begin_write();
    w.write("partial");
    staged = w.staged_path();
    CHECK(fs::exists(staged));
  }
  CHECK_FALSE(fs::exists(staged));
  CHECK(store.list_uids().empty());
}

TEST_CASE("a process killed mid-put leaves only a staged file that cleanup removes") {
  TempDir dir;
  {
    BlobStore store(dir.path());
  }
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    BlobStore store(dir.path());
    auto w = store.begin_write();
    w.write(testing::random_bytes(1 << 20, 4));
    kill(getpid(), SIGKILL);
    _exit(0);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFSIGNALED(status));

  BlobStore store(dir.path());
  CHECK(store.list_uids().empty());
  CHECK(count_files(dir / "objects", false) == 0);
  CHECK(count_files(dir / "tmp", false) == 1);
  CHECK(store.cleanup_staging() == 1);
  CHECK(count_files(dir / "tmp", false) == 0);
}

TEST_CASE("concurrent puts of identical content converge on one object") {
  TempDir dir;
  BlobStore store(dir.path());
  const std::string bytes = testing::random_bytes(2 << 20, 5);
  std::vector<std::thread> threads;
  for (int i = 1; i <= 4; ++i) {
    threads.emplace_back([&, i] { put_string(store, bytes, owner(i, "f" + std::to_string(i))); });
  }
  for (auto& t : threads) t.join();
  const auto uid = altar::sha256_hex(bytes);
  CHECK(store.list_uids() == std::vector<std::string>{uid});
  CHECK(store.manifest(uid).owners.size() == 4);
  CHECK(count_files(dir / "tmp", false) == 0);
  CHECK(store.verify(uid));
}

TEST_CASE("scan_integrity reports orphans, dangling refs and corruption") {
  TempDir dir;
  altar::DocStore docs(dir / "db");
  BlobStore blobs(dir / "lfs");

  const std::string kept = testing::random_bytes(1000, 6);
  const auto kept_uid = put_string(blobs, kept, owner(1, "kept.bin"));
  altar::RunRecord run;
  run.run_id = docs.allocate_run_id();
  run.experiment_name = "get_movie";
  run.artifacts.push_back({"kept.bin", altar::ArtifactKind::Blob, kept.size(), kept_uid, kept_uid,
                           "application/octet-stream"});
  docs.insert("runs", run.run_id, altar::to_json(run));
  CHECK(altar::scan_integrity(blobs, docs).clean());

  const auto orphan = put_string(blobs, "never attached", owner(99, "x"));
  auto report = altar::scan_integrity(blobs, docs);
  CHECK(report.orphan_blobs == std::vector<std::string>{orphan});
  CHECK(report.dangling_refs.empty());

  fs::remove(dir / ("lfs/" + BlobStore::object_key(kept_uid)));
  report = altar::scan_integrity(blobs, docs);
  REQUIRE(report.dangling_refs.size() == 1);
  CHECK(report.dangling_refs[0].run_id == run.run_id);
  CHECK(report.dangling_refs[0].blob_uid == kept_uid);
  CHECK(docs.query("runs", Json{{"experiment.name", "get_movie"}}, {}, 0, 10).total_matched == 1);

  testing::write_file(dir / ("lfs/" + BlobStore::object_key(orphan)), "tampered");
  report = altar::scan_integrity(blobs, docs);
  CHECK(report.corrupt == std::vector<std::string>{orphan});
}
