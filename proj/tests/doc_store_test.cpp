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

#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "altar/doc_store.hpp"
#include "altar/error.hpp"
#include "altar/filter.hpp"
#include "support.hpp"

using altar::DocStore;
using altar::ErrorCode;
using altar::Json;
using testing::TempDir;

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

std::vector<altar::SortKey> to_keys(const std::vector<testing::oracle::SortSpec>& specs) {
  std::vector<altar::SortKey> keys;
  for (const auto& s : specs) keys.push_back({s.path, s.descending});
  return keys;
}

std::string journal_line(std::uint64_t seq, const char* op, std::int64_t id, const Json& doc) {
  Json line{{"seq", seq}, {"op", op}, {"id", id}};
  line["doc"] = doc;
  return line.dump() + "\n";
}

}  // namespace

TEST_CASE("empty directory opens with every collection present") {
  TempDir dir;
  DocStore store(dir / "db");
  for (const char* name : {"runs", "metrics", "annotations", "counters"}) {
    CHECK(store.size(name) == 0);
    CHECK(std::filesystem::exists(dir / (std::string("db/") + name + ".jsonl")));
  }
  CHECK(std::filesystem::exists(dir / "db/LOCK"));
}

TEST_CASE("allocate_run_id starts at 1 and survives reopen") {
  TempDir dir;
  {
    DocStore store(dir.path());
    CHECK(store.allocate_run_id() == 1);
    CHECK(store.allocate_run_id() == 2);
  }
  DocStore store(dir.path());
  CHECK(store.allocate_run_id() == 3);
}

TEST_CASE("100 concurrent allocations yield 1..100 exactly once") {
  TempDir dir;
  DocStore store(dir.path());
  std::mutex mu;
  std::set<std::int64_t> seen;
  std::vector<std::thread> threads;
  for (int t = 0; t < 10; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i) {
        const auto id = store.allocate_run_id();
        std::lock_guard lock(mu);
        seen.insert(id);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(seen.size() == 100);
  CHECK(*seen.begin() == 1);
  CHECK(*seen.rbegin() == 100);
}

TEST_CASE("documents with disjoint fields coexist intact") {
  TempDir dir;
  DocStore store(dir.path());
  const Json a = Json::parse(R"({"config": {"gain": 10}, "status": "RUNNING"})");
  const Json b = Json::parse(R"({"config": {"temperature": 21.5, "tags": ["x"]}, "status": "RUNNING"})");
  const auto ia = store.insert("runs", a);
  const auto ib = store.insert("runs", b);
  CHECK(store.get("runs", ia) == a);
  CHECK(store.get("runs", ib) == b);
}

TEST_CASE("get, update and remove report NotFound for unknown ids") {
  TempDir dir;
  DocStore store(dir.path());
  CHECK(code_of([&] { store.get("runs", 999); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { store.update("runs", 999, Json::object()); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { store.remove("runs", 999); }) == ErrorCode::NotFound);
  CHECK_FALSE(store.find("runs", 999).has_value());
}

TEST_CASE("explicit-id insert refuses a taken id") {
  TempDir dir;
  DocStore store(dir.path());
  store.insert("runs", 5, Json{{"x", 1}});
  CHECK(code_of([&] { store.insert("runs", 5, Json{{"x", 2}}); }) == ErrorCode::Conflict);
  CHECK(store.insert("runs", Json{{"x", 3}}) == 6);
}

TEST_CASE("inserted documents follow the config node rules") {
  TempDir dir;
  DocStore store(dir.path());
  CHECK(code_of([&] { store.insert("runs", Json{{"a.b", 1}}); }) == ErrorCode::KeyInvalid);
  CHECK(code_of([&] { store.insert("runs", Json::array()); }) == ErrorCode::InvalidArgument);
  CHECK(store.size("runs") == 0);
}

TEST_CASE("terminal runs are immutable and their journal line is untouched") {
  TempDir dir;
  DocStore store(dir.path());
  const auto id = store.insert("runs", Json{{"status", "RUNNING"}, {"config", {{"gain", 1}}}});
  store.update("runs", id, Json{{"status", "COMPLETED"}, {"config", {{"gain", 1}}}});
  const std::string before = testing::read_file(dir / "runs.jsonl");
  CHECK(code_of([&] {
          store.update("runs", id, Json{{"status", "COMPLETED"}, {"config", {{"gain", 2}}}});
        }) == ErrorCode::ImmutableRecord);
  CHECK(code_of([&] { store.remove("runs", id); }) == ErrorCode::ImmutableRecord);
  CHECK(testing::read_file(dir / "runs.jsonl") == before);
  CHECK(store.get("runs", id)["config"]["gain"] == 1);

  const auto other = store.insert("metrics", Json{{"status", "COMPLETED"}});
  CHECK_NOTHROW(store.update("metrics", other, Json{{"status", "X"}}));
}

TEST_CASE("a torn final line is discarded on replay") {
  TempDir dir;
  std::string text;
  for (int i = 1; i <= 3; ++i) text += journal_line(i, "insert", i, Json{{"n", i}});
  const std::string fourth = journal_line(4, "insert", 4, Json{{"n", 4}});
  text += fourth.substr(0, fourth.size() / 2);
  testing::write_file(dir / "runs.jsonl", text);
  {
    DocStore store(dir.path());
    CHECK(store.size("runs") == 3);
    CHECK(store.get("runs", 3)["n"] == 3);
    CHECK(store.insert("runs", Json{{"n", 5}}) == 4);
  }
  DocStore store(dir.path());
  CHECK(store.size("runs") == 4);
  CHECK(store.get("runs", 4)["n"] == 5);
}

TEST_CASE("a corrupt complete line raises CorruptJournal") {
  TempDir dir;
  std::string text = journal_line(1, "insert", 1, Json{{"n", 1}});
  text += "{not json}\n";
  text += journal_line(3, "insert", 3, Json{{"n", 3}});
  testing::write_file(dir / "runs.jsonl", text);
  CHECK(code_of([&] { DocStore store(dir.path()); }) == ErrorCode::CorruptJournal);
}

TEST_CASE("non-increasing seq raises CorruptJournal") {
  TempDir dir;
  std::string text = journal_line(2, "insert", 1, Json{{"n", 1}});
  text += journal_line(2, "insert", 2, Json{{"n", 2}});
  testing::write_file(dir / "runs.jsonl", text);
  CHECK(code_of([&] { DocStore store(dir.path()); }) == ErrorCode::CorruptJournal);
}

TEST_CASE("journal lines are canonical JSON with seq, op, id and doc") {
  TempDir dir;
  {
    DocStore store(dir.path());
    const auto id = store.insert("annotations", Json{{"b", 1}, {"a", "x"}});
    store.update("annotations", id, Json{{"a", "y"}});
    store.remove("annotations", id);
  }
  std::istringstream in(testing::read_file(dir / "annotations.jsonl"));
  std::string line;
  std::vector<Json> lines;
  while (std::getline(in, line)) {
    const Json j = Json::parse(line);
    CHECK(j.dump() == line);
    lines.push_back(j);
  }
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["op"] == "insert");
  CHECK(lines[0]["doc"] == Json{{"a", "x"}, {"b", 1}});
  CHECK(lines[1]["op"] == "update");
  CHECK(lines[2]["op"] == "delete");
  CHECK(lines[0]["seq"].get<int>() < lines[1]["seq"].get<int>());
  CHECK(lines[1]["seq"].get<int>() < lines[2]["seq"].get<int>());
}

TEST_CASE("a second owner of the directory gets LockHeld") {
  TempDir dir;
  DocStore first(dir.path());
  CHECK(code_of([&] { DocStore second(dir.path()); }) == ErrorCode::LockHeld);
}

TEST_CASE("property: reopen after 1000 random operations equals a shadow model") {
  TempDir dir;
  testing::Gen gen(21);
  std::map<std::string, std::map<std::int64_t, Json>> shadow;
  const std::vector<std::string> names = {"runs", "metrics", "annotations"};
  {
    DocStore store(dir.path());
    for (int i = 0; i < 1000; ++i) {
      const std::string& coll = gen.pick(names);
      auto& model = shadow[coll];
      const int action = gen.uniform(0, 9);
      if (action < 5 || model.empty()) {
        Json doc = altar::validate_config(gen.document(), altar::kMaxDocumentDepth);
        doc.erase("status");
        const auto id = store.insert(coll, doc);
        CHECK(model.count(id) == 0);
        model[id] = doc;
      } else {
        auto it = model.begin();
        std::advance(it, gen.uniform(0, static_cast<int>(model.size()) - 1));
        if (action < 8) {
          Json doc = altar::validate_config(gen.document(), altar::kMaxDocumentDepth);
          doc.erase("status");
          store.update(coll, it->first, doc);
          it->second = doc;
        } else {
          store.remove(coll, it->first);
          model.erase(it);
        }
      }
    }
  }
  DocStore store(dir.path());
  for (const auto& coll : names) {
    std::map<std::int64_t, Json> replayed;
    store.for_each(coll, [&](std::int64_t id, const Json& doc) { replayed[id] = doc; });
    CHECK(replayed == shadow[coll]);
  }
}

TEST_CASE("compact keeps the live state and one line per record") {
  TempDir dir;
  std::int64_t id = 0;
  {
    DocStore store(dir.path());
    id = store.insert("metrics", Json{{"v", 1}});
    store.update("metrics", id, Json{{"v", 2}});
    store.update("metrics", id, Json{{"v", 3}});
    const auto gone = store.insert("metrics", Json{{"v", 9}});
    store.remove("metrics", gone);
    const auto before = store.query("metrics", Json::object(), {}, 0, 1000);
    store.compact();
    const auto after = store.query("metrics", Json::object(), {}, 0, 1000);
    CHECK(after.total_matched == before.total_matched);
    CHECK(store.insert("metrics", Json{{"v", 4}}) == id + 2);
  }
  DocStore store(dir.path());
  CHECK(store.get("metrics", id) == Json{{"v", 3}});
  CHECK(store.size("metrics") == 2);
  std::istringstream in(testing::read_file(dir / "metrics.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("compact of an empty store leaves empty journals") {
  TempDir dir;
  DocStore store(dir.path());
  store.compact();
  CHECK(testing::read_file(dir / "runs.jsonl").empty());
  CHECK(store.size("runs") == 0);
}

TEST_CASE("query by name sorted by start_time") {
  TempDir dir;
  DocStore store(dir.path());
  store.insert("runs", Json{{"name", "A"}, {"start_time", "2021-01-03T00:00:00.000Z"}});
  store.insert("runs", Json{{"name", "B"}, {"start_time", "2021-01-01T00:00:00.000Z"}});
  store.insert("runs", Json{{"name", "A"}, {"start_time", "2021-01-02T00:00:00.000Z"}});
  const auto r = store.query("runs", Json{{"name", "A"}}, {{"start_time", false}}, 0, 100);
  CHECK(r.total_matched == 2);
  REQUIRE(r.page.size() == 2);
  CHECK(r.page[0].id == 3);
  CHECK(r.page[1].id == 1);
}

TEST_CASE("query paging, total and limit bounds") {
  TempDir dir;
  DocStore store(dir.path());
  for (int i = 0; i < 10; ++i) store.insert("runs", Json{{"i", i}});
  auto all = store.query("runs", Json::object(), {}, 0, 1000);
  CHECK(all.total_matched == 10);
  CHECK(all.page.size() == 10);
  auto page = store.query("runs", Json::object(), {{"i", true}}, 3, 4);
  CHECK(page.total_matched == 10);
  REQUIRE(page.page.size() == 4);
  CHECK(page.page[0].doc["i"] == 6);
  CHECK(store.query("runs", Json::object(), {}, 20, 5).page.empty());
  CHECK(code_of([&] { store.query("runs", Json::object(), {}, 0, 1001); }) == ErrorCode::LimitExceeded);
  CHECK(code_of([&] { store.query("runs", Json{{"i", {{"$bogus", 1}}}}, {}, 0, 10); }) ==
        ErrorCode::FilterInvalid);
}

TEST_CASE("sorting on a partly absent path puts the absent half first") {
  TempDir dir;
  DocStore store(dir.path());
  for (int i = 0; i < 10; ++i) {
    Json doc{{"i", i}};
    if (i % 2 == 0) doc["k"] = 10 - i;
    store.insert("runs", doc);
  }
  const auto r = store.query("runs", Json::object(), {{"k", false}}, 0, 100);
  std::vector<int> order;
  for (const auto& rec : r.page) order.push_back(rec.doc["i"].get<int>());
  CHECK(order == std::vector<int>{1, 3, 5, 7, 9, 8, 6, 4, 2, 0});
}

TEST_CASE("matches follows the documented operator semantics") {
  const Json run = Json::parse(R"({"experiment": {"name": "get_movie"}, "config": {"gain": 10,
    "tags": ["a", "b"], "label": "Leaf"}, "result": null})");
  CHECK(altar::matches(Json::parse(R"({"experiment.name": "get_movie"})"), run));
  CHECK(altar::matches(Json::object(), run));
  CHECK(altar::matches(Json::parse(R"({"config.gain": {"$gt": 5}})"), run));
  CHECK(altar::matches(Json::parse(R"({"config.gain": 10.0})"), run));
  CHECK_FALSE(altar::matches(Json::parse(R"({"config.gain": {"$gt": "5"}})"), run));
  CHECK(altar::matches(Json::parse(R"({"config.tags.1": "b"})"), run));
  CHECK(altar::matches(Json::parse(R"({"config.label": {"$contains": "ea"}})"), run));
  CHECK_FALSE(altar::matches(Json::parse(R"({"config.label": {"$contains": "EA"}})"), run));
  CHECK(altar::matches(Json::parse(R"({"result": {"$exists": true}})"), run));
  CHECK(altar::matches(Json::parse(R"({"missing": {"$exists": false}})"), run));
  CHECK(altar::matches(Json::parse(R"({"config.gain": {"$in": [1, 10]}})"), run));
  CHECK_FALSE(altar::matches(Json::parse(R"({"config.gain": {"$in": []}})"), run));
  CHECK(altar::matches(Json::parse(R"({"config.gain": {"$gte": 10, "$lt": 11}})"), run));
}

TEST_CASE("property: query equals the naive evaluator on random documents") {
  TempDir dir;
  DocStore store(dir.path());
  testing::Gen gen(22);
  std::vector<std::pair<std::int64_t, Json>> docs;
  for (int i = 0; i < 400; ++i) {
    const Json doc = altar::validate_config(gen.document(), altar::kMaxDocumentDepth);
    docs.emplace_back(store.insert("metrics", doc), doc);
  }
  int selective = 0;
  for (int q = 0; q < 150; ++q) {
    const Json filter = gen.filter();
    const auto sort = gen.sort();
    const std::uint64_t skip = gen.uniform(0, 5) == 0 ? gen.uniform(0, 50) : 0;
    const std::uint64_t limit = gen.uniform(0, 3) == 0 ? gen.uniform(0, 40) : 1000;
    CAPTURE(filter.dump());
    std::uint64_t total = 0;
    const auto expected = testing::oracle::run_query(docs, filter, sort, total);
    const auto got = store.query("metrics", filter, to_keys(sort), skip, limit);
    CHECK(got.total_matched == total);
    if (total > 0 && total < docs.size()) ++selective;
    std::vector<std::int64_t> want(expected.begin() + std::min<std::size_t>(skip, expected.size()),
                                   expected.begin() + std::min<std::size_t>(skip + limit, expected.size()));
    std::vector<std::int64_t> ids;
    for (const auto& r : got.page) ids.push_back(r.id);
    CHECK(ids == want);
  }
  CHECK(selective >= 50);
}
