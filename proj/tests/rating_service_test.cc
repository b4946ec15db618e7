// Copyright 2026 The SI-FID Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sifid/rating_service.h"

#include <algorithm>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sifid/image.h"
#include "sifid/subjective.h"
#include "test_util.h"

namespace sifid::rating {
namespace {

using nlohmann::json;
using testing::RandomImage;
using testing::ReadFileBytes;
using testing::TempDir;
using testing::WriteFileBytes;

ImageCatalog SmallCatalog() {
  ImageCatalog cat;
  for (const char* id : {"c", "a", "b", "d"}) {
    cat.AddImage("b1", id, EncodePng(RandomImage(4, 4, 3, id[0])));
  }
  cat.AddImage("b2", "x", EncodePng(RandomImage(4, 4, 1, 1)));
  return cat;
}

TEST(CatalogTest, SortedIdsAndLookup) {
  const ImageCatalog cat = SmallCatalog();
  EXPECT_EQ(cat.BundleIds(), (std::vector<std::string>{"b1", "b2"}));
  EXPECT_EQ(cat.ImageIds("b1"), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_TRUE(cat.HasBundle("b2"));
  EXPECT_FALSE(cat.HasBundle("zz"));
  EXPECT_SIFID_ERROR(cat.ImageIds("zz"), ErrorCode::kUnknownBundle);
  EXPECT_SIFID_ERROR(cat.Png("b1", "x"), ErrorCode::kFileNotFound);
  const Image img = DecodeImage(cat.Png("b2", "x"));
  EXPECT_EQ(img.channels(), 1);
  ImageCatalog dup = SmallCatalog();
  EXPECT_SIFID_ERROR(dup.AddImage("b1", "a", {}), ErrorCode::kInvalidArgument);
}

TEST(CatalogTest, FromRootPrefersStitched) {
  TempDir dir;
  std::filesystem::create_directories(dir / "one/stitched");
  std::filesystem::create_directories(dir / "two");
  SaveImage(RandomImage(4, 4, 3, 1), dir / "one/stitched/p.png");
  SaveImage(RandomImage(4, 4, 3, 1), dir / "one/ignored.png");
  SaveImage(RandomImage(4, 4, 3, 2), dir / "two/q.png");
  SaveImage(RandomImage(4, 4, 3, 3), dir / "two/r.png");
  const ImageCatalog cat = ImageCatalog::FromRoot(dir.path());
  EXPECT_EQ(cat.BundleIds(), (std::vector<std::string>{"one", "two"}));
  EXPECT_EQ(cat.ImageIds("one"), (std::vector<std::string>{"p"}));
  EXPECT_EQ(cat.ImageIds("two"), (std::vector<std::string>{"q", "r"}));
  EXPECT_EQ(cat.Png("two", "q"), [&] {
    const std::string raw = ReadFileBytes(dir / "two/q.png");
    return std::vector<unsigned char>(raw.begin(), raw.end());
  }());
}

TEST(OrderTest, DeterministicPermutation) {
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const auto seed = SessionSeed("alice", "b1");
  const auto o1 = PresentationOrder(ids, seed);
  EXPECT_EQ(o1, PresentationOrder(ids, seed));
  auto sorted = o1;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, ids);
  EXPECT_NE(SessionSeed("alice", "b1"), SessionSeed("bob", "b1"));
  EXPECT_EQ(SessionId("alice", "b1").size(), 16u);
  EXPECT_NE(SessionId("ab", "c"), SessionId("a", "bc"));
}

TEST(OrderTest, ShuffleIsRoughlyUniform) {
  // First element position over many seeds.
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  std::map<std::string, int> first;
  for (std::uint64_t s = 0; s < 4000; ++s) ++first[PresentationOrder(ids, s)[0]];
  for (const auto& [id, n] : first) EXPECT_NEAR(n, 1000, 120) << id;
}

TEST(StoreTest, FullSessionAndExport) {
  TempDir dir;
  RatingStore store(SmallCatalog(), dir / "log.ndjson");
  const RatingSession s = store.CreateSession("alice", "b1");
  EXPECT_EQ(s.session_id, SessionId("alice", "b1"));
  EXPECT_EQ(s.image_order, PresentationOrder({"a", "b", "c", "d"}, s.seed));
  double score = 10;
  while (true) {
    const RatingSession cur = store.GetSession(s.session_id);
    if (cur.complete()) break;
    const std::string next = store.NextItem(s.session_id);
    EXPECT_EQ(next, s.image_order[cur.cursor]);
    store.SubmitScore(s.session_id, next, score);
    score += 12.5;
  }
  EXPECT_SIFID_ERROR(store.NextItem(s.session_id), ErrorCode::kSessionComplete);
  EXPECT_SIFID_ERROR(store.SubmitScore(s.session_id, "a", 5), ErrorCode::kSessionComplete);

  subjective::ScoreTable t = subjective::ParseCsv(store.ExportRatings("b1"));
  ASSERT_EQ(t.critics, (std::vector<std::string>{"alice"}));
  EXPECT_EQ(t.present_count(), 4u);
  EXPECT_EQ(*t.scores[0][t.ImageIndex(s.image_order[2])], 35.0);
}

TEST(StoreTest, TenImageRoundTripWithBoundaryScores) {
  TempDir dir;
  ImageCatalog cat;
  for (int i = 0; i < 10; ++i) {
    cat.AddImage("ten", "img" + std::to_string(i), EncodePng(RandomImage(4, 4, 3, i)));
  }
  RatingStore store(std::move(cat), dir / "log.ndjson");
  const auto s = store.CreateSession("erin", "ten");
  for (int i = 0; i < 10; ++i) {
    const std::string next = store.NextItem(s.session_id);
    if (i == 0) {
      EXPECT_SIFID_ERROR(store.SubmitScore(s.session_id, next, 100.5),
                         ErrorCode::kScoreOutOfRange);
    }
    const double score = i == 0 ? 0.0 : i == 9 ? 100.0 : 11.0 * i;
    store.SubmitScore(s.session_id, next, score);
  }
  EXPECT_TRUE(store.GetSession(s.session_id).complete());
  TempDir out;
  WriteFileBytes(out / "ratings.csv", store.ExportRatings("ten"));
  const subjective::ScoreTable t = subjective::IngestCsv(out / "ratings.csv");
  EXPECT_EQ(t.critics.size(), 1u);
  EXPECT_EQ(t.images.size(), 10u);
  EXPECT_EQ(t.missing_count(), 0u);
  EXPECT_EQ(*t.scores[0][0], 0.0);
  EXPECT_EQ(*t.scores[0][9], 100.0);
}

TEST(StoreTest, Errors) {
  TempDir dir;
  RatingStore store(SmallCatalog(), dir / "log.ndjson");
  EXPECT_SIFID_ERROR(store.CreateSession("alice", "nope"), ErrorCode::kUnknownBundle);
  EXPECT_SIFID_ERROR(store.CreateSession("", "b1"), ErrorCode::kInvalidArgument);
  const auto s = store.CreateSession("alice", "b1");
  EXPECT_SIFID_ERROR(store.CreateSession("alice", "b1"), ErrorCode::kDuplicateSession);
  EXPECT_SIFID_ERROR(store.GetSession("0000"), ErrorCode::kUnknownSession);
  EXPECT_SIFID_ERROR(store.SubmitScore("0000", "a", 1), ErrorCode::kUnknownSession);
  const std::string wrong = s.image_order[1];
  EXPECT_SIFID_ERROR(store.SubmitScore(s.session_id, wrong, 50),
                     ErrorCode::kOutOfOrderSubmission);
  EXPECT_SIFID_ERROR(store.SubmitScore(s.session_id, s.image_order[0], 100.5),
                     ErrorCode::kScoreOutOfRange);
  EXPECT_SIFID_ERROR(store.SubmitScore(s.session_id, s.image_order[0], std::nan("")),
                     ErrorCode::kScoreOutOfRange);
  EXPECT_EQ(store.GetSession(s.session_id).cursor, 0u);
  EXPECT_SIFID_ERROR(store.ExportRatings("b1"), ErrorCode::kNothingToExport);
  EXPECT_SIFID_ERROR(store.ExportRatings("nope"), ErrorCode::kUnknownBundle);
  store.SubmitScore(s.session_id, s.image_order[0], 0);
  store.SubmitScore(s.session_id, s.image_order[1], 100);
  EXPECT_EQ(store.ExportRatings("b1"),
            "critic_id,image_id,score\nalice," + s.image_order[0] + ",0\nalice," +
                s.image_order[1] + ",100\n");
}

TEST(StoreTest, ReplayRestoresState) {
  TempDir dir;
  std::string sid;
  {
    RatingStore store(SmallCatalog(), dir / "log.ndjson");
    const auto s = store.CreateSession("alice", "b1");
    sid = s.session_id;
    store.SubmitScore(sid, s.image_order[0], 42.25);
    store.CreateSession("bob", "b2");
  }
  RatingStore store(SmallCatalog(), dir / "log.ndjson");
  const auto sessions = store.Sessions();
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].critic_id, "alice");
  const auto s = store.GetSession(sid);
  EXPECT_EQ(s.cursor, 1u);
  EXPECT_EQ(s.scores[0].score, 42.25);
  EXPECT_SIFID_ERROR(store.CreateSession("alice", "b1"), ErrorCode::kDuplicateSession);
  store.SubmitScore(sid, s.image_order[1], 1);
  EXPECT_EQ(store.GetSession(sid).cursor, 2u);
}

TEST(StoreTest, TornTailIsDropped) {
  TempDir dir;
  std::string sid, second;
  {
    RatingStore store(SmallCatalog(), dir / "log.ndjson");
    const auto s = store.CreateSession("alice", "b1");
    sid = s.session_id;
    second = s.image_order[1];
    store.SubmitScore(sid, s.image_order[0], 10);
  }
  std::string log = ReadFileBytes(dir / "log.ndjson");
  log += R"({"type":"score","session_id":")" + sid + R"(","image_id":")";
  WriteFileBytes(dir / "log.ndjson", log);
  {
    RatingStore store(SmallCatalog(), dir / "log.ndjson");
    EXPECT_EQ(store.GetSession(sid).cursor, 1u);
    store.SubmitScore(sid, second, 20);
  }
  RatingStore store(SmallCatalog(), dir / "log.ndjson");
  EXPECT_EQ(store.GetSession(sid).cursor, 2u);
}

TEST(StoreTest, CorruptLineRejected) {
  TempDir dir;
  WriteFileBytes(dir / "log.ndjson", "{\"type\":\"bogus\"}\n");
  EXPECT_SIFID_ERROR(RatingStore(SmallCatalog(), dir / "log.ndjson"),
                     ErrorCode::kCorruptData);
  WriteFileBytes(dir / "log2.ndjson", "not json\n");
  EXPECT_SIFID_ERROR(RatingStore(SmallCatalog(), dir / "log2.ndjson"),
                     ErrorCode::kCorruptData);
}

TEST(HttpStatusTest, Mapping) {
  EXPECT_EQ(HttpStatusFor(ErrorCode::kUnknownSession), 404);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kUnknownBundle), 404);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kDuplicateSession), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kOutOfOrderSubmission), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kSessionComplete), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kScoreOutOfRange), 422);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kParseError), 400);
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<RatingStore>(SmallCatalog(), dir_ / "log.ndjson");
    server_ = std::make_unique<RatingServer>(*store_);
    port_ = server_->BindToAnyPort("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->ListenAfterBind(); });
    server_->WaitUntilReady();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->Stop();
    if (thread_.joinable()) thread_.join();
  }

  json PostJson(const std::string& path, const json& body, int want) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, want) << path << " " << res->body;
    return json::parse(res->body);
  }
  json GetJson(const std::string& path, int want) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, want) << path << " " << res->body;
    return json::parse(res->body);
  }

  TempDir dir_;
  std::unique_ptr<RatingStore> store_;
  std::unique_ptr<RatingServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = -1;
};

TEST_F(ServerTest, RatingFlow) {
  EXPECT_EQ(GetJson("/bundles", 200)["bundles"], json({"b1", "b2"}));
  const json s = PostJson("/sessions", {{"critic_id", "carol"}, {"bundle_id", "b1"}}, 201);
  const std::string sid = s["session_id"];
  EXPECT_EQ(s["total"], 4);
  const json dup = PostJson("/sessions", {{"critic_id", "carol"}, {"bundle_id", "b1"}}, 409);
  EXPECT_EQ(dup["error_class"], "DuplicateSession");
  EXPECT_EQ(dup["session_id"], sid);

  for (int i = 0; i < 4; ++i) {
    const json next = GetJson("/sessions/" + sid + "/next", 200);
    EXPECT_EQ(next["index"], i);
    EXPECT_EQ(next["total"], 4);
    const std::string image = next["image_id"];
    auto img = client_->Get(next["image_url"].get<std::string>());
    ASSERT_TRUE(img);
    EXPECT_EQ(img->status, 200);
    EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
    const auto& png = store_->catalog().Png("b1", image);
    EXPECT_EQ(img->body, std::string(png.begin(), png.end()));
    const json ack = PostJson("/sessions/" + sid + "/scores",
                              {{"image_id", image}, {"score", 20 * i + 0.5}}, 200);
    EXPECT_EQ(ack["accepted"], true);
    EXPECT_EQ(ack["cursor"], i + 1);
    EXPECT_EQ(ack["complete"], i == 3);
  }
  EXPECT_EQ(GetJson("/sessions/" + sid + "/next", 409)["error_class"], "SessionComplete");
  EXPECT_EQ(GetJson("/sessions/" + sid, 200)["complete"], true);

  auto csv = client_->Get("/bundles/b1/export");
  ASSERT_TRUE(csv);
  EXPECT_EQ(csv->status, 200);
  const auto table = subjective::ParseCsv(csv->body);
  EXPECT_EQ(table.present_count(), 4u);
}

TEST_F(ServerTest, ErrorResponses) {
  EXPECT_EQ(GetJson("/sessions/ffff", 404)["error_class"], "UnknownSession");
  EXPECT_EQ(PostJson("/sessions", {{"critic_id", "x"}, {"bundle_id", "zz"}}, 404)["error_class"],
            "UnknownBundle");
  auto bad = client_->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error_class"], "ParseError");
  const json s = PostJson("/sessions", {{"critic_id", "dan"}, {"bundle_id", "b1"}}, 201);
  const std::string sid = s["session_id"];
  const std::string first = GetJson("/sessions/" + sid + "/next", 200)["image_id"];
  EXPECT_EQ(PostJson("/sessions/" + sid + "/scores", {{"image_id", first}, {"score", 101}},
                     422)["error_class"],
            "ScoreOutOfRange");
  const std::string other = first == "a" ? "b" : "a";
  EXPECT_EQ(PostJson("/sessions/" + sid + "/scores", {{"image_id", other}, {"score", 50}},
                     409)["error_class"],
            "OutOfOrderSubmission");
  EXPECT_EQ(GetJson("/bundles/b2/export", 404)["error_class"], "NothingToExport");
  auto img = client_->Get("/images/x");
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  auto missing = client_->Get("/images/nope?bundle=b1");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto opts = client_->Options("/sessions");
  ASSERT_TRUE(opts);
  EXPECT_EQ(opts->status, 204);
  EXPECT_EQ(opts->get_header_value("Access-Control-Allow-Origin"), "*");
}

}  // namespace
}  // namespace sifid::rating
