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

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sifid/image.h"
#include "sifid/rng.h"

namespace sifid::rating {
namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------- catalog ----

ImageCatalog ImageCatalog::FromRoot(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kFileNotFound, root.string() + " is not a directory");
  }
  ImageCatalog catalog;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    const fs::path images = fs::is_directory(d / "stitched") ? d / "stitched" : d;
    if (ListImageFiles(images).empty()) continue;
    catalog.AddBundle(d.filename().string(), images);
  }
  return catalog;
}

void ImageCatalog::AddBundle(const std::string& bundle_id, const fs::path& image_dir) {
  for (const auto& path : ListImageFiles(image_dir)) {
    AddImage(bundle_id, path.stem().string(), EncodePng(LoadImage(path)));
  }
}

void ImageCatalog::AddImage(const std::string& bundle_id, const std::string& image_id,
                            std::vector<unsigned char> png) {
  auto& b = bundles_[bundle_id];
  if (b.png.count(image_id)) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate image id '" + image_id + "' in bundle " + bundle_id);
  }
  b.png[image_id] = std::move(png);
  b.ids.insert(std::upper_bound(b.ids.begin(), b.ids.end(), image_id), image_id);
}

bool ImageCatalog::HasBundle(const std::string& bundle_id) const {
  return bundles_.count(bundle_id) > 0;
}

std::vector<std::string> ImageCatalog::BundleIds() const {
  std::vector<std::string> ids;
  for (const auto& [id, b] : bundles_) ids.push_back(id);
  return ids;
}

const std::vector<std::string>& ImageCatalog::ImageIds(
    const std::string& bundle_id) const {
  const auto it = bundles_.find(bundle_id);
  if (it == bundles_.end()) {
    throw Error(ErrorCode::kUnknownBundle, "unknown bundle '" + bundle_id + "'");
  }
  return it->second.ids;
}

const std::vector<unsigned char>& ImageCatalog::Png(const std::string& bundle_id,
                                                    const std::string& image_id) const {
  const auto it = bundles_.find(bundle_id);
  if (it == bundles_.end()) {
    throw Error(ErrorCode::kUnknownBundle, "unknown bundle '" + bundle_id + "'");
  }
  const auto img = it->second.png.find(image_id);
  if (img == it->second.png.end()) {
    throw Error(ErrorCode::kFileNotFound,
                "no image '" + image_id + "' in bundle " + bundle_id);
  }
  return img->second;
}

// ------------------------------------------------------------- helpers ----

std::uint64_t SessionSeed(const std::string& critic_id, const std::string& bundle_id) {
  return StableHash(critic_id + bundle_id);
}

std::string SessionId(const std::string& critic_id, const std::string& bundle_id) {
  // Unit separator keeps ("ab", "c") and ("a", "bc") apart.
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    StableHash(critic_id + '\x1f' + bundle_id)));
  return buf;
}

std::vector<std::string> PresentationOrder(std::vector<std::string> ids,
                                           std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }
  return ids;
}

namespace {

std::string FormatScore(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json SessionJson(const RatingSession& s) {
  return {{"session_id", s.session_id},
          {"critic_id", s.critic_id},
          {"bundle_id", s.bundle_id},
          {"seed", s.seed},
          {"cursor", s.cursor},
          {"total", s.image_order.size()},
          {"complete", s.complete()}};
}

}  // namespace

// --------------------------------------------------------------- store ----

RatingStore::RatingStore(ImageCatalog catalog, fs::path log_path)
    : catalog_(std::move(catalog)), log_path_(std::move(log_path)) {
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  Replay();
  log_ = std::fopen(log_path_.c_str(), "ab");
  if (log_ == nullptr) {
    throw Error(ErrorCode::kWriteFailure, "cannot open log " + log_path_.string());
  }
}

RatingStore::~RatingStore() {
  if (log_ != nullptr) std::fclose(log_);
}

void RatingStore::Replay() {
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) return;
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // Drop a torn tail: only newline-terminated records were acknowledged.
  const auto last = text.rfind('\n');
  const std::size_t good = last == std::string::npos ? 0 : last + 1;
  if (good != text.size()) {
    text.resize(good);
    fs::resize_file(log_path_, good);
  }
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("type")) {
      throw Error(ErrorCode::kCorruptData,
                  log_path_.string() + ":" + std::to_string(line_no));
    }
    const std::string type = rec["type"];
    if (type == "session") {
      RatingSession s;
      s.session_id = rec["session_id"];
      s.critic_id = rec["critic_id"];
      s.bundle_id = rec["bundle_id"];
      s.seed = rec["seed"];
      s.image_order = rec["image_order"].get<std::vector<std::string>>();
      if (sessions_.count(s.session_id)) continue;
      order_.push_back(s.session_id);
      sessions_[s.session_id] = std::move(s);
    } else if (type == "score") {
      auto it = sessions_.find(rec["session_id"].get<std::string>());
      if (it == sessions_.end()) {
        throw Error(ErrorCode::kCorruptData,
                    log_path_.string() + ":" + std::to_string(line_no) +
                        ": score for unknown session");
      }
      RatingSession& s = it->second;
      const std::string image_id = rec["image_id"];
      // Records are appended only after validation, so anything that does
      // not match the cursor is a duplicate and is skipped.
      if (s.complete() || s.image_order[s.cursor] != image_id) continue;
      s.scores.push_back({image_id, rec["score"].get<double>(),
                          rec["timestamp_ms"].get<std::int64_t>()});
      ++s.cursor;
    } else {
      throw Error(ErrorCode::kCorruptData,
                  log_path_.string() + ": unknown record type " + type);
    }
  }
}

void RatingStore::Append(const std::string& line) {
  const std::string rec = line + "\n";
  if (std::fwrite(rec.data(), 1, rec.size(), log_) != rec.size() ||
      std::fflush(log_) != 0 || ::fsync(::fileno(log_)) != 0) {
    throw Error(ErrorCode::kWriteFailure, "append to " + log_path_.string());
  }
}

RatingSession RatingStore::CreateSession(const std::string& critic_id,
                                         const std::string& bundle_id) {
  const auto& ids = catalog_.ImageIds(bundle_id);
  if (critic_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "critic_id must be non-empty");
  }
  std::lock_guard<std::mutex> lock(mu_);
  const std::string id = SessionId(critic_id, bundle_id);
  if (sessions_.count(id)) {
    throw Error(ErrorCode::kDuplicateSession,
                "critic '" + critic_id + "' already has session " + id +
                    " for bundle " + bundle_id);
  }
  RatingSession s;
  s.session_id = id;
  s.critic_id = critic_id;
  s.bundle_id = bundle_id;
  s.seed = SessionSeed(critic_id, bundle_id);
  s.image_order = PresentationOrder(ids, s.seed);
  json rec = {{"type", "session"},   {"session_id", id},
              {"critic_id", critic_id}, {"bundle_id", bundle_id},
              {"seed", s.seed},      {"image_order", s.image_order}};
  Append(rec.dump());
  order_.push_back(id);
  sessions_[id] = s;
  return s;
}

RatingSession RatingStore::GetSession(const std::string& session_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kUnknownSession, "unknown session '" + session_id + "'");
  }
  return it->second;
}

std::string RatingStore::NextItem(const std::string& session_id) const {
  const RatingSession s = GetSession(session_id);
  if (s.complete()) {
    throw Error(ErrorCode::kSessionComplete,
                "session " + session_id + " has rated all images");
  }
  return s.image_order[s.cursor];
}

RatingSession RatingStore::SubmitScore(const std::string& session_id,
                                       const std::string& image_id, double score) {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kUnknownSession, "unknown session '" + session_id + "'");
  }
  RatingSession& s = it->second;
  if (s.complete()) {
    throw Error(ErrorCode::kSessionComplete,
                "session " + session_id + " has rated all images");
  }
  if (image_id != s.image_order[s.cursor]) {
    throw Error(ErrorCode::kOutOfOrderSubmission,
                "expected a score for '" + s.image_order[s.cursor] + "', got '" +
                    image_id + "'");
  }
  if (!std::isfinite(score) || score < 0.0 || score > 100.0) {
    throw Error(ErrorCode::kScoreOutOfRange,
                "score " + FormatScore(score) + " outside [0, 100]");
  }
  const ScoreEntry entry{image_id, score, NowMs()};
  json rec = {{"type", "score"},
              {"session_id", session_id},
              {"image_id", image_id},
              {"score", score},
              {"timestamp_ms", entry.timestamp_ms}};
  Append(rec.dump());
  s.scores.push_back(entry);
  ++s.cursor;
  return s;
}

std::string RatingStore::ExportRatings(const std::string& bundle_id) const {
  catalog_.ImageIds(bundle_id);
  std::lock_guard<std::mutex> lock(mu_);
  std::string csv = "critic_id,image_id,score\n";
  std::size_t rows = 0;
  for (const auto& id : order_) {
    const RatingSession& s = sessions_.at(id);
    if (s.bundle_id != bundle_id) continue;
    for (const auto& e : s.scores) {
      csv += s.critic_id + "," + e.image_id + "," + FormatScore(e.score) + "\n";
      ++rows;
    }
  }
  if (rows == 0) {
    throw Error(ErrorCode::kNothingToExport,
                "no recorded scores for bundle " + bundle_id);
  }
  return csv;
}

std::vector<RatingSession> RatingStore::Sessions() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<RatingSession> out;
  for (const auto& id : order_) out.push_back(sessions_.at(id));
  return out;
}

// -------------------------------------------------------------- server ----

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownBundle:
    case ErrorCode::kUnknownSession:
    case ErrorCode::kFileNotFound:
    case ErrorCode::kNothingToExport:
      return 404;
    case ErrorCode::kDuplicateSession:
    case ErrorCode::kOutOfOrderSubmission:
    case ErrorCode::kSessionComplete:
      return 409;
    case ErrorCode::kScoreOutOfRange:
      return 422;
    default:
      return 400;
  }
}

struct RatingServer::Impl {
  RatingStore& store;
  httplib::Server server;

  explicit Impl(RatingStore& s) : store(s) { Routes(); }

  static void SendJson(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void SendError(httplib::Response& res, const Error& e) {
    json body = {{"error_class", ErrorCodeName(e.code())}, {"message", e.what()}};
    SendJson(res, HttpStatusFor(e.code()), body);
  }

  static json ParseBody(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      throw Error(ErrorCode::kParseError, "request body must be a JSON object");
    }
    return body;
  }

  static std::string StringField(const json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
      throw Error(ErrorCode::kParseError, std::string("missing string field ") + key);
    }
    return body[key].get<std::string>();
  }

  template <typename Fn>
  static httplib::Server::Handler Guard(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        SendError(res, e);
      } catch (const std::exception& e) {
        SendError(res, Error(ErrorCode::kInvalidArgument, e.what()));
      }
    };
  }

  void Routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Get("/bundles", Guard([this](const auto&, auto& res) {
      SendJson(res, 200, {{"bundles", store.catalog().BundleIds()}});
    }));

    server.Post("/sessions", Guard([this](const auto& req, auto& res) {
      const json body = ParseBody(req);
      const std::string critic = StringField(body, "critic_id");
      const std::string bundle = StringField(body, "bundle_id");
      try {
        SendJson(res, 201, SessionJson(store.CreateSession(critic, bundle)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDuplicateSession) throw;
        json err = {{"error_class", ErrorCodeName(e.code())},
                    {"message", e.what()},
                    {"session_id", SessionId(critic, bundle)}};
        SendJson(res, HttpStatusFor(e.code()), err);
      }
    }));

    server.Get("/sessions/:id", Guard([this](const auto& req, auto& res) {
      SendJson(res, 200, SessionJson(store.GetSession(req.path_params.at("id"))));
    }));

    server.Get("/sessions/:id/next", Guard([this](const auto& req, auto& res) {
      const std::string id = req.path_params.at("id");
      const RatingSession s = store.GetSession(id);
      const std::string image = store.NextItem(id);
      SendJson(res, 200,
               {{"image_id", image},
                {"image_url", "/images/" + image + "?bundle=" + s.bundle_id},
                {"index", s.cursor},
                {"total", s.image_order.size()}});
    }));

    server.Post("/sessions/:id/scores", Guard([this](const auto& req, auto& res) {
      const json body = ParseBody(req);
      const std::string image = StringField(body, "image_id");
      if (!body.contains("score") || !body["score"].is_number()) {
        throw Error(ErrorCode::kParseError, "missing numeric field score");
      }
      const RatingSession s =
          store.SubmitScore(req.path_params.at("id"), image, body["score"].get<double>());
      SendJson(res, 200,
               {{"accepted", true}, {"cursor", s.cursor}, {"complete", s.complete()}});
    }));

    server.Get("/images/:id", Guard([this](const auto& req, auto& res) {
      const std::string image = req.path_params.at("id");
      std::string bundle = req.get_param_value("bundle");
      if (bundle.empty()) {
        // Without a bundle the id must be unambiguous.
        int hits = 0;
        for (const auto& b : store.catalog().BundleIds()) {
          const auto& ids = store.catalog().ImageIds(b);
          if (std::binary_search(ids.begin(), ids.end(), image)) {
            bundle = b;
            ++hits;
          }
        }
        if (hits != 1) {
          throw Error(ErrorCode::kFileNotFound,
                      "image '" + image + "' not found in exactly one bundle");
        }
      }
      const auto& png = store.catalog().Png(bundle, image);
      res.status = 200;
      res.set_content(reinterpret_cast<const char*>(png.data()), png.size(),
                      "image/png");
    }));

    server.Get("/bundles/:id/export", Guard([this](const auto& req, auto& res) {
      res.status = 200;
      res.set_content(store.ExportRatings(req.path_params.at("id")), "text/csv");
    }));
  }
};

RatingServer::RatingServer(RatingStore& store) : impl_(std::make_unique<Impl>(store)) {}
RatingServer::~RatingServer() = default;

int RatingServer::BindToAnyPort(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool RatingServer::Bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

bool RatingServer::ListenAfterBind() { return impl_->server.listen_after_bind(); }

void RatingServer::WaitUntilReady() const { impl_->server.wait_until_ready(); }

void RatingServer::Stop() { impl_->server.stop(); }

}  // namespace sifid::rating
