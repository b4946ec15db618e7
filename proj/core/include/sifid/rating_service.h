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

#ifndef SIFID_RATING_SERVICE_H_
#define SIFID_RATING_SERVICE_H_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sifid/error.h"

namespace sifid::rating {

// Immutable image bytes (PNG) per bundle, in sorted id order.
class ImageCatalog {
 public:
  // Every subdirectory of `root` is a bundle. Images are taken from its
  // stitched/ folder when present, otherwise from the folder itself; the
  // image id is the file stem.
  static ImageCatalog FromRoot(const std::filesystem::path& root);

  void AddBundle(const std::string& bundle_id,
                 const std::filesystem::path& image_dir);
  void AddImage(const std::string& bundle_id, const std::string& image_id,
                std::vector<unsigned char> png);

  bool HasBundle(const std::string& bundle_id) const;
  std::vector<std::string> BundleIds() const;
  // Throws UnknownBundle.
  const std::vector<std::string>& ImageIds(const std::string& bundle_id) const;
  // Throws UnknownBundle / FileNotFound.
  const std::vector<unsigned char>& Png(const std::string& bundle_id,
                                        const std::string& image_id) const;

 private:
  struct BundleData {
    std::vector<std::string> ids;
    std::map<std::string, std::vector<unsigned char>> png;
  };
  std::map<std::string, BundleData> bundles_;
};

struct ScoreEntry {
  std::string image_id;
  double score = 0.0;
  std::int64_t timestamp_ms = 0;
};

struct RatingSession {
  std::string session_id;
  std::string critic_id;
  std::string bundle_id;
  std::uint64_t seed = 0;
  std::vector<std::string> image_order;
  std::size_t cursor = 0;
  std::vector<ScoreEntry> scores;

  bool complete() const { return cursor >= image_order.size(); }
};

std::uint64_t SessionSeed(const std::string& critic_id, const std::string& bundle_id);
std::string SessionId(const std::string& critic_id, const std::string& bundle_id);
// Fisher-Yates shuffle of `ids` driven by `seed`.
std::vector<std::string> PresentationOrder(std::vector<std::string> ids,
                                           std::uint64_t seed);

// Sessions and scores backed by an append-only NDJSON log. Every accepted
// mutation is appended and flushed before it is applied in memory. A torn
// final line (no trailing newline) is ignored on replay.
class RatingStore {
 public:
  RatingStore(ImageCatalog catalog, std::filesystem::path log_path);
  ~RatingStore();
  RatingStore(const RatingStore&) = delete;
  RatingStore& operator=(const RatingStore&) = delete;

  // Throws UnknownBundle / DuplicateSession.
  RatingSession CreateSession(const std::string& critic_id,
                              const std::string& bundle_id);
  // Throws UnknownSession.
  RatingSession GetSession(const std::string& session_id) const;
  // Image id at the cursor. Throws UnknownSession / SessionComplete.
  std::string NextItem(const std::string& session_id) const;
  // Throws UnknownSession / SessionComplete / OutOfOrderSubmission /
  // ScoreOutOfRange.
  RatingSession SubmitScore(const std::string& session_id,
                            const std::string& image_id, double score);
  // "critic_id,image_id,score" rows in session creation order, partial
  // sessions included. Throws UnknownBundle / NothingToExport.
  std::string ExportRatings(const std::string& bundle_id) const;

  const ImageCatalog& catalog() const { return catalog_; }
  std::vector<RatingSession> Sessions() const;

 private:
  void Replay();
  void Append(const std::string& line);

  ImageCatalog catalog_;
  std::filesystem::path log_path_;
  mutable std::mutex mu_;
  std::FILE* log_ = nullptr;
  std::vector<std::string> order_;  // session ids in creation order
  std::map<std::string, RatingSession> sessions_;
};

// HTTP status for an error class: 404 unknown resources, 409 protocol
// conflicts, 422 invalid scores, 400 otherwise.
int HttpStatusFor(ErrorCode code);

// JSON API over a RatingStore:
//   POST /sessions                {critic_id, bundle_id}
//   GET  /sessions/{id}
//   GET  /sessions/{id}/next      -> {image_id, image_url, index, total}
//   POST /sessions/{id}/scores    {image_id, score}
//   GET  /images/{id}?bundle=...  -> PNG bytes
//   GET  /bundles
//   GET  /bundles/{id}/export     -> CSV
// Errors are {error_class, message}.
class RatingServer {
 public:
  explicit RatingServer(RatingStore& store);
  ~RatingServer();

  // Returns the bound port, or -1.
  int BindToAnyPort(const std::string& host = "127.0.0.1");
  bool Bind(const std::string& host, int port);
  // Blocks until Stop().
  bool ListenAfterBind();
  void WaitUntilReady() const;
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sifid::rating

#endif  // SIFID_RATING_SERVICE_H_
