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

#include "sifid/synthgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "csv.h"
#include "sifid/error.h"
#include "sifid/parallel.h"

namespace sifid::synthgen {
namespace fs = std::filesystem;

DistortionRecipe DistortionRecipe::ForSeverity(int level) {
  if (level < kMinSeverity || level > kMaxSeverity) {
    throw Error(ErrorCode::kInvalidArgument,
                "severity must be in 1..5, got " + std::to_string(level));
  }
  DistortionRecipe r;
  r.severity = level;
  r.misalignment = 2.0 * level;
  r.ghost_opacity = 0.1 * level;
  r.seam_position = 0.5;
  return r;
}

namespace {

using Corners = std::array<std::array<double, 2>, 4>;

Corners ImageCorners(int height, int width) {
  const double x1 = width - 1;
  const double y1 = height - 1;
  return {{{0.0, 0.0}, {x1, 0.0}, {x1, y1}, {0.0, y1}}};
}

bool IsConvex(const Corners& q) {
  double sign = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = q[i];
    const auto& b = q[(i + 1) % 4];
    const auto& c = q[(i + 2) % 4];
    const double cross =
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    if (std::abs(cross) < 1e-9) return false;
    if (sign == 0.0) sign = cross;
    if ((cross > 0) != (sign > 0)) return false;
  }
  return true;
}

}  // namespace

std::array<double, 9> CornerHomography(int height, int width,
                                       const CornerOffsets& offsets) {
  const Corners src = ImageCorners(height, width);
  Corners dst;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 2; ++k) {
      if (!std::isfinite(offsets[i][k])) {
        throw Error(ErrorCode::kDegenerateQuad, "non-finite corner offset");
      }
      dst[i][k] = src[i][k] + offsets[i][k];
    }
  }
  if (!IsConvex(src) || !IsConvex(dst)) {
    throw Error(ErrorCode::kDegenerateQuad,
                "displaced corners are not a convex quadrilateral");
  }
  // h33 = 1; two equations per correspondence.
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i][0], y = src[i][1];
    const double u = dst[i][0], v = dst[i][1];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  std::array<double, 9> out;
  for (int i = 0; i < 8; ++i) out[i] = h(i);
  out[8] = 1.0;
  return out;
}

Image WarpHomography(const Image& img, const CornerOffsets& offsets) {
  const auto h = CornerHomography(img.height(), img.width(), offsets);
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d inv = m.inverse();
  const int hh = img.height(), ww = img.width(), cc = img.channels();
  constexpr double kEdge = 1e-6;
  Image out(hh, ww, cc);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < ww; ++x) {
      const Eigen::Vector3d p = inv * Eigen::Vector3d(x, y, 1.0);
      if (std::abs(p(2)) < 1e-12) continue;
      double sx = p(0) / p(2);
      double sy = p(1) / p(2);
      if (sx < -kEdge || sy < -kEdge || sx > ww - 1 + kEdge || sy > hh - 1 + kEdge) {
        continue;
      }
      sx = std::clamp(sx, 0.0, static_cast<double>(ww - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(hh - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, ww - 1);
      const int y1 = std::min(y0 + 1, hh - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < cc; ++c) {
        const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
        const double bot = (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

CornerOffsets RandomDirections(Rng& rng) {
  CornerOffsets d;
  for (auto& corner : d) {
    const double angle = rng.Uniform(0.0, 2.0 * M_PI);
    corner = {std::cos(angle), std::sin(angle)};
  }
  return d;
}

StitchedPair MakeStitchedPair(const Image& source, const DistortionRecipe& recipe,
                              const CornerOffsets& directions) {
  if (std::min(source.height(), source.width()) < kMinSourceSide) {
    throw Error(ErrorCode::kSourceTooSmall,
                std::to_string(source.height()) + "x" +
                    std::to_string(source.width()) + " source, need >= 64");
  }
  if (recipe.ghost_opacity < 0.0 || recipe.ghost_opacity > 1.0 ||
      recipe.misalignment < 0.0 || !(recipe.seam_position > 0.0) ||
      !(recipe.seam_position < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "recipe fields out of range");
  }
  StitchedPair pair{source, source};
  if (recipe.ghost_opacity == 0.0) return pair;
  CornerOffsets offsets;
  for (int i = 0; i < 4; ++i) {
    offsets[i] = {recipe.misalignment * directions[i][0],
                  recipe.misalignment * directions[i][1]};
  }
  const Image warped = WarpHomography(source, offsets);
  const int seam = static_cast<int>(std::lround(recipe.seam_position * source.width()));
  const float a = static_cast<float>(recipe.ghost_opacity);
  for (int y = 0; y < source.height(); ++y) {
    for (int x = seam; x < source.width(); ++x) {
      for (int c = 0; c < source.channels(); ++c) {
        pair.stitched.at(y, x, c) =
            (1.0f - a) * source.at(y, x, c) + a * warped.at(y, x, c);
      }
    }
  }
  return pair;
}

StitchedPair MakeStitchedPair(const Image& source, const DistortionRecipe& recipe,
                              Rng& rng) {
  return MakeStitchedPair(source, recipe, RandomDirections(rng));
}

Image ProceduralSource(int height, int width, Rng& rng) {
  Image img(height, width, 3);
  struct Grating {
    double fx, fy, phase, amp;
    std::array<double, 3> color;
  };
  std::vector<Grating> gratings(5);
  for (auto& g : gratings) {
    const double freq = rng.Uniform(0.02, 0.25);
    const double angle = rng.Uniform(0.0, M_PI);
    g = {freq * std::cos(angle), freq * std::sin(angle), rng.Uniform(0.0, 2 * M_PI),
         rng.Uniform(0.05, 0.15), {rng.Uniform(), rng.Uniform(), rng.Uniform()}};
  }
  struct Blob {
    double cx, cy, r;
    std::array<double, 3> color;
  };
  std::vector<Blob> blobs(4);
  for (auto& b : blobs) {
    b = {rng.Uniform(0, width), rng.Uniform(0, height),
         rng.Uniform(0.08, 0.3) * std::min(height, width),
         {rng.Uniform(-0.3, 0.3), rng.Uniform(-0.3, 0.3), rng.Uniform(-0.3, 0.3)}};
  }
  struct Rect {
    int x0, y0, x1, y1;
    std::array<double, 3> color;
  };
  std::vector<Rect> rects(3);
  for (auto& r : rects) {
    const int x0 = static_cast<int>(rng.UniformInt(0, width - 1));
    const int y0 = static_cast<int>(rng.UniformInt(0, height - 1));
    r = {x0, y0, x0 + static_cast<int>(rng.UniformInt(4, width / 2)),
         y0 + static_cast<int>(rng.UniformInt(4, height / 2)),
         {rng.Uniform(-0.2, 0.2), rng.Uniform(-0.2, 0.2), rng.Uniform(-0.2, 0.2)}};
  }
  const std::array<double, 3> base = {rng.Uniform(0.3, 0.7), rng.Uniform(0.3, 0.7),
                                      rng.Uniform(0.3, 0.7)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = base[c];
        for (const auto& g : gratings) {
          v += g.amp * (0.5 + 0.5 * g.color[c]) *
               std::sin(2 * M_PI * (g.fx * x + g.fy * y) + g.phase);
        }
        for (const auto& b : blobs) {
          const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
          v += b.color[c] * std::exp(-d2 / (2 * b.r * b.r));
        }
        for (const auto& r : rects) {
          if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1) v += r.color[c];
        }
        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<Image> ProceduralSources(int count, int height, int width,
                                     std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(count);
  const Rng root(seed);
  for (int i = 0; i < count; ++i) {
    Rng rng = root.Substream({0x50, static_cast<std::uint64_t>(i)});
    out.push_back(ProceduralSource(height, width, rng));
  }
  return out;
}

std::string SourceId(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", index);
  return buf;
}

std::string ItemId(int source_index, int severity) {
  return SourceId(source_index) + "_l" + std::to_string(severity);
}

Bundle BuildSeverityLadder(std::span<const Image> sources, std::uint64_t seed,
                           const LadderOptions& options) {
  if (sources.size() < 2) {
    throw Error(ErrorCode::kTooFewSources,
                "need >= 2 sources, got " + std::to_string(sources.size()));
  }
  if (!(options.jitter >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "jitter must be >= 0");
  }
  constexpr int kLevels = kMaxSeverity - kMinSeverity + 1;
  Bundle bundle;
  bundle.seed = seed;
  bundle.sources.assign(sources.begin(), sources.end());
  bundle.items.resize(sources.size() * kLevels);
  bundle.subjective.resize(bundle.items.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    bundle.source_ids.push_back(SourceId(static_cast<int>(s)));
  }
  const Rng root(seed);
  ParallelFor(sources.size(), options.jobs, [&](std::size_t s) {
    Rng dir_rng = root.Substream({0xD1, s});
    const CornerOffsets directions = RandomDirections(dir_rng);
    Rng jitter_rng = root.Substream({0x51, s});
    for (int level = kMinSeverity; level <= kMaxSeverity; ++level) {
      const std::size_t k = s * kLevels + (level - kMinSeverity);
      auto pair = MakeStitchedPair(sources[s], DistortionRecipe::ForSeverity(level),
                                   directions);
      BundleItem& item = bundle.items[k];
      item.image_id = ItemId(static_cast<int>(s), level);
      item.source_id = bundle.source_ids[s];
      item.severity = level;
      item.reference = std::move(pair.reference);
      item.stitched = std::move(pair.stitched);
      const double jitter = jitter_rng.Uniform(-1.0, 1.0) * options.jitter;
      bundle.subjective[k] = {item.image_id, 100.0 - 20.0 * (level - 1) + jitter, 1};
    }
  });
  return bundle;
}

void WriteBundle(const Bundle& bundle, const fs::path& dir) {
  for (const char* sub : {"sources", "references", "stitched"}) {
    fs::create_directories(dir / sub);
  }
  for (std::size_t s = 0; s < bundle.sources.size(); ++s) {
    SaveImage(bundle.sources[s], dir / "sources" / (bundle.source_ids[s] + ".png"));
  }
  std::ofstream labels(dir / "labels.csv", std::ios::trunc);
  labels << "image_id,source_id,severity\n";
  for (const auto& item : bundle.items) {
    SaveImage(item.reference, dir / "references" / (item.image_id + ".png"));
    SaveImage(item.stitched, dir / "stitched" / (item.image_id + ".png"));
    labels << item.image_id << ',' << item.source_id << ',' << item.severity << '\n';
  }
  if (!labels) throw Error(ErrorCode::kWriteFailure, (dir / "labels.csv").string());
  subjective::WriteScoresCsv(bundle.subjective, dir / "synthetic_subjective.csv");
  nlohmann::ordered_json meta;
  meta["seed"] = bundle.seed;
  meta["sources"] = bundle.source_ids;
  meta["items"] = bundle.items.size();
  meta["severities"] = {kMinSeverity, kMaxSeverity};
  std::ofstream out(dir / "bundle.json", std::ios::trunc);
  out << meta.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kWriteFailure, (dir / "bundle.json").string());
}

Bundle ReadBundle(const fs::path& dir) {
  const fs::path labels_path = dir / "labels.csv";
  const auto rows = internal::ParseCsvText(internal::ReadText(labels_path));
  const std::vector<std::string> header = {"image_id", "source_id", "severity"};
  if (rows.empty() || rows[0] != header) {
    throw Error(ErrorCode::kParseError, labels_path.string() + ": bad header");
  }
  Bundle bundle;
  std::map<std::string, std::size_t> source_index;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = labels_path.string() + ":" + std::to_string(r + 1);
    if (row.size() != 3) throw Error(ErrorCode::kParseError, where);
    BundleItem item;
    item.image_id = row[0];
    item.source_id = row[1];
    item.severity = static_cast<int>(internal::ParseDouble(row[2], where));
    if (!source_index.count(item.source_id)) {
      source_index[item.source_id] = bundle.source_ids.size();
      bundle.source_ids.push_back(item.source_id);
      bundle.sources.push_back(LoadImage(dir / "sources" / (item.source_id + ".png")));
    }
    item.reference = LoadImage(dir / "references" / (item.image_id + ".png"));
    item.stitched = LoadImage(dir / "stitched" / (item.image_id + ".png"));
    bundle.items.push_back(std::move(item));
  }
  if (bundle.items.empty()) {
    throw Error(ErrorCode::kEmptyTestSet, labels_path.string() + " lists no images");
  }
  bundle.subjective = subjective::ReadScoresCsv(dir / "synthetic_subjective.csv");
  if (fs::exists(dir / "bundle.json")) {
    const auto meta = nlohmann::json::parse(internal::ReadText(dir / "bundle.json"),
                                            nullptr, false);
    if (meta.is_object() && meta.contains("seed")) {
      bundle.seed = meta["seed"].get<std::uint64_t>();
    }
  }
  return bundle;
}

correlation::EvaluationSet SeverityGroups(const Bundle& bundle) {
  correlation::EvaluationSet set;
  set.grouping = "severity";
  std::map<int, correlation::EvalGroup> by_level;
  for (const auto& item : bundle.items) {
    auto& g = by_level[item.severity];
    g.id = "severity_" + std::to_string(item.severity);
    g.stitched.push_back(item.stitched);
    g.stitched_ids.push_back(item.image_id);
  }
  for (auto& [level, g] : by_level) {
    g.reference = bundle.sources;
    set.groups.push_back(std::move(g));
  }
  return set;
}

correlation::Grouping SourceGrouping(const Bundle& bundle) {
  correlation::Grouping grouping;
  std::map<std::string, std::size_t> index;
  for (const auto& item : bundle.items) {
    auto it = index.find(item.source_id);
    if (it == index.end()) {
      it = index.emplace(item.source_id, grouping.ids.size()).first;
      grouping.ids.push_back(item.source_id);
      grouping.members.emplace_back();
    }
    grouping.members[it->second].push_back(item.image_id);
  }
  return grouping;
}

correlation::ScoreMap SubjectiveMap(std::span<const subjective::SubjectiveScore> scores) {
  correlation::ScoreMap m;
  for (const auto& s : scores) m[s.image_id] = s.value;
  return m;
}

correlation::ScoreMap SeverityMap(const Bundle& bundle) {
  correlation::ScoreMap m;
  for (const auto& item : bundle.items) m[item.image_id] = item.severity;
  return m;
}

}  // namespace sifid::synthgen
