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

#ifndef SIFID_SYNTHGEN_H_
#define SIFID_SYNTHGEN_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sifid/correlation.h"
#include "sifid/image.h"
#include "sifid/rng.h"
#include "sifid/subjective.h"

namespace sifid::synthgen {

inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;
inline constexpr int kMinSourceSide = 64;

struct DistortionRecipe {
  int severity = 0;
  double misalignment = 0.0;   // max corner displacement, pixels
  double ghost_opacity = 0.0;  // blend weight of the warped copy
  double seam_position = 0.5;  // fractional column

  // misalignment = 2 * level, ghost_opacity = 0.1 * level, seam at 0.5.
  // Throws InvalidArgument outside 1..5.
  static DistortionRecipe ForSeverity(int level);
};

// Corner order: top-left, top-right, bottom-right, bottom-left; offsets
// are (dx, dy) in pixels.
using CornerOffsets = std::array<std::array<double, 2>, 4>;

// 3x3 row-major homography taking the image corners onto the displaced
// corners. Throws DegenerateQuad unless they form a convex quadrilateral.
std::array<double, 9> CornerHomography(int height, int width,
                                       const CornerOffsets& offsets);

// Inverse-mapped bilinear warp; samples outside the source are black.
Image WarpHomography(const Image& img, const CornerOffsets& offsets);

// Unit-length random corner directions. A source keeps the same directions
// across severities so distortion grows along one path.
CornerOffsets RandomDirections(Rng& rng);

struct StitchedPair {
  Image reference;
  Image stitched;
};

// Columns right of the seam become (1 - a) * source + a * warped, the
// warped copy displaced by misalignment * directions. Throws SourceTooSmall.
StitchedPair MakeStitchedPair(const Image& source, const DistortionRecipe& recipe,
                              const CornerOffsets& directions);
// Draws the directions from `rng`.
StitchedPair MakeStitchedPair(const Image& source, const DistortionRecipe& recipe,
                              Rng& rng);

// Smooth random texture (sinusoids, blobs and edges) for fixtures.
Image ProceduralSource(int height, int width, Rng& rng);
std::vector<Image> ProceduralSources(int count, int height, int width,
                                     std::uint64_t seed);

struct LadderOptions {
  double jitter = 3.0;  // subjective jitter amplitude
  int jobs = 1;
};

struct BundleItem {
  std::string image_id;   // e.g. "s03_l2"
  std::string source_id;  // e.g. "s03"
  int severity = 0;
  Image reference;
  Image stitched;
};

struct Bundle {
  std::uint64_t seed = 0;
  std::vector<std::string> source_ids;
  std::vector<Image> sources;
  std::vector<BundleItem> items;  // source-major, severities ascending
  std::vector<subjective::SubjectiveScore> subjective;
};

std::string SourceId(int index);
std::string ItemId(int source_index, int severity);

// Severities 1..5 for every source plus synthetic subjective scores
// 100 - 20 * (severity - 1) + U[-jitter, jitter]. Throws TooFewSources.
Bundle BuildSeverityLadder(std::span<const Image> sources, std::uint64_t seed,
                           const LadderOptions& options = {});

// Layout: sources/, references/, stitched/, labels.csv
// (image_id,source_id,severity), synthetic_subjective.csv, bundle.json.
void WriteBundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle ReadBundle(const std::filesystem::path& dir);

// One group per severity: all references against that severity's stitched
// images. Subjective ids are the stitched items of the group.
correlation::EvaluationSet SeverityGroups(const Bundle& bundle);

// Groups by source: members are the source's stitched items.
correlation::Grouping SourceGrouping(const Bundle& bundle);

correlation::ScoreMap SubjectiveMap(std::span<const subjective::SubjectiveScore> scores);
correlation::ScoreMap SeverityMap(const Bundle& bundle);

}  // namespace sifid::synthgen

#endif  // SIFID_SYNTHGEN_H_
