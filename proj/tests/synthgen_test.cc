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

#include <cmath>

#include <gtest/gtest.h>

#include "sifid/baselines.h"
#include "sifid/image.h"
#include "test_util.h"

namespace sifid::synthgen {
namespace {

using testing::RandomImage;
using testing::TempDir;

std::array<double, 2> Apply(const std::array<double, 9>& h, double x, double y) {
  const double w = h[6] * x + h[7] * y + h[8];
  return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
}

TEST(RecipeTest, Ladder) {
  for (int l = kMinSeverity; l <= kMaxSeverity; ++l) {
    const auto r = DistortionRecipe::ForSeverity(l);
    EXPECT_EQ(r.severity, l);
    EXPECT_DOUBLE_EQ(r.misalignment, 2.0 * l);
    EXPECT_DOUBLE_EQ(r.ghost_opacity, 0.1 * l);
    EXPECT_DOUBLE_EQ(r.seam_position, 0.5);
  }
  EXPECT_SIFID_ERROR(DistortionRecipe::ForSeverity(0), ErrorCode::kInvalidArgument);
  EXPECT_SIFID_ERROR(DistortionRecipe::ForSeverity(6), ErrorCode::kInvalidArgument);
}

TEST(HomographyTest, MapsCornersOntoTargets) {
  const CornerOffsets off = {{{1.5, -2.0}, {-3.0, 0.5}, {2.0, 2.5}, {0.0, -1.0}}};
  const int h = 40, w = 70;
  const auto H = CornerHomography(h, w, off);
  const double cx[4] = {0, w - 1.0, w - 1.0, 0};
  const double cy[4] = {0, 0, h - 1.0, h - 1.0};
  for (int k = 0; k < 4; ++k) {
    const auto p = Apply(H, cx[k], cy[k]);
    EXPECT_NEAR(p[0], cx[k] + off[k][0], 1e-9);
    EXPECT_NEAR(p[1], cy[k] + off[k][1], 1e-9);
  }
  EXPECT_DOUBLE_EQ(H[8], 1.0);
}

TEST(HomographyTest, TranslationAndIdentity) {
  const CornerOffsets zero{};
  const auto I = CornerHomography(10, 10, zero);
  const double eye[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(I[i], eye[i], 1e-12);
  const CornerOffsets shift = {{{2, 3}, {2, 3}, {2, 3}, {2, 3}}};
  const auto T = CornerHomography(10, 10, shift);
  EXPECT_NEAR(T[2], 2.0, 1e-12);
  EXPECT_NEAR(T[5], 3.0, 1e-12);
  EXPECT_NEAR(T[6], 0.0, 1e-12);
}

TEST(HomographyTest, Degenerate) {
  // Top-right corner dragged past the bottom-left: self-intersecting.
  const CornerOffsets bad = {{{0, 0}, {-20, 20}, {0, 0}, {0, 0}}};
  EXPECT_SIFID_ERROR(CornerHomography(10, 10, bad), ErrorCode::kDegenerateQuad);
  const CornerOffsets nan = {{{std::nan(""), 0}, {0, 0}, {0, 0}, {0, 0}}};
  EXPECT_SIFID_ERROR(CornerHomography(10, 10, nan), ErrorCode::kDegenerateQuad);
}

TEST(WarpTest, IntegerShift) {
  const Image src = RandomImage(12, 16, 3, 4);
  const CornerOffsets shift = {{{1, 0}, {1, 0}, {1, 0}, {1, 0}}};
  const Image out = WarpHomography(src, shift);
  for (int y = 0; y < 12; ++y) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(out.at(y, 0, c), 0.0f);
      for (int x = 1; x < 16; ++x) EXPECT_NEAR(out.at(y, x, c), src.at(y, x - 1, c), 1e-6);
    }
  }
  const Image same = WarpHomography(src, CornerOffsets{});
  for (std::size_t i = 0; i < src.size(); ++i) {
    EXPECT_NEAR(same.data()[i], src.data()[i], 1e-6);
  }
}

TEST(WarpTest, HalfPixelIsAverage) {
  const Image src = RandomImage(8, 8, 1, 6);
  const CornerOffsets shift = {{{0.5, 0}, {0.5, 0}, {0.5, 0}, {0.5, 0}}};
  const Image out = WarpHomography(src, shift);
  for (int y = 0; y < 8; ++y) {
    for (int x = 1; x < 8; ++x) {
      EXPECT_NEAR(out.at(y, x, 0), 0.5 * (src.at(y, x - 1, 0) + src.at(y, x, 0)), 1e-6);
    }
  }
}

TEST(DirectionsTest, UnitLength) {
  Rng rng(3);
  const auto d = RandomDirections(rng);
  for (const auto& v : d) EXPECT_NEAR(std::hypot(v[0], v[1]), 1.0, 1e-12);
}

TEST(StitchTest, LeftOfSeamUntouchedRightBlended) {
  Rng rng(8);
  const Image src = ProceduralSource(64, 80, rng);
  const auto recipe = DistortionRecipe::ForSeverity(3);
  Rng drng(2);
  const auto dirs = RandomDirections(drng);
  const auto pair = MakeStitchedPair(src, recipe, dirs);
  CornerOffsets off;
  for (int k = 0; k < 4; ++k) {
    off[k] = {recipe.misalignment * dirs[k][0], recipe.misalignment * dirs[k][1]};
  }
  const Image warped = WarpHomography(src, off);
  const int seam = 40;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 80; ++x) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(pair.reference.at(y, x, c), src.at(y, x, c));
        const double want = x < seam ? src.at(y, x, c)
                                     : 0.7 * src.at(y, x, c) + 0.3 * warped.at(y, x, c);
        ASSERT_NEAR(pair.stitched.at(y, x, c), want, 1e-5) << y << "," << x;
      }
    }
  }
}

TEST(StitchTest, ZeroOpacityIsIdentity) {
  Rng rng(1);
  const Image src = ProceduralSource(64, 64, rng);
  DistortionRecipe r = DistortionRecipe::ForSeverity(2);
  r.ghost_opacity = 0.0;
  const auto pair = MakeStitchedPair(src, r, rng);
  EXPECT_EQ(baselines::Mse(pair.stitched, src), 0.0);
}

TEST(StitchTest, Errors) {
  Rng rng(1);
  const Image small = RandomImage(63, 100, 3, 1);
  EXPECT_SIFID_ERROR(MakeStitchedPair(small, DistortionRecipe::ForSeverity(1), rng),
                     ErrorCode::kSourceTooSmall);
  DistortionRecipe bad = DistortionRecipe::ForSeverity(1);
  bad.seam_position = 1.5;
  EXPECT_SIFID_ERROR(MakeStitchedPair(RandomImage(64, 64, 3, 1), bad, rng),
                     ErrorCode::kInvalidArgument);
}

TEST(ProceduralTest, DeterministicAndInRange) {
  const auto a = ProceduralSources(3, 64, 72, 11);
  const auto b = ProceduralSources(3, 64, 72, 11);
  ASSERT_EQ(a.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].height(), 64);
    EXPECT_EQ(a[i].width(), 72);
    EXPECT_TRUE(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
    for (float v : a[i].data()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
  EXPECT_GT(baselines::Mse(a[0], a[1]), 0.0);
}

TEST(LadderTest, StructureAndMonotoneDistortion) {
  const auto sources = ProceduralSources(3, 64, 64, 5);
  const Bundle b = BuildSeverityLadder(sources, 77, {.jitter = 3.0, .jobs = 2});
  ASSERT_EQ(b.items.size(), 15u);
  ASSERT_EQ(b.subjective.size(), 15u);
  EXPECT_EQ(b.source_ids, (std::vector<std::string>{"s00", "s01", "s02"}));
  EXPECT_EQ(b.items[7].image_id, ItemId(1, 3));
  EXPECT_EQ(ItemId(3, 2), "s03_l2");
  for (int s = 0; s < 3; ++s) {
    double prev = 0.0;
    for (int l = 1; l <= 5; ++l) {
      const auto& item = b.items[s * 5 + l - 1];
      EXPECT_EQ(item.severity, l);
      EXPECT_EQ(item.source_id, SourceId(s));
      const double mse = baselines::Mse(item.reference, item.stitched);
      EXPECT_GT(mse, prev);
      prev = mse;
      const auto& subj = b.subjective[s * 5 + l - 1];
      EXPECT_EQ(subj.image_id, item.image_id);
      EXPECT_LE(std::abs(subj.value - (100.0 - 20.0 * (l - 1))), 3.0);
    }
  }
  const Bundle again = BuildSeverityLadder(sources, 77, {.jitter = 3.0, .jobs = 1});
  for (std::size_t i = 0; i < b.items.size(); ++i) {
    EXPECT_EQ(b.subjective[i].value, again.subjective[i].value);
    EXPECT_TRUE(std::equal(b.items[i].stitched.data().begin(), b.items[i].stitched.data().end(),
                           again.items[i].stitched.data().begin()));
  }
  EXPECT_SIFID_ERROR(BuildSeverityLadder(std::span(sources).first(1), 1),
                     ErrorCode::kTooFewSources);
}

TEST(LadderTest, GroupingsAndMaps) {
  const auto sources = ProceduralSources(2, 64, 64, 5);
  const Bundle b = BuildSeverityLadder(sources, 1);
  const auto set = SeverityGroups(b);
  EXPECT_EQ(set.grouping, "severity");
  ASSERT_EQ(set.groups.size(), 5u);
  EXPECT_EQ(set.groups[2].id, "severity_3");
  EXPECT_EQ(set.groups[2].reference.size(), 2u);
  EXPECT_EQ(set.groups[2].stitched_ids, (std::vector<std::string>{"s00_l3", "s01_l3"}));
  const auto g = SourceGrouping(b);
  ASSERT_EQ(g.ids.size(), 2u);
  EXPECT_EQ(g.members[1].size(), 5u);
  EXPECT_EQ(SeverityMap(b).at("s01_l4"), 4.0);
  EXPECT_EQ(SubjectiveMap(b.subjective).size(), 10u);
}

TEST(BundleTest, RoundTrip) {
  TempDir dir;
  const auto sources = ProceduralSources(2, 64, 64, 9);
  const Bundle b = BuildSeverityLadder(sources, 12);
  WriteBundle(b, dir.path());
  for (const char* f : {"labels.csv", "synthetic_subjective.csv", "bundle.json",
                        "stitched/s01_l5.png", "references/s00_l1.png", "sources/s01.png"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const Bundle back = ReadBundle(dir.path());
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.source_ids, b.source_ids);
  ASSERT_EQ(back.items.size(), b.items.size());
  for (std::size_t i = 0; i < b.items.size(); ++i) {
    EXPECT_EQ(back.items[i].image_id, b.items[i].image_id);
    EXPECT_EQ(back.items[i].severity, b.items[i].severity);
    EXPECT_EQ(back.subjective[i].value, b.subjective[i].value);
    // 8-bit PNG quantization.
    EXPECT_LT(baselines::Mse(back.items[i].stitched, b.items[i].stitched), 1e-5);
  }
}

}  // namespace
}  // namespace sifid::synthgen
