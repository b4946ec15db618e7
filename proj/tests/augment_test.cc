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

#include "sifid/augment.h"

#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.h"

namespace sifid::augment {
namespace {

using testing::RandomImage;
using testing::TempDir;

TEST(CatalogTest, HasFourteenDistinctCanonicalEntries) {
  const auto& cat = Catalog();
  ASSERT_EQ(cat.size(), 14u);
  std::set<std::string> tags;
  for (const auto& spec : cat) {
    EXPECT_TRUE(spec.IsCanonical());
    EXPECT_NO_THROW(spec.Validate());
    EXPECT_TRUE(tags.insert(spec.Tag()).second) << spec.Tag();
    EXPECT_EQ(ParseNoiseTag(spec.Tag()), spec);
  }
  EXPECT_TRUE(tags.count("gaussianblur_k3"));
  EXPECT_TRUE(tags.count("gaussianblur_k39"));
  EXPECT_TRUE(tags.count("hflip_p0.5"));
  EXPECT_TRUE(tags.count("grayscale_p0.8"));
  EXPECT_TRUE(tags.count("colorjitter_b0.5_h0.3"));
  EXPECT_TRUE(tags.count("resizedcrop_s150"));
}

TEST(CatalogTest, NonCanonicalSpecsParseButAreFlagged) {
  const NoiseSpec spec = ParseNoiseTag("gaussianblur_k5");
  EXPECT_EQ(spec.kernel, 5);
  EXPECT_FALSE(spec.IsCanonical());
  EXPECT_SIFID_ERROR(ParseNoiseTag("sharpen_k3"), ErrorCode::kConfigInvalid);
}

TEST(NoiseSpecTest, ValidationErrors) {
  EXPECT_SIFID_ERROR(NoiseSpec::GaussianBlur(4).Validate(), ErrorCode::kEvenKernel);
  EXPECT_SIFID_ERROR(NoiseSpec::ColorJitter(0.5, 0.6).Validate(), ErrorCode::kHueOutOfRange);
  EXPECT_SIFID_ERROR(NoiseSpec::HorizontalFlip(1.5).Validate(), ErrorCode::kInvalidArgument);
}

TEST(BlurTest, SigmaFollowsKernelRule) {
  EXPECT_NEAR(BlurSigma(3), 0.8, 1e-12);
  EXPECT_NEAR(BlurSigma(13), 0.3 * 5 + 0.8, 1e-12);
  EXPECT_NEAR(BlurSigma(39), 0.3 * 18 + 0.8, 1e-12);
}

TEST(BlurTest, KernelIsNormalizedSymmetricGaussian) {
  for (int k : {1, 3, 13, 39}) {
    const auto w = GaussianKernel1D(k);
    ASSERT_EQ(static_cast<int>(w.size()), k);
    double sum = 0.0;
    for (double v : w) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double s = BlurSigma(k);
    const int r = k / 2;
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(w[i], w[k - 1 - i], 1e-15);
      if (i + 1 < k && k > 1) {
        const double expected = std::exp(-((i - r) * (i - r) - (i + 1 - r) * (i + 1 - r)) /
                                         (2 * s * s));
        EXPECT_NEAR(w[i] / w[i + 1], expected, 1e-9);
      }
    }
  }
}

// Direct 2-D convolution with mirrored borders (no edge repeat).
Image NaiveBlur(const Image& img, int k) {
  const double s = BlurSigma(k);
  const int r = k / 2;
  std::vector<double> g(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) total += g[i] = std::exp(-(i - r) * (i - r) / (2 * s * s));
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            acc += g[dy + r] * g[dx + r] / (total * total) *
                   img.at(mirror(y + dy, img.height()), mirror(x + dx, img.width()), c);
          }
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

TEST(BlurTest, MatchesDirectConvolution) {
  const Image img = RandomImage(15, 17, 3, 21);
  for (int k : {3, 13}) {
    const Image fast = GaussianBlur(img, k);
    const Image slow = NaiveBlur(img, k);
    for (std::size_t i = 0; i < img.size(); ++i) {
      ASSERT_NEAR(fast.data()[i], slow.data()[i], 1e-5) << "k=" << k;
    }
  }
}

TEST(BlurTest, ConstantImageIsFixedAndLargeKernelRejected) {
  const Image flat = Image::Filled(20, 20, 3, 0.3f);
  const Image out = GaussianBlur(flat, 13);
  for (float v : out.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
  EXPECT_SIFID_ERROR(GaussianBlur(flat, 39), ErrorCode::kKernelLargerThanImage);
  EXPECT_SIFID_ERROR(GaussianBlur(flat, 4), ErrorCode::kEvenKernel);
}

TEST(FlipTest, ProbabilityExtremes) {
  const Image img = RandomImage(4, 5, 3, 2);
  Rng rng(1);
  const Image same = HorizontalFlip(img, 0.0, rng);
  EXPECT_EQ(same, img);
  const Image flipped = HorizontalFlip(img, 1.0, rng);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(flipped.at(y, x, c), img.at(y, 4 - x, c));
    }
  }
  EXPECT_EQ(HorizontalFlip(flipped, 1.0, rng), img);
}

TEST(FlipTest, FlipRateMatchesProbability) {
  const Image img = RandomImage(2, 3, 1, 4);
  Rng rng(8);
  int flips = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) flips += !(HorizontalFlip(img, 0.8, rng) == img);
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.8, 0.03);
}

TEST(GrayscaleTest, KeepsThreeEqualChannels) {
  const Image img = RandomImage(3, 3, 3, 5);
  Rng rng(2);
  const Image g = GrayscaleWithProb(img, 1.0, rng);
  ASSERT_EQ(g.channels(), 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      const double luma =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(g.at(y, x, c), luma, 1e-6);
    }
  }
}

TEST(ColorTest, BrightnessScalesAndClamps) {
  const Image img(1, 2, 1, {0.4f, 0.8f});
  const Image out = AdjustBrightness(img, 1.5);
  EXPECT_NEAR(out.at(0, 0, 0), 0.6f, 1e-6);
  EXPECT_EQ(out.at(0, 1, 0), 1.0f);
}

TEST(ColorTest, HueRotationOnPrimaries) {
  const Image red(1, 1, 3, {1.0f, 0.0f, 0.0f});
  const Image green = RotateHue(red, 1.0 / 3.0);
  EXPECT_NEAR(green.at(0, 0, 0), 0.0, 1e-6);
  EXPECT_NEAR(green.at(0, 0, 1), 1.0, 1e-6);
  EXPECT_NEAR(green.at(0, 0, 2), 0.0, 1e-6);
  const Image blue = RotateHue(red, -1.0 / 3.0);
  EXPECT_NEAR(blue.at(0, 0, 2), 1.0, 1e-6);
  const Image gray(1, 1, 3, {0.4f, 0.4f, 0.4f});
  EXPECT_EQ(RotateHue(gray, 0.25), gray);
}

TEST(ColorTest, HueRotationRoundTrip) {
  const Image img = RandomImage(6, 6, 3, 12);
  const Image back = RotateHue(RotateHue(img, 0.2), -0.2);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-5);
}

TEST(ColorTest, JitterIsSeededAndBounded) {
  const Image img = RandomImage(8, 8, 3, 13);
  Rng a(77), b(77);
  EXPECT_EQ(ColorJitter(img, 0.5, 0.3, a), ColorJitter(img, 0.5, 0.3, b));
  Rng c(1);
  EXPECT_EQ(ColorJitter(img, 0.0, 0.0, c), img);
}

TEST(CropTest, OutputHasRequestedSide) {
  const Image img = RandomImage(48, 64, 3, 6);
  Rng rng(3);
  for (int side : {39, 100, 190}) {
    const Image out = RandomResizedCrop(img, side, rng);
    EXPECT_EQ(out.height(), side);
    EXPECT_EQ(out.width(), side);
    EXPECT_EQ(out.channels(), 3);
  }
}

TEST(ApplyNoiseTest, DeterministicPerSubstream) {
  const Image img = RandomImage(40, 40, 3, 30);
  for (const auto& spec : Catalog()) {
    Rng a = Rng(5).Substream({1, 2});
    Rng b = Rng(5).Substream({1, 2});
    EXPECT_EQ(ApplyNoise(spec, img, a), ApplyNoise(spec, img, b)) << spec.Tag();
  }
}

TEST(DistortedSetTest, CountsNamesManifestAndReproducibility) {
  TempDir dir;
  const auto in = dir / "in";
  std::filesystem::create_directories(in);
  for (int i = 0; i < 3; ++i) {
    SaveImage(RandomImage(48, 64, 3, 100 + i), in / ("img" + std::to_string(i) + ".png"));
  }
  const auto m1 = BuildDistortedSet(in, Catalog(), 9, dir / "a");
  DistortOptions two_jobs;
  two_jobs.jobs = 2;
  const auto m2 = BuildDistortedSet(in, Catalog(), 9, dir / "b", two_jobs);
  ASSERT_EQ(m1.size(), 3u * 14u);
  ASSERT_EQ(m2.size(), m1.size());
  for (std::size_t k = 0; k < m1.size(); ++k) {
    const auto name = std::filesystem::path(m1[k].output_path).filename().string();
    EXPECT_EQ(name, std::filesystem::path(m2[k].output_path).filename().string());
    EXPECT_NE(name.find("__" + m1[k].spec.Tag() + ".png"), std::string::npos);
    EXPECT_EQ(testing::ReadFileBytes(dir / "a" / name), testing::ReadFileBytes(dir / "b" / name));
  }
  const auto manifest =
      nlohmann::json::parse(testing::ReadFileBytes(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest.size(), m1.size());

  const auto m3 = BuildDistortedSet(in, Catalog(), 10, dir / "c");
  int differing = 0;
  for (const auto& e : m3) {
    const auto name = std::filesystem::path(e.output_path).filename().string();
    differing += testing::ReadFileBytes(dir / "a" / name) != testing::ReadFileBytes(dir / "c" / name);
  }
  EXPECT_GT(differing, 0);
}

TEST(DistortedSetTest, EmptyInputDir) {
  TempDir dir;
  std::filesystem::create_directories(dir / "in");
  EXPECT_SIFID_ERROR(BuildDistortedSet(dir / "in", Catalog(), 1, dir / "out"),
                     ErrorCode::kEmptyInputDir);
}

}  // namespace
}  // namespace sifid::augment
