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

#include "sifid/encoder.h"

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"

namespace sifid::encoder {
namespace {

using testing::RandomImage;
using testing::TempDir;

EncoderConfig Tiny() {
  EncoderConfig cfg;
  cfg.input_side = 8;
  cfg.widths = {3, 4};
  cfg.feature_dim = 5;
  cfg.leaky_slope = 0.1;
  cfg.init_seed = 4;
  return cfg;
}

// Straightforward re-implementation used as the reference.
std::vector<double> NaiveForward(const EncoderConfig& cfg, std::span<const double> p,
                                 const Image& img) {
  const int side = cfg.input_side;
  std::vector<double> act(3 * side * side);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        act[(c * side + y) * side + x] = img.at(y, x, img.channels() == 1 ? 0 : c);
      }
    }
  }
  std::size_t off = 0;
  int in_ch = 3, n = side;
  for (int out_ch : cfg.widths) {
    const int m = (n - 1) / 2 + 1;
    std::vector<double> next(out_ch * m * m);
    const std::size_t bias = off + static_cast<std::size_t>(out_ch) * in_ch * 9;
    for (int o = 0; o < out_ch; ++o) {
      for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
          double acc = p[bias + o];
          for (int i = 0; i < in_ch; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = 2 * y - 1 + ky, sx = 2 * x - 1 + kx;
                if (sy < 0 || sx < 0 || sy >= n || sx >= n) continue;
                acc += p[off + ((o * in_ch + i) * 3 + ky) * 3 + kx] *
                       act[(i * n + sy) * n + sx];
              }
            }
          }
          next[(o * m + y) * m + x] = acc > 0 ? acc : cfg.leaky_slope * acc;
        }
      }
    }
    off = bias + out_ch;
    act = std::move(next);
    in_ch = out_ch;
    n = m;
  }
  std::vector<double> pooled(in_ch, 0.0);
  for (int c = 0; c < in_ch; ++c) {
    for (int k = 0; k < n * n; ++k) pooled[c] += act[c * n * n + k];
    pooled[c] /= n * n;
  }
  std::vector<double> f(cfg.feature_dim);
  const std::size_t bias = off + static_cast<std::size_t>(cfg.feature_dim) * in_ch;
  for (int k = 0; k < cfg.feature_dim; ++k) {
    f[k] = p[bias + k];
    for (int c = 0; c < in_ch; ++c) f[k] += p[off + k * in_ch + c] * pooled[c];
  }
  return f;
}

TEST(EncoderConfigTest, DefaultParameterCount) {
  const EncoderConfig cfg;
  const std::size_t expected = (9 * 3 * 8 + 8) + (9 * 8 * 16 + 16) +
                               (9 * 16 * 32 + 32) + (32 * 64 + 64);
  EXPECT_EQ(ParameterCount(cfg), expected);
  EXPECT_EQ(expected, 8144u);
  EXPECT_EQ(Encoder::Init(cfg).parameter_count(), expected);
}

TEST(EncoderConfigTest, RejectsBadConfigs) {
  EncoderConfig cfg;
  cfg.input_side = 60;
  EXPECT_SIFID_ERROR(cfg.Validate(), ErrorCode::kInvalidConfig);
  cfg = EncoderConfig();
  cfg.feature_dim = 1;
  EXPECT_SIFID_ERROR(cfg.Validate(), ErrorCode::kInvalidConfig);
  EXPECT_SIFID_ERROR(Encoder(EncoderConfig(), std::vector<double>(10)),
                     ErrorCode::kInvalidConfig);
}

TEST(EncoderTest, InitIsSeededXavier) {
  const EncoderConfig cfg;
  const Encoder a = Encoder::Init(cfg), b = Encoder::Init(cfg);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(),
                         b.parameters().begin()));
  EncoderConfig other = cfg;
  other.init_seed = 1;
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(),
                          Encoder::Init(other).parameters().begin()));
  // First conv: fan_in = 27, fan_out = 72.
  const double limit = std::sqrt(6.0 / (27.0 + 72.0));
  const auto p = a.parameters();
  for (std::size_t i = a.conv_weight_offset(0); i < a.conv_bias_offset(0); ++i) {
    EXPECT_LE(std::abs(p[i]), limit);
  }
  for (std::size_t i = a.conv_bias_offset(0); i < a.conv_weight_offset(1); ++i) {
    EXPECT_EQ(p[i], 0.0);
  }
}

TEST(EncoderTest, ForwardMatchesNaiveImplementation) {
  const EncoderConfig cfg = Tiny();
  Encoder enc = Encoder::Init(cfg);
  // Non-zero biases exercise the bias layout too.
  std::vector<double> p(enc.parameters().begin(), enc.parameters().end());
  Rng rng(3);
  for (double& v : p) v += rng.Uniform(-0.2, 0.2);
  enc.SetParameters(p);
  for (int c : {1, 3}) {
    const Image img = RandomImage(8, 8, c, 50 + c);
    const auto fast = Forward(enc, img);
    const auto slow = NaiveForward(cfg, p, img);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-12);
  }
}

TEST(EncoderTest, DefaultForwardMatchesNaive) {
  const Encoder enc = Encoder::Init(EncoderConfig());
  const Image img = Preprocess(RandomImage(80, 100, 3, 2), 64);
  const auto fast = Forward(enc, img);
  const auto slow = NaiveForward(enc.config(), enc.parameters(), img);
  for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-10);
}

TEST(EncoderTest, ShapeErrors) {
  const Encoder enc = Encoder::Init(Tiny());
  EXPECT_SIFID_ERROR(Forward(enc, RandomImage(9, 8, 3, 1)), ErrorCode::kShapeMismatch);
  EXPECT_SIFID_ERROR(ForwardBatch(enc, std::vector<Image>{}), ErrorCode::kEmptyBatch);
}

TEST(EncoderTest, BatchRowsEqualSingleForward) {
  const Encoder enc = Encoder::Init(Tiny());
  std::vector<Image> imgs;
  for (int i = 0; i < 5; ++i) imgs.push_back(RandomImage(8, 8, 3, 70 + i));
  const FeatureSet serial = ForwardBatch(enc, imgs, 1);
  const FeatureSet parallel = ForwardBatch(enc, imgs, 3);
  EXPECT_EQ(serial, parallel);
  for (int i = 0; i < 5; ++i) {
    const auto f = Forward(enc, imgs[i]);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(serial(i, k), f[k]);
  }
}

TEST(EncoderTest, PreprocessResizesAndReplicatesGray) {
  const Image out = Preprocess(RandomImage(20, 30, 1, 3), 16);
  EXPECT_EQ(out.height(), 16);
  EXPECT_EQ(out.width(), 16);
  EXPECT_EQ(out.channels(), 3);
  EXPECT_EQ(out.at(4, 5, 0), out.at(4, 5, 2));
}

TEST(BackwardTest, MatchesFiniteDifferencesOnTinyNet) {
  const EncoderConfig cfg = Tiny();
  Encoder enc = Encoder::Init(cfg);
  const Image img = RandomImage(8, 8, 3, 81);
  const std::vector<double> g = {0.3, -1.0, 0.5, 0.2, -0.7};
  const auto trace = ForwardWithTrace(enc, img);
  const auto grad = Backward(enc, trace, g);
  std::vector<double> p(enc.parameters().begin(), enc.parameters().end());
  auto objective = [&](const std::vector<double>& q) {
    const auto f = NaiveForward(cfg, q, img);
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += g[k] * f[k];
    return s;
  };
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (objective(plus) - objective(minus)) / (2 * h);
    if (std::abs(numeric - grad[i]) > 1e-6 * std::max(1.0, std::abs(numeric))) {
      ADD_FAILURE() << "param " << i << " analytic " << grad[i] << " numeric " << numeric;
    }
    ++checked;
  }
  EXPECT_EQ(checked, static_cast<int>(p.size()));
}

TEST(BackwardTest, SeedScalesGradient) {
  const Encoder enc = Encoder::Init(Tiny());
  const auto trace = ForwardWithTrace(enc, RandomImage(8, 8, 3, 2));
  const std::vector<double> g(5, 1.0);
  const auto a = Backward(enc, trace, g, 1.0);
  const auto b = Backward(enc, trace, g, -0.5);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], -0.5 * a[i], 1e-15);
}

TEST(BackwardTest, StaleTraceIsRejected) {
  Encoder enc = Encoder::Init(Tiny());
  const auto trace = ForwardWithTrace(enc, RandomImage(8, 8, 3, 2));
  const std::vector<double> g(5, 1.0);
  EXPECT_SIFID_ERROR(Backward(enc, ForwardTrace{}, g), ErrorCode::kStaleCache);
  std::vector<double> p(enc.parameters().begin(), enc.parameters().end());
  enc.SetParameters(p);
  EXPECT_SIFID_ERROR(Backward(enc, trace, g), ErrorCode::kStaleCache);
  EXPECT_SIFID_ERROR(Backward(enc, ForwardWithTrace(enc, RandomImage(8, 8, 3, 2)),
                              std::vector<double>(4, 1.0)),
                     ErrorCode::kLengthMismatch);
}

TEST(FeatureFileTest, RoundTripAndErrors) {
  TempDir dir;
  FeatureSet f(3, 4);
  f << 1, 2, 3, 4, 0.5, -0.25, 1e-3, 7, 9, 8, 7, 6;
  SaveFeatureFile(f, dir / "f.bin");
  const FeatureSet back = LoadFeatureFile(dir / "f.bin");
  ASSERT_EQ(back.rows(), 3);
  ASSERT_EQ(back.cols(), 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(back(i, j), static_cast<double>(static_cast<float>(f(i, j))));
  }
  const std::string bytes = testing::ReadFileBytes(dir / "f.bin");
  EXPECT_EQ(bytes.size(), 8u + 4u + 4u + 4u + 12u * 4u);
  testing::WriteFileBytes(dir / "short.bin", bytes.substr(0, bytes.size() - 4));
  EXPECT_SIFID_ERROR(LoadFeatureFile(dir / "short.bin"), ErrorCode::kFormatMismatch);
  std::string zero_d = bytes;
  zero_d[12] = zero_d[13] = zero_d[14] = zero_d[15] = 0;
  testing::WriteFileBytes(dir / "zero.bin", zero_d);
  EXPECT_SIFID_ERROR(LoadFeatureFile(dir / "zero.bin"), ErrorCode::kDimensionHeaderInvalid);
  testing::WriteFileBytes(dir / "magic.bin", "NOTMAGIC" + bytes.substr(8));
  EXPECT_SIFID_ERROR(LoadFeatureFile(dir / "magic.bin"), ErrorCode::kFormatMismatch);
}

TEST(CheckpointTest, RoundTripIsExact) {
  TempDir dir;
  const Encoder enc = Encoder::Init(Tiny());
  CheckpointMeta meta{"hflip_p0.5", 7, 123, "epochs = 10\n"};
  SaveCheckpoint(dir / "c.ckpt", enc, meta);
  const Checkpoint back = LoadCheckpoint(dir / "c.ckpt");
  EXPECT_EQ(back.encoder.config(), enc.config());
  EXPECT_TRUE(std::equal(enc.parameters().begin(), enc.parameters().end(),
                         back.encoder.parameters().begin()));
  EXPECT_EQ(back.meta.noise_tag, "hflip_p0.5");
  EXPECT_EQ(back.meta.epoch, 7);
  EXPECT_EQ(back.meta.seed, 123u);
  EXPECT_EQ(back.meta.config_echo, "epochs = 10\n");
  const std::string bytes = testing::ReadFileBytes(dir / "c.ckpt");
  testing::WriteFileBytes(dir / "cut.ckpt", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(LoadCheckpoint(dir / "cut.ckpt"), Error);
  EXPECT_SIFID_ERROR(LoadCheckpoint(dir / "none.ckpt"), ErrorCode::kFileNotFound);
}

}  // namespace
}  // namespace sifid::encoder
