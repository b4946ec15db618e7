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

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "sifid/augment.h"
#include "sifid/baselines.h"
#include "sifid/encoder.h"
#include "sifid/fid.h"
#include "sifid/rng.h"
#include "sifid/synthgen.h"

namespace sifid {
namespace {

Eigen::MatrixXd RandomPsd(int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a(d, d + 4);
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) a(i, j) = rng.Normal();
  }
  Eigen::MatrixXd m = a * a.transpose() / static_cast<double>(a.cols());
  return 0.5 * (m + m.transpose());
}

fid::GaussianStats RandomStats(int d, std::uint64_t seed) {
  fid::GaussianStats g;
  g.cov = RandomPsd(d, seed);
  g.mean = g.cov.col(0);
  g.sample_count = 10 * d;
  return g;
}

void BM_FrechetDistance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto a = RandomStats(d, 1);
  const auto b = RandomStats(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fid::FrechetDistance(a, b));
}
BENCHMARK(BM_FrechetDistance)->Arg(16)->Arg(64)->Arg(128);

void BM_SqrtmEigen(benchmark::State& state) {
  const auto m = RandomPsd(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fid::SqrtmPsd(m, fid::SqrtMethod::kEigen));
}
BENCHMARK(BM_SqrtmEigen)->Arg(32)->Arg(128);

void BM_SqrtmNewtonSchulz(benchmark::State& state) {
  const auto m = RandomPsd(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fid::SqrtmPsd(m, fid::SqrtMethod::kNewtonSchulz));
  }
}
BENCHMARK(BM_SqrtmNewtonSchulz)->Arg(32)->Arg(128);

void BM_EncoderForward(benchmark::State& state) {
  encoder::EncoderConfig cfg;
  const auto enc = encoder::Encoder::Init(cfg);
  Rng rng(4);
  const Image img = synthgen::ProceduralSource(cfg.input_side, cfg.input_side, rng);
  for (auto _ : state) benchmark::DoNotOptimize(encoder::Forward(enc, img));
}
BENCHMARK(BM_EncoderForward);

void BM_GaussianBlur(benchmark::State& state) {
  Rng rng(5);
  const Image img = synthgen::ProceduralSource(128, 128, rng);
  const int kernel = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(augment::GaussianBlur(img, kernel));
}
BENCHMARK(BM_GaussianBlur)->Arg(5)->Arg(21);

void BM_Ssim(benchmark::State& state) {
  Rng rng(6);
  const Image a = synthgen::ProceduralSource(128, 128, rng);
  const Image b = synthgen::ProceduralSource(128, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(baselines::Ssim(a, b));
}
BENCHMARK(BM_Ssim);

}  // namespace
}  // namespace sifid

BENCHMARK_MAIN();
