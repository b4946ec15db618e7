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

#ifndef SIFID_RNG_H_
#define SIFID_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace sifid {

// Counter-based generator: draw i is a SplitMix64 finalization of
// (seed, i). Streams are platform independent and substreams are derived
// by hashing, so work split across threads reproduces serial results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi);
  bool Bernoulli(double p) { return Uniform() < p; }
  // Standard normal via Box-Muller (one value per call).
  double Normal();

  // Independent generator keyed by this seed and the given path.
  Rng Substream(std::initializer_list<std::uint64_t> path) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t DeriveSeed(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> path);
// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t StableHash(std::string_view text);

}  // namespace sifid

#endif  // SIFID_RNG_H_
