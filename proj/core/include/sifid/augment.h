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

#ifndef SIFID_AUGMENT_H_
#define SIFID_AUGMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sifid/image.h"
#include "sifid/rng.h"

namespace sifid::augment {

enum class NoiseKind {
  kGaussianBlur,
  kRandomHorizontalFlip,
  kRandomGrayscale,
  kColorJitter,
  kRandomResizedCrop,
};

// One parameterized augmentation ("noise"). Only the fields relevant to
// `kind` are meaningful.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussianBlur;
  int kernel = 3;            // GaussianBlur, odd
  double probability = 0.5;  // RandomHorizontalFlip / RandomGrayscale
  double brightness = 0.0;   // ColorJitter amplitude
  double hue = 0.0;          // ColorJitter amplitude, [0, 0.5]
  int crop_side = 100;       // RandomResizedCrop output side

  static NoiseSpec GaussianBlur(int kernel);
  static NoiseSpec HorizontalFlip(double p);
  static NoiseSpec Grayscale(double p);
  static NoiseSpec ColorJitter(double brightness, double hue);
  static NoiseSpec ResizedCrop(int side);

  // Stable identifier, e.g. "gaussianblur_k3", "colorjitter_b0.5_h0.3".
  std::string Tag() const;
  // Human-readable form, e.g. "ColorJitter(brightness=0.5, hue=0.3)".
  std::string DisplayName() const;
  // True iff this spec equals one of the 14 catalog entries.
  bool IsCanonical() const;
  // Throws InvalidArgument / EvenKernel / HueOutOfRange on bad parameters.
  void Validate() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

std::string NoiseKindName(NoiseKind kind);

// The fourteen training noises, in a fixed order.
const std::vector<NoiseSpec>& Catalog();
// Catalog lookup by Tag(); also parses non-canonical tags of the same shape.
NoiseSpec ParseNoiseTag(const std::string& tag);

// Sigma used for an odd kernel size: 0.3 * ((k - 1) / 2 - 1) + 0.8.
double BlurSigma(int kernel);
// Normalized 1-D Gaussian weights of length `kernel`.
std::vector<double> GaussianKernel1D(int kernel);

Image GaussianBlur(const Image& img, int kernel);
Image HorizontalFlip(const Image& img, double p, Rng& rng);
Image GrayscaleWithProb(const Image& img, double p, Rng& rng);
Image ColorJitter(const Image& img, double brightness, double hue, Rng& rng);
Image RandomResizedCrop(const Image& img, int out_side, Rng& rng);

// Deterministic building blocks of ColorJitter.
Image AdjustBrightness(const Image& img, double factor);
// Rotates hue by `shift` turns through HSV; gray pixels are fixed points.
Image RotateHue(const Image& img, double shift);

Image ApplyNoise(const NoiseSpec& spec, const Image& img, Rng& rng);

struct ManifestEntry {
  std::string output_path;
  std::string source_path;
  NoiseSpec spec;
  bool canonical = true;
  std::uint64_t substream_seed = 0;
};

struct DistortOptions {
  int jobs = 1;
  // Re-encode outputs as PNG regardless of input format.
  std::string extension = ".png";
};

// Writes inputs x catalog distorted images plus manifest.json into
// `out_dir`. Image i / spec j uses the RNG substream (seed, i, j).
std::vector<ManifestEntry> BuildDistortedSet(
    const std::filesystem::path& input_dir,
    const std::vector<NoiseSpec>& catalog, std::uint64_t seed,
    const std::filesystem::path& out_dir, const DistortOptions& options = {});

}  // namespace sifid::augment

#endif  // SIFID_AUGMENT_H_
