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

#ifndef SIFID_FID_H_
#define SIFID_FID_H_

#include <Eigen/Core>
#include <span>

#include "sifid/encoder.h"
#include "sifid/image.h"

namespace sifid::fid {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  // Rows the statistics were fitted on; drives rank-deficiency handling.
  Eigen::Index sample_count = 0;

  Eigen::Index dim() const { return mean.size(); }
};

// Column mean and unbiased (N - 1) covariance, symmetrized.
// Throws TooFewSamples (N < 2) / NonFiniteFeature.
GaussianStats FitGaussian(const encoder::FeatureSet& features);

enum class SqrtMethod { kEigen, kNewtonSchulz };

// Principal square root of a symmetric PSD matrix. Negative eigenvalues are
// clamped to zero. Throws NotSymmetric / EigenFailure.
Eigen::MatrixXd SqrtmPsd(const Eigen::MatrixXd& m,
                         SqrtMethod method = SqrtMethod::kEigen);

struct FrechetOptions {
  SqrtMethod method = SqrtMethod::kEigen;
  // Adds eps*I (eps = 1e-6 * tr(C) / d) to a covariance fitted on N <= d rows.
  bool regularize_rank_deficient = true;
};

// Squared Frechet distance between two Gaussians:
// |mu1 - mu2|^2 + tr(C1 + C2 - 2 (C1^1/2 C2 C1^1/2)^1/2).
// Throws DimensionMismatch.
double FrechetDistance(const GaussianStats& a, const GaussianStats& b,
                       const FrechetOptions& options = {});

double ScoreFeatures(const encoder::FeatureSet& reference,
                     const encoder::FeatureSet& stitched,
                     const FrechetOptions& options = {});

// Encodes both sets (resizing to the encoder input), fits Gaussians and
// returns the squared Frechet distance; lower means more similar.
double ScoreStitched(std::span<const Image> reference,
                     std::span<const Image> stitched,
                     const encoder::Encoder& enc, int jobs = 1,
                     const FrechetOptions& options = {});

// Square tiles of `tile_side` at `stride`, each resized to the encoder
// input; used to score a single image pair as two feature sets.
std::vector<Image> Tiles(const Image& img, int tile_side, int stride);

// Per-image score: distance between the tile feature sets of a reference
// and a stitched image of the same size.
double ScorePairTiles(const Image& reference, const Image& stitched,
                      const encoder::Encoder& enc, int tile_side, int stride,
                      const FrechetOptions& options = {});

}  // namespace sifid::fid

#endif  // SIFID_FID_H_
