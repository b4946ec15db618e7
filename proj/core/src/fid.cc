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

#include "sifid/fid.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sifid/error.h"

namespace sifid::fid {

namespace {

void CheckSymmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kNotSymmetric, "matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-8 * scale)) {
    throw Error(ErrorCode::kNotSymmetric,
                "asymmetry " + std::to_string(asym) + " exceeds 1e-8");
  }
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> Eigensolve(
    const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kEigenFailure, "eigendecomposition did not converge");
  }
  return solver;
}

// Square roots of the eigenvalues. Values at rounding level relative to the
// largest (d * machine epsilon) are zeroed: their square roots would be
// ~1e-8 noise rather than signal.
Eigen::VectorXd RootsOfSpectrum(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) return eigenvalues;
  const double top = eigenvalues.cwiseAbs().maxCoeff();
  const double cutoff = static_cast<double>(eigenvalues.size()) *
                        std::numeric_limits<double>::epsilon() * top;
  return eigenvalues.unaryExpr([cutoff](double v) { return v <= cutoff ? 0.0 : std::sqrt(v); });
}

Eigen::MatrixXd SqrtEigen(const Eigen::MatrixXd& m) {
  const auto solver = Eigensolve(m);
  const Eigen::VectorXd roots = RootsOfSpectrum(solver.eigenvalues());
  const Eigen::MatrixXd& v = solver.eigenvectors();
  Eigen::MatrixXd s = v * roots.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

// Coupled Newton-Schulz iteration on the Frobenius-normalized matrix.
Eigen::MatrixXd SqrtNewtonSchulz(const Eigen::MatrixXd& m) {
  const Eigen::Index d = m.rows();
  const double norm = m.norm();
  if (norm == 0.0) return Eigen::MatrixXd::Zero(d, d);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd y = m / norm;
  Eigen::MatrixXd z = identity;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::MatrixXd t = 0.5 * (3.0 * identity - z * y);
    const Eigen::MatrixXd y_next = y * t;
    z = t * z;
    const double change = (y_next - y).norm();
    y = y_next;
    if (change <= 1e-14 * y.norm()) break;
  }
  if (!y.allFinite()) {
    throw Error(ErrorCode::kEigenFailure, "Newton-Schulz iteration diverged");
  }
  Eigen::MatrixXd s = y * std::sqrt(norm);
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd Regularized(const GaussianStats& g, bool enabled) {
  const Eigen::Index d = g.dim();
  if (!enabled || g.sample_count == 0 || g.sample_count > d) return g.cov;
  const double eps = 1e-6 * g.cov.trace() / static_cast<double>(d);
  if (!(eps > 0.0)) return g.cov;
  return g.cov + eps * Eigen::MatrixXd::Identity(d, d);
}

// tr((C1^1/2 C2 C1^1/2)^1/2) from the eigenvalues of the symmetric product.
double TraceCrossTerm(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2,
                      SqrtMethod method) {
  const Eigen::MatrixXd s1 = SqrtmPsd(c1, method);
  Eigen::MatrixXd inner = s1 * c2 * s1;
  inner = 0.5 * (inner + inner.transpose());
  if (method == SqrtMethod::kNewtonSchulz) {
    return SqrtNewtonSchulz(inner).trace();
  }
  const auto solver = Eigensolve(inner);
  return RootsOfSpectrum(solver.eigenvalues()).sum();
}

}  // namespace

GaussianStats FitGaussian(const encoder::FeatureSet& features) {
  const Eigen::Index n = features.rows();
  if (n < 2) {
    throw Error(ErrorCode::kTooFewSamples,
                "need at least 2 feature rows, got " + std::to_string(n));
  }
  if (!features.allFinite()) {
    throw Error(ErrorCode::kNonFiniteFeature, "feature set has NaN/Inf");
  }
  GaussianStats g;
  g.sample_count = n;
  g.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

Eigen::MatrixXd SqrtmPsd(const Eigen::MatrixXd& m, SqrtMethod method) {
  CheckSymmetric(m);
  if (!m.allFinite()) {
    throw Error(ErrorCode::kEigenFailure, "matrix has NaN/Inf entries");
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return method == SqrtMethod::kEigen ? SqrtEigen(sym) : SqrtNewtonSchulz(sym);
}

double FrechetDistance(const GaussianStats& a, const GaussianStats& b,
                       const FrechetOptions& options) {
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature dimensions " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  }
  const Eigen::MatrixXd c1 = Regularized(a, options.regularize_rank_deficient);
  const Eigen::MatrixXd c2 = Regularized(b, options.regularize_rank_deficient);
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double cross = TraceCrossTerm(c1, c2, options.method);
  const double total = mean_term + c1.trace() + c2.trace() - 2.0 * cross;
  // Rounding can leave a tiny negative residue for (near) identical inputs.
  const double tolerance = 1e-6 * std::max(1.0, c1.trace() + c2.trace());
  if (total < 0.0) {
    if (total >= -tolerance) return 0.0;
    throw Error(ErrorCode::kEigenFailure,
                "negative squared distance " + std::to_string(total));
  }
  return total;
}

double ScoreFeatures(const encoder::FeatureSet& reference,
                     const encoder::FeatureSet& stitched,
                     const FrechetOptions& options) {
  if (reference.cols() != stitched.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature dimensions " + std::to_string(reference.cols()) +
                    " vs " + std::to_string(stitched.cols()));
  }
  return FrechetDistance(FitGaussian(reference), FitGaussian(stitched), options);
}

double ScoreStitched(std::span<const Image> reference,
                     std::span<const Image> stitched,
                     const encoder::Encoder& enc, int jobs,
                     const FrechetOptions& options) {
  if (reference.size() < 2 || stitched.size() < 2) {
    throw Error(ErrorCode::kTooFewSamples,
                "each set needs at least 2 images");
  }
  const int side = enc.config().input_side;
  auto prep = [&](std::span<const Image> imgs) {
    std::vector<Image> out;
    out.reserve(imgs.size());
    for (const auto& img : imgs) out.push_back(encoder::Preprocess(img, side));
    return out;
  };
  const auto ref = prep(reference);
  const auto sti = prep(stitched);
  return ScoreFeatures(encoder::ForwardBatch(enc, ref, jobs),
                       encoder::ForwardBatch(enc, sti, jobs), options);
}

std::vector<Image> Tiles(const Image& img, int tile_side, int stride) {
  if (tile_side < 1 || stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "tile side and stride must be >= 1");
  }
  if (img.height() < tile_side || img.width() < tile_side) {
    throw Error(ErrorCode::kImageTooSmall,
                "image smaller than tile side " + std::to_string(tile_side));
  }
  std::vector<Image> tiles;
  for (int y = 0; y + tile_side <= img.height(); y += stride) {
    for (int x = 0; x + tile_side <= img.width(); x += stride) {
      tiles.push_back(Crop(img, y, x, tile_side, tile_side));
    }
  }
  return tiles;
}

double ScorePairTiles(const Image& reference, const Image& stitched,
                      const encoder::Encoder& enc, int tile_side, int stride,
                      const FrechetOptions& options) {
  if (!reference.SameShape(stitched)) {
    throw Error(ErrorCode::kShapeMismatch, "reference/stitched shapes differ");
  }
  return ScoreStitched(Tiles(reference, tile_side, stride),
                       Tiles(stitched, tile_side, stride), enc, 1, options);
}

}  // namespace sifid::fid
