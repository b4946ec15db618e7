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

#ifndef SIFID_BASELINES_H_
#define SIFID_BASELINES_H_

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sifid/image.h"

namespace sifid::baselines {

enum class Metric { kMse, kPsnr, kSsim, kAg, kSf, kNiqe, kFid, kSiFid };
enum class Orientation { kLowerBetter, kHigherBetter };

std::string MetricName(Metric metric);
// Case-insensitive; accepts "si-fid"/"sifid". Throws ConfigInvalid.
Metric ParseMetric(const std::string& name);
Orientation OrientationOf(Metric metric);
std::string OrientationName(Orientation orientation);
Orientation ParseOrientation(const std::string& name);

struct MetricScore {
  Metric metric;
  double value;
  Orientation orientation;
};

// Mean squared per-sample difference. Throws ShapeMismatch.
double Mse(const Image& a, const Image& b);
// 10 log10(1 / mse); +infinity for identical images.
double Psnr(const Image& a, const Image& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};
// Mean of the local SSIM map over the valid window positions, computed on
// luma. Throws ShapeMismatch / ImageTooSmall.
double Ssim(const Image& a, const Image& b, const SsimParams& params = {});

// Mean over (h-1)(w-1) positions of sqrt((dx^2 + dy^2) / 2), forward
// differences on luma. Throws ImageTooSmall.
double AverageGradient(const Image& img);
// sqrt(RF^2 + CF^2); RF/CF are RMS horizontal/vertical neighbour
// differences normalized by h*w. Throws ImageTooSmall.
double SpatialFrequency(const Image& img);

// ---------------------------------------------------------------- NIQE ----

struct NiqeParams {
  int patch_size = 96;
  double sharpness_threshold = 0.75;
  double stabilizer = 1e-3;
  int window = 7;
  double window_sigma = 7.0 / 6.0;
};

inline constexpr int kNiqeFeatureCount = 36;

struct NiqeModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  NiqeParams params;
  int pristine_images = 0;
  int patches = 0;
};

struct AggdParams {
  double alpha = 0.0;
  double left_scale = 0.0;   // beta_l
  double right_scale = 0.0;  // beta_r
  double left_std = 0.0;
  double right_std = 0.0;
};
// Moment-matching fit of an asymmetric generalized Gaussian.
AggdParams FitAggd(std::span<const double> samples);

// Local mean-subtracted contrast-normalized coefficients of a luma plane.
std::vector<double> Mscn(const std::vector<double>& luma, int height, int width,
                         const NiqeParams& params,
                         std::vector<double>* sigma_map = nullptr);

// 36 features per patch (2 scales x [MSCN shape/scale + 4 x 4 product
// AGGD parameters]). Patches whose sharpness is below threshold*max are
// dropped when `select_sharp` is set.
Eigen::MatrixXd NiqePatchFeatures(const Image& img, const NiqeParams& params,
                                  bool select_sharp);

// Throws TooFewPristine (< 10 images) / NoQualifyingPatches.
NiqeModel NiqeFit(std::span<const Image> pristine, const NiqeParams& params = {});
NiqeModel NiqeFit(const std::filesystem::path& pristine_dir,
                  const NiqeParams& params = {});
double NiqeScore(const Image& img, const NiqeModel& model);

// Versioned binary: "SIFIDNQE", u32 version, params, mean, covariance.
void SaveNiqeModel(const NiqeModel& model, const std::filesystem::path& path);
NiqeModel LoadNiqeModel(const std::filesystem::path& path);

}  // namespace sifid::baselines

#endif  // SIFID_BASELINES_H_
