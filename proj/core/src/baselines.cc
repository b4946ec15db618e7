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

#include "sifid/baselines.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "binary_io.h"
#include "sifid/error.h"

namespace sifid::baselines {

namespace {

void CheckSameShape(const Image& a, const Image& b) {
  if (!a.SameShape(b)) {
    throw Error(ErrorCode::kShapeMismatch,
                "images differ in shape: " + std::to_string(a.height()) + "x" +
                    std::to_string(a.width()) + "x" +
                    std::to_string(a.channels()) + " vs " +
                    std::to_string(b.height()) + "x" +
                    std::to_string(b.width()) + "x" +
                    std::to_string(b.channels()));
  }
}

// Same weights as ToGrayscale, kept in double.
std::vector<double> LumaPlane(const Image& img) {
  const auto src = img.data();
  if (img.channels() == 1) return {src.begin(), src.end()};
  if (img.channels() != 3) return LumaPlane(ToGrayscale(img));
  std::vector<double> out(src.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
  }
  return out;
}

std::vector<double> GaussianWindow(int size, double sigma) {
  std::vector<double> w(size);
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable filter keeping only fully-covered positions.
std::vector<double> FilterValid(const std::vector<double>& src, int h, int w,
                                const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1;
  const int ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

// Same-size separable filter with replicated borders.
std::vector<double> FilterReplicate(const std::vector<double>& src, int h, int w,
                                    const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int r = n / 2;
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const int xx = std::clamp(x + i - r, 0, w - 1);
        acc += k[i] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const int yy = std::clamp(y + i - r, 0, h - 1);
        acc += k[i] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string MetricName(Metric metric) {
  switch (metric) {
    case Metric::kMse: return "MSE";
    case Metric::kPsnr: return "PSNR";
    case Metric::kSsim: return "SSIM";
    case Metric::kAg: return "AG";
    case Metric::kSf: return "SF";
    case Metric::kNiqe: return "NIQE";
    case Metric::kFid: return "FID";
    case Metric::kSiFid: return "SIFID";
  }
  return "UNKNOWN";
}

Metric ParseMetric(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "mse") return Metric::kMse;
  if (n == "psnr") return Metric::kPsnr;
  if (n == "ssim") return Metric::kSsim;
  if (n == "ag") return Metric::kAg;
  if (n == "sf") return Metric::kSf;
  if (n == "niqe") return Metric::kNiqe;
  if (n == "fid") return Metric::kFid;
  if (n == "sifid" || n == "si-fid" || n == "si_fid") return Metric::kSiFid;
  throw Error(ErrorCode::kConfigInvalid, "unknown metric '" + name + "'");
}

Orientation OrientationOf(Metric metric) {
  switch (metric) {
    case Metric::kMse:
    case Metric::kNiqe:
    case Metric::kFid:
    case Metric::kSiFid:
      return Orientation::kLowerBetter;
    case Metric::kPsnr:
    case Metric::kSsim:
    case Metric::kAg:
    case Metric::kSf:
      return Orientation::kHigherBetter;
  }
  return Orientation::kHigherBetter;
}

std::string OrientationName(Orientation orientation) {
  return orientation == Orientation::kLowerBetter ? "lower_better"
                                                  : "higher_better";
}

Orientation ParseOrientation(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "lower_better") return Orientation::kLowerBetter;
  if (n == "higher_better") return Orientation::kHigherBetter;
  throw Error(ErrorCode::kParseError, "unknown orientation '" + name + "'");
}

double Mse(const Image& a, const Image& b) {
  CheckSameShape(a, b);
  const auto da = a.data();
  const auto db = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double Psnr(const Image& a, const Image& b) {
  const double mse = Mse(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double Ssim(const Image& a, const Image& b, const SsimParams& params) {
  CheckSameShape(a, b);
  const int h = a.height();
  const int w = a.width();
  if (std::min(h, w) < params.window) {
    throw Error(ErrorCode::kImageTooSmall,
                "SSIM needs min dimension >= " + std::to_string(params.window));
  }
  const auto x = LumaPlane(a);
  const auto y = LumaPlane(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = GaussianWindow(params.window, params.sigma);
  const auto mx = FilterValid(x, h, w, k);
  const auto my = FilterValid(y, h, w, k);
  const auto sxx = FilterValid(xx, h, w, k);
  const auto syy = FilterValid(yy, h, w, k);
  const auto sxy = FilterValid(xy, h, w, k);
  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double mu_x = mx[i];
    const double mu_y = my[i];
    const double var_x = sxx[i] - mu_x * mu_x;
    const double var_y = syy[i] - mu_y * mu_y;
    const double cov = sxy[i] - mu_x * mu_y;
    acc += ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) /
           ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
  }
  return acc / static_cast<double>(mx.size());
}

double AverageGradient(const Image& img) {
  if (std::min(img.height(), img.width()) < 2) {
    throw Error(ErrorCode::kImageTooSmall, "AG needs min dimension >= 2");
  }
  const int h = img.height();
  const int w = img.width();
  const auto p = LumaPlane(img);
  double acc = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double v = p[static_cast<std::size_t>(y) * w + x];
      const double dx = p[static_cast<std::size_t>(y) * w + x + 1] - v;
      const double dy = p[static_cast<std::size_t>(y + 1) * w + x] - v;
      acc += std::sqrt((dx * dx + dy * dy) / 2.0);
    }
  }
  return acc / (static_cast<double>(h - 1) * (w - 1));
}

double SpatialFrequency(const Image& img) {
  if (std::min(img.height(), img.width()) < 2) {
    throw Error(ErrorCode::kImageTooSmall, "SF needs min dimension >= 2");
  }
  const int h = img.height();
  const int w = img.width();
  const auto p = LumaPlane(img);
  double row = 0.0;
  double col = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = p[static_cast<std::size_t>(y) * w + x];
      if (x > 0) {
        const double d = v - p[static_cast<std::size_t>(y) * w + x - 1];
        row += d * d;
      }
      if (y > 0) {
        const double d = v - p[static_cast<std::size_t>(y - 1) * w + x];
        col += d * d;
      }
    }
  }
  const double n = static_cast<double>(h) * w;
  return std::sqrt(row / n + col / n);
}

// ---------------------------------------------------------------- NIQE ----

namespace {

struct GammaTable {
  std::vector<double> alpha;
  std::vector<double> ratio;  // Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)), increasing
};

const GammaTable& AggdTable() {
  static const GammaTable table = [] {
    GammaTable t;
    for (int i = 0; i <= 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      t.alpha.push_back(a);
      t.ratio.push_back(std::exp(2.0 * std::lgamma(2.0 / a) - std::lgamma(1.0 / a) -
                                 std::lgamma(3.0 / a)));
    }
    return t;
  }();
  return table;
}

double ScaleFromStd(double std_dev, double alpha) {
  return std_dev * std::sqrt(std::exp(std::lgamma(1.0 / alpha) - std::lgamma(3.0 / alpha)));
}

// Appends the per-scale 18 features of one MSCN patch.
void PatchFeatures(const std::vector<double>& mscn, int w, int y0, int x0,
                   int size, std::vector<double>& out) {
  std::vector<double> block;
  block.reserve(static_cast<std::size_t>(size) * size);
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) block.push_back(mscn[static_cast<std::size_t>(y) * w + x]);
  }
  const AggdParams base = FitAggd(block);
  out.push_back(base.alpha);
  out.push_back((base.left_scale + base.right_scale) / 2.0);

  constexpr int kShifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& shift : kShifts) {
    std::vector<double> prod;
    prod.reserve(block.size());
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        // Circular shift inside the patch.
        const int yy = (y + shift[0] + size) % size;
        const int xx = (x + shift[1] + size) % size;
        prod.push_back(block[static_cast<std::size_t>(y) * size + x] *
                       block[static_cast<std::size_t>(yy) * size + xx]);
      }
    }
    const AggdParams p = FitAggd(prod);
    const double eta = (p.right_scale - p.left_scale) *
                       std::exp(std::lgamma(2.0 / p.alpha) - std::lgamma(1.0 / p.alpha));
    out.push_back(p.alpha);
    out.push_back(eta);
    out.push_back(p.left_scale * p.left_scale);
    out.push_back(p.right_scale * p.right_scale);
  }
}

Eigen::MatrixXd PseudoInverse(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  const double cutoff = 1e-10 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    inv[i] = std::abs(ev[i]) > cutoff ? 1.0 / ev[i] : 0.0;
  }
  return solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

AggdParams FitAggd(std::span<const double> samples) {
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double x : samples) {
    if (x < 0) {
      left_sq += x * x;
      ++left_n;
    } else if (x > 0) {
      right_sq += x * x;
      ++right_n;
    }
    abs_sum += std::abs(x);
    sq_sum += x * x;
  }
  AggdParams p;
  const double n = static_cast<double>(samples.size());
  if (samples.empty() || sq_sum <= 0.0) {
    p.alpha = AggdTable().alpha.back();
    return p;
  }
  p.left_std = left_n > 0 ? std::sqrt(left_sq / left_n) : 0.0;
  p.right_std = right_n > 0 ? std::sqrt(right_sq / right_n) : 0.0;
  const double gamma_hat =
      p.right_std > 0.0 ? p.left_std / p.right_std : 1.0;
  const double mean_abs = abs_sum / n;
  const double r_hat = mean_abs * mean_abs / (sq_sum / n);
  const double r_norm = r_hat * (std::pow(gamma_hat, 3) + 1.0) * (gamma_hat + 1.0) /
                        std::pow(gamma_hat * gamma_hat + 1.0, 2);
  const auto& table = AggdTable();
  // ratio(alpha) is increasing: nearest grid point by bisection.
  auto it = std::lower_bound(table.ratio.begin(), table.ratio.end(), r_norm);
  std::size_t idx = static_cast<std::size_t>(it - table.ratio.begin());
  if (idx == table.ratio.size()) {
    idx = table.ratio.size() - 1;
  } else if (idx > 0 && r_norm - table.ratio[idx - 1] < table.ratio[idx] - r_norm) {
    --idx;
  }
  p.alpha = table.alpha[idx];
  p.left_scale = ScaleFromStd(p.left_std, p.alpha);
  p.right_scale = ScaleFromStd(p.right_std, p.alpha);
  return p;
}

std::vector<double> Mscn(const std::vector<double>& luma, int height, int width,
                         const NiqeParams& params, std::vector<double>* sigma_map) {
  const auto k = GaussianWindow(params.window, params.window_sigma);
  const auto mu = FilterReplicate(luma, height, width, k);
  std::vector<double> sq(luma.size());
  for (std::size_t i = 0; i < luma.size(); ++i) sq[i] = luma[i] * luma[i];
  const auto mu_sq = FilterReplicate(sq, height, width, k);
  std::vector<double> out(luma.size());
  if (sigma_map != nullptr) sigma_map->resize(luma.size());
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const double sigma = std::sqrt(std::abs(mu_sq[i] - mu[i] * mu[i]));
    out[i] = (luma[i] - mu[i]) / (sigma + params.stabilizer);
    if (sigma_map != nullptr) (*sigma_map)[i] = sigma;
  }
  return out;
}

Eigen::MatrixXd NiqePatchFeatures(const Image& img, const NiqeParams& params,
                                  bool select_sharp) {
  const int ps = params.patch_size;
  const int rows = img.height() / ps;
  const int cols = img.width() / ps;
  if (rows < 1 || cols < 1) {
    throw Error(ErrorCode::kNoQualifyingPatches,
                "image smaller than one " + std::to_string(ps) + "px patch");
  }
  // Crop to a whole number of patches; scale 2 is a half-size resample.
  const Image gray = ToGrayscale(Crop(img, 0, 0, rows * ps, cols * ps));
  const Image half = ResizeBilinear(gray, rows * ps / 2, cols * ps / 2);

  const int n = rows * cols;
  std::vector<std::vector<double>> feats(n);
  std::vector<double> sharpness(n, 0.0);
  for (int scale = 0; scale < 2; ++scale) {
    const Image& plane_img = scale == 0 ? gray : half;
    const int h = plane_img.height();
    const int w = plane_img.width();
    const int size = scale == 0 ? ps : ps / 2;
    std::vector<double> luma(plane_img.data().begin(), plane_img.data().end());
    std::vector<double> sigma;
    const auto mscn = Mscn(luma, h, w, params, &sigma);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int idx = r * cols + c;
        PatchFeatures(mscn, w, r * size, c * size, size, feats[idx]);
        if (scale == 0) {
          double acc = 0.0;
          for (int y = r * size; y < (r + 1) * size; ++y) {
            for (int x = c * size; x < (c + 1) * size; ++x) acc += sigma[static_cast<std::size_t>(y) * w + x];
          }
          sharpness[idx] = acc / (static_cast<double>(size) * size);
        }
      }
    }
  }

  std::vector<int> keep;
  const double max_sharp = *std::max_element(sharpness.begin(), sharpness.end());
  for (int i = 0; i < n; ++i) {
    bool finite = true;
    for (double v : feats[i]) finite = finite && std::isfinite(v);
    if (!finite) continue;
    if (select_sharp &&
        !(max_sharp > 0.0 && sharpness[i] >= params.sharpness_threshold * max_sharp)) {
      continue;
    }
    keep.push_back(i);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), kNiqeFeatureCount);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    for (int k = 0; k < kNiqeFeatureCount; ++k) out(static_cast<Eigen::Index>(r), k) = feats[keep[r]][k];
  }
  return out;
}

NiqeModel NiqeFit(std::span<const Image> pristine, const NiqeParams& params) {
  if (pristine.size() < 10) {
    throw Error(ErrorCode::kTooFewPristine,
                "NIQE needs >= 10 pristine images, got " +
                    std::to_string(pristine.size()));
  }
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  for (const auto& img : pristine) {
    try {
      parts.push_back(NiqePatchFeatures(img, params, /*select_sharp=*/true));
      total += parts.back().rows();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoQualifyingPatches) throw;
    }
  }
  if (total < 2) {
    throw Error(ErrorCode::kNoQualifyingPatches,
                "fewer than 2 qualifying pristine patches");
  }
  Eigen::MatrixXd all(total, kNiqeFeatureCount);
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    all.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  NiqeModel model;
  model.params = params;
  model.pristine_images = static_cast<int>(pristine.size());
  model.patches = static_cast<int>(total);
  model.mean = all.colwise().mean().transpose();
  const Eigen::MatrixXd centered = all.rowwise() - model.mean.transpose();
  model.cov = centered.transpose() * centered / static_cast<double>(total - 1);
  return model;
}

NiqeModel NiqeFit(const std::filesystem::path& pristine_dir,
                  const NiqeParams& params) {
  std::vector<Image> images;
  for (const auto& f : ListImageFiles(pristine_dir)) images.push_back(LoadImage(f));
  return NiqeFit(images, params);
}

double NiqeScore(const Image& img, const NiqeModel& model) {
  const Eigen::MatrixXd feats =
      NiqePatchFeatures(img, model.params, /*select_sharp=*/false);
  if (feats.rows() == 0) {
    throw Error(ErrorCode::kNoQualifyingPatches, "no usable patches");
  }
  const Eigen::VectorXd mean = feats.colwise().mean().transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kNiqeFeatureCount, kNiqeFeatureCount);
  if (feats.rows() > 1) {
    const Eigen::MatrixXd centered = feats.rowwise() - mean.transpose();
    cov = centered.transpose() * centered / static_cast<double>(feats.rows() - 1);
  }
  const Eigen::VectorXd diff = model.mean - mean;
  const Eigen::MatrixXd pooled = PseudoInverse(0.5 * (model.cov + cov));
  return std::sqrt(std::max(0.0, diff.dot(pooled * diff)));
}

namespace {
constexpr char kNiqeMagic[] = "SIFIDNQE";
constexpr std::uint32_t kNiqeVersion = 1;
}  // namespace

void SaveNiqeModel(const NiqeModel& model, const std::filesystem::path& path) {
  std::vector<unsigned char> out(kNiqeMagic, kNiqeMagic + 8);
  internal::PutU32(out, kNiqeVersion);
  internal::PutU32(out, static_cast<std::uint32_t>(model.params.patch_size));
  internal::PutU32(out, static_cast<std::uint32_t>(model.params.window));
  internal::PutF64(out, model.params.sharpness_threshold);
  internal::PutF64(out, model.params.stabilizer);
  internal::PutF64(out, model.params.window_sigma);
  internal::PutU32(out, static_cast<std::uint32_t>(model.pristine_images));
  internal::PutU32(out, static_cast<std::uint32_t>(model.patches));
  const auto d = static_cast<std::uint32_t>(model.mean.size());
  internal::PutU32(out, d);
  for (Eigen::Index i = 0; i < model.mean.size(); ++i) internal::PutF64(out, model.mean[i]);
  for (Eigen::Index r = 0; r < model.cov.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.cov.cols(); ++c) internal::PutF64(out, model.cov(r, c));
  }
  internal::WriteAll(path, out);
}

NiqeModel LoadNiqeModel(const std::filesystem::path& path) {
  const auto bytes = internal::ReadAll(path);
  internal::ByteReader in(bytes, ErrorCode::kFormatMismatch);
  if (in.Bytes(8) != std::string(kNiqeMagic, 8) || in.U32() != kNiqeVersion) {
    throw Error(ErrorCode::kFormatMismatch, "not a NIQE model file");
  }
  NiqeModel model;
  model.params.patch_size = static_cast<int>(in.U32());
  model.params.window = static_cast<int>(in.U32());
  model.params.sharpness_threshold = in.F64();
  model.params.stabilizer = in.F64();
  model.params.window_sigma = in.F64();
  model.pristine_images = static_cast<int>(in.U32());
  model.patches = static_cast<int>(in.U32());
  const std::uint32_t d = in.U32();
  if (d != kNiqeFeatureCount) {
    throw Error(ErrorCode::kFormatMismatch, "unexpected NIQE feature count");
  }
  model.mean.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) model.mean[i] = in.F64();
  model.cov.resize(d, d);
  for (std::uint32_t r = 0; r < d; ++r) {
    for (std::uint32_t c = 0; c < d; ++c) model.cov(r, c) = in.F64();
  }
  if (in.remaining() != 0) {
    throw Error(ErrorCode::kFormatMismatch, "trailing bytes in NIQE model");
  }
  return model;
}

}  // namespace sifid::baselines
