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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sifid/error.h"
#include "sifid/parallel.h"

namespace sifid::augment {
namespace fs = std::filesystem;

namespace {

std::string FormatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void CheckProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "probability must lie in [0, 1], got " + FormatNumber(p));
  }
}

// Reflect-101 indexing (dcb|abcd|cba); valid for any offset.
int Reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void RgbToHsv(double r, double g, double b, double& h, double& s, double& v) {
  const double maxc = std::max({r, g, b});
  const double minc = std::min({r, g, b});
  v = maxc;
  const double delta = maxc - minc;
  s = maxc > 0.0 ? delta / maxc : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (maxc == r) {
    h = (g - b) / delta;
  } else if (maxc == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h /= 6.0;
  h -= std::floor(h);
}

void HsvToRgb(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  const double h6 = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

NoiseSpec NoiseSpec::GaussianBlur(int kernel) {
  NoiseSpec s;
  s.kind = NoiseKind::kGaussianBlur;
  s.kernel = kernel;
  return s;
}

NoiseSpec NoiseSpec::HorizontalFlip(double p) {
  NoiseSpec s;
  s.kind = NoiseKind::kRandomHorizontalFlip;
  s.probability = p;
  return s;
}

NoiseSpec NoiseSpec::Grayscale(double p) {
  NoiseSpec s;
  s.kind = NoiseKind::kRandomGrayscale;
  s.probability = p;
  return s;
}

NoiseSpec NoiseSpec::ColorJitter(double brightness, double hue) {
  NoiseSpec s;
  s.kind = NoiseKind::kColorJitter;
  s.brightness = brightness;
  s.hue = hue;
  return s;
}

NoiseSpec NoiseSpec::ResizedCrop(int side) {
  NoiseSpec s;
  s.kind = NoiseKind::kRandomResizedCrop;
  s.crop_side = side;
  return s;
}

std::string NoiseKindName(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussianBlur: return "GaussianBlur";
    case NoiseKind::kRandomHorizontalFlip: return "RandomHorizontalFlip";
    case NoiseKind::kRandomGrayscale: return "RandomGrayscale";
    case NoiseKind::kColorJitter: return "ColorJitter";
    case NoiseKind::kRandomResizedCrop: return "RandomResizedCrop";
  }
  return "Unknown";
}

std::string NoiseSpec::Tag() const {
  switch (kind) {
    case NoiseKind::kGaussianBlur:
      return "gaussianblur_k" + std::to_string(kernel);
    case NoiseKind::kRandomHorizontalFlip:
      return "hflip_p" + FormatNumber(probability);
    case NoiseKind::kRandomGrayscale:
      return "grayscale_p" + FormatNumber(probability);
    case NoiseKind::kColorJitter:
      return "colorjitter_b" + FormatNumber(brightness) + "_h" +
             FormatNumber(hue);
    case NoiseKind::kRandomResizedCrop:
      return "resizedcrop_s" + std::to_string(crop_side);
  }
  return "unknown";
}

std::string NoiseSpec::DisplayName() const {
  switch (kind) {
    case NoiseKind::kGaussianBlur:
      return "GaussianBlur(" + std::to_string(kernel) + ")";
    case NoiseKind::kRandomHorizontalFlip:
      return "RandomHorizontalFlip(" + FormatNumber(probability) + ")";
    case NoiseKind::kRandomGrayscale:
      return "RandomGrayscale(" + FormatNumber(probability) + ")";
    case NoiseKind::kColorJitter:
      return "ColorJitter(brightness=" + FormatNumber(brightness) +
             ", hue=" + FormatNumber(hue) + ")";
    case NoiseKind::kRandomResizedCrop:
      return "RandomResizedCrop(" + std::to_string(crop_side) + ")";
  }
  return "Unknown";
}

bool NoiseSpec::IsCanonical() const {
  const auto& catalog = Catalog();
  return std::find(catalog.begin(), catalog.end(), *this) != catalog.end();
}

void NoiseSpec::Validate() const {
  switch (kind) {
    case NoiseKind::kGaussianBlur:
      if (kernel < 1) {
        throw Error(ErrorCode::kInvalidArgument, "blur kernel must be >= 1");
      }
      if (kernel % 2 == 0) {
        throw Error(ErrorCode::kEvenKernel,
                    "blur kernel must be odd, got " + std::to_string(kernel));
      }
      break;
    case NoiseKind::kRandomHorizontalFlip:
    case NoiseKind::kRandomGrayscale:
      CheckProbability(probability);
      break;
    case NoiseKind::kColorJitter:
      if (!(brightness >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "brightness must be >= 0");
      }
      if (!(hue >= 0.0 && hue <= 0.5)) {
        throw Error(ErrorCode::kHueOutOfRange,
                    "hue amplitude must lie in [0, 0.5], got " +
                        FormatNumber(hue));
      }
      break;
    case NoiseKind::kRandomResizedCrop:
      if (crop_side < 1) {
        throw Error(ErrorCode::kZeroDimension, "crop side must be >= 1");
      }
      break;
  }
}

const std::vector<NoiseSpec>& Catalog() {
  static const std::vector<NoiseSpec> kCatalog = {
      NoiseSpec::GaussianBlur(3),
      NoiseSpec::GaussianBlur(13),
      NoiseSpec::GaussianBlur(39),
      NoiseSpec::HorizontalFlip(0.5),
      NoiseSpec::HorizontalFlip(0.8),
      NoiseSpec::Grayscale(0.8),
      NoiseSpec::ColorJitter(0.3, 0.1),
      NoiseSpec::ColorJitter(0.5, 0.3),
      NoiseSpec::ResizedCrop(39),
      NoiseSpec::ResizedCrop(50),
      NoiseSpec::ResizedCrop(100),
      NoiseSpec::ResizedCrop(120),
      NoiseSpec::ResizedCrop(150),
      NoiseSpec::ResizedCrop(190),
  };
  return kCatalog;
}

NoiseSpec ParseNoiseTag(const std::string& tag) {
  for (const auto& spec : Catalog()) {
    if (spec.Tag() == tag) return spec;
  }
  auto fail = [&]() -> NoiseSpec {
    throw Error(ErrorCode::kConfigInvalid, "unknown noise tag '" + tag + "'");
  };
  auto number = [&](const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) fail();
      return v;
    } catch (const std::logic_error&) {
      fail();
    }
    return 0.0;
  };
  NoiseSpec spec;
  if (tag.rfind("gaussianblur_k", 0) == 0) {
    spec = NoiseSpec::GaussianBlur(static_cast<int>(number(tag.substr(14))));
  } else if (tag.rfind("hflip_p", 0) == 0) {
    spec = NoiseSpec::HorizontalFlip(number(tag.substr(7)));
  } else if (tag.rfind("grayscale_p", 0) == 0) {
    spec = NoiseSpec::Grayscale(number(tag.substr(11)));
  } else if (tag.rfind("colorjitter_b", 0) == 0) {
    const auto h = tag.find("_h", 13);
    if (h == std::string::npos) fail();
    spec = NoiseSpec::ColorJitter(number(tag.substr(13, h - 13)),
                                  number(tag.substr(h + 2)));
  } else if (tag.rfind("resizedcrop_s", 0) == 0) {
    spec = NoiseSpec::ResizedCrop(static_cast<int>(number(tag.substr(13))));
  } else {
    fail();
  }
  spec.Validate();
  return spec;
}

double BlurSigma(int kernel) {
  return 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> GaussianKernel1D(int kernel) {
  if (kernel < 1) throw Error(ErrorCode::kInvalidArgument, "kernel < 1");
  if (kernel % 2 == 0) {
    throw Error(ErrorCode::kEvenKernel,
                "kernel must be odd, got " + std::to_string(kernel));
  }
  const double sigma = BlurSigma(kernel);
  const int radius = kernel / 2;
  std::vector<double> w(kernel);
  double sum = 0.0;
  for (int i = 0; i < kernel; ++i) {
    const double d = i - radius;
    w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

Image GaussianBlur(const Image& img, int kernel) {
  const auto weights = GaussianKernel1D(kernel);
  if (kernel > std::min(img.height(), img.width())) {
    throw Error(ErrorCode::kKernelLargerThanImage,
                "kernel " + std::to_string(kernel) + " exceeds image size " +
                    std::to_string(img.height()) + "x" +
                    std::to_string(img.width()));
  }
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const int radius = kernel / 2;
  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < kernel; ++k) {
          acc += weights[k] * img.at(y, Reflect(x + k - radius, w), c);
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < kernel; ++k) {
          const int yy = Reflect(y + k - radius, h);
          acc += weights[k] * tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
        }
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image HorizontalFlip(const Image& img, double p, Rng& rng) {
  CheckProbability(p);
  if (!rng.Bernoulli(p)) return img;
  Image out = img;
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = img.at(y, w - 1 - x, c);
      }
    }
  }
  return out;
}

Image GrayscaleWithProb(const Image& img, double p, Rng& rng) {
  CheckProbability(p);
  if (!rng.Bernoulli(p)) return img;
  const Image gray = ToGrayscale(img);
  return img.channels() == 3 ? ToRgb(gray) : gray;
}

Image AdjustBrightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image out = img;
  for (float& v : out.mutable_data()) {
    v = static_cast<float>(std::clamp(v * factor, 0.0, 1.0));
  }
  return out;
}

Image RotateHue(const Image& img, double shift) {
  if (shift == 0.0 || img.channels() != 3) return img;
  Image out = img;
  auto data = out.mutable_data();
  for (std::size_t i = 0; i + 2 < data.size(); i += 3) {
    double h, s, v;
    RgbToHsv(data[i], data[i + 1], data[i + 2], h, s, v);
    if (s <= 0.0) continue;
    double r, g, b;
    HsvToRgb(h + shift, s, v, r, g, b);
    data[i] = static_cast<float>(std::clamp(r, 0.0, 1.0));
    data[i + 1] = static_cast<float>(std::clamp(g, 0.0, 1.0));
    data[i + 2] = static_cast<float>(std::clamp(b, 0.0, 1.0));
  }
  return out;
}

Image ColorJitter(const Image& img, double brightness, double hue, Rng& rng) {
  NoiseSpec::ColorJitter(brightness, hue).Validate();
  // Both draws always happen so the stream position does not depend on
  // parameter values.
  const double factor =
      rng.Uniform(std::max(0.0, 1.0 - brightness), 1.0 + brightness);
  const double shift = rng.Uniform(-hue, hue);
  Image out = AdjustBrightness(img, brightness == 0.0 ? 1.0 : factor);
  return RotateHue(out, hue == 0.0 ? 0.0 : shift);
}

Image RandomResizedCrop(const Image& img, int out_side, Rng& rng) {
  if (out_side < 1) {
    throw Error(ErrorCode::kZeroDimension, "crop output side must be >= 1");
  }
  constexpr double kMinArea = 0.08;
  constexpr double kMaxArea = 1.0;
  constexpr double kMinRatio = 3.0 / 4.0;
  constexpr double kMaxRatio = 4.0 / 3.0;
  const int height = img.height();
  const int width = img.width();
  const double area = static_cast<double>(height) * width;
  const double log_lo = std::log(kMinRatio);
  const double log_hi = std::log(kMaxRatio);

  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.Uniform(kMinArea, kMaxArea);
    const double ratio = std::exp(rng.Uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const int top = static_cast<int>(rng.UniformInt(0, height - h));
      const int left = static_cast<int>(rng.UniformInt(0, width - w));
      return ResizeBilinear(Crop(img, top, left, h, w), out_side, out_side);
    }
  }
  // Center crop fallback, clamped to the allowed aspect ratios.
  const double in_ratio = static_cast<double>(width) / height;
  int w = width;
  int h = height;
  if (in_ratio < kMinRatio) {
    h = std::max(1, static_cast<int>(std::lround(w / kMinRatio)));
  } else if (in_ratio > kMaxRatio) {
    w = std::max(1, static_cast<int>(std::lround(h * kMaxRatio)));
  }
  h = std::min(h, height);
  w = std::min(w, width);
  const int top = (height - h) / 2;
  const int left = (width - w) / 2;
  return ResizeBilinear(Crop(img, top, left, h, w), out_side, out_side);
}

Image ApplyNoise(const NoiseSpec& spec, const Image& img, Rng& rng) {
  spec.Validate();
  switch (spec.kind) {
    case NoiseKind::kGaussianBlur:
      return GaussianBlur(img, spec.kernel);
    case NoiseKind::kRandomHorizontalFlip:
      return HorizontalFlip(img, spec.probability, rng);
    case NoiseKind::kRandomGrayscale:
      return GrayscaleWithProb(img, spec.probability, rng);
    case NoiseKind::kColorJitter:
      return ColorJitter(img, spec.brightness, spec.hue, rng);
    case NoiseKind::kRandomResizedCrop:
      return RandomResizedCrop(img, spec.crop_side, rng);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown noise kind");
}

namespace {

nlohmann::ordered_json SpecToJson(const NoiseSpec& spec) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  switch (spec.kind) {
    case NoiseKind::kGaussianBlur:
      params["kernel"] = spec.kernel;
      params["sigma"] = BlurSigma(spec.kernel);
      break;
    case NoiseKind::kRandomHorizontalFlip:
    case NoiseKind::kRandomGrayscale:
      params["p"] = spec.probability;
      break;
    case NoiseKind::kColorJitter:
      params["brightness"] = spec.brightness;
      params["hue"] = spec.hue;
      params["sampling"] =
          "factor~U[max(0,1-b),1+b] then hue shift~U[-h,h] turns (HSV)";
      break;
    case NoiseKind::kRandomResizedCrop:
      params["size"] = spec.crop_side;
      params["scale"] = {0.08, 1.0};
      params["ratio"] = {3.0 / 4.0, 4.0 / 3.0};
      break;
  }
  return {{"kind", NoiseKindName(spec.kind)}, {"tag", spec.Tag()},
          {"params", params}};
}

}  // namespace

std::vector<ManifestEntry> BuildDistortedSet(const fs::path& input_dir,
                                             const std::vector<NoiseSpec>& catalog,
                                             std::uint64_t seed,
                                             const fs::path& out_dir,
                                             const DistortOptions& options) {
  const auto inputs = ListImageFiles(input_dir);
  if (inputs.empty()) {
    throw Error(ErrorCode::kEmptyInputDir,
                "no decodable images in " + input_dir.string());
  }
  if (catalog.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty noise catalog");
  }
  for (const auto& spec : catalog) spec.Validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kWriteFailure, out_dir.string());

  const std::size_t per_image = catalog.size();
  std::vector<ManifestEntry> manifest(inputs.size() * per_image);
  const Rng root(seed);
  ParallelFor(inputs.size(), options.jobs, [&](std::size_t i) {
    const Image source = LoadImage(inputs[i]);
    for (std::size_t j = 0; j < per_image; ++j) {
      const NoiseSpec& spec = catalog[j];
      Rng rng = root.Substream({i, j});
      const Image distorted = ApplyNoise(spec, source, rng);
      const std::string name =
          inputs[i].stem().string() + "__" + spec.Tag() + options.extension;
      SaveImage(distorted, out_dir / name);
      manifest[i * per_image + j] = {name, inputs[i].string(), spec,
                                     spec.IsCanonical(), rng.seed()};
    }
  });

  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : manifest) {
    doc.push_back({{"output_path", e.output_path},
                   {"source_path", e.source_path},
                   {"spec", SpecToJson(e.spec)},
                   {"canonical", e.canonical},
                   {"substream_seed", e.substream_seed}});
  }
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kWriteFailure, "manifest.json");
  return manifest;
}

}  // namespace sifid::augment
