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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "sifid/error.h"
#include "sifid/parallel.h"
#include "sifid/rng.h"
#include "binary_io.h"

namespace sifid::encoder {
namespace fs = std::filesystem;

using internal::ByteReader;
using internal::PutU32;
using internal::PutU64;
using internal::ReadAll;
using internal::WriteAll;

namespace {

std::atomic<std::uint64_t> g_revision{1};

std::uint64_t NextRevision() { return g_revision.fetch_add(1); }

int InputWidth(const EncoderConfig& config, int layer) {
  return layer == 0 ? kInputChannels : config.widths[layer - 1];
}

// 3x3, stride 2, zero padding 1. `in` is CHW with side `side`.
void ConvForward(const double* in, int in_ch, int side, const double* weights,
                 const double* bias, int out_ch, double* out) {
  const int out_side = side / 2;
  const int plane = out_side * out_side;
  for (int o = 0; o < out_ch; ++o) {
    double* dst = out + static_cast<std::size_t>(o) * plane;
    std::fill(dst, dst + plane, bias[o]);
    for (int i = 0; i < in_ch; ++i) {
      const double* src = in + static_cast<std::size_t>(i) * side * side;
      const double* w = weights + (static_cast<std::size_t>(o) * in_ch + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wk = w[ky * 3 + kx];
          for (int y = 0; y < out_side; ++y) {
            const int sy = 2 * y + ky - 1;
            if (sy < 0 || sy >= side) continue;
            const double* row = src + static_cast<std::size_t>(sy) * side;
            double* out_row = dst + static_cast<std::size_t>(y) * out_side;
            const int x_begin = kx == 0 ? 1 : 0;
            for (int x = x_begin; x < out_side; ++x) {
              const int sx = 2 * x + kx - 1;
              if (sx >= side) break;
              out_row[x] += wk * row[sx];
            }
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
void ConvBackward(const double* in, int in_ch, int side, const double* weights,
                  int out_ch, const double* d_out, double* d_weights,
                  double* d_bias, double* d_in) {
  const int out_side = side / 2;
  const int plane = out_side * out_side;
  for (int o = 0; o < out_ch; ++o) {
    const double* g = d_out + static_cast<std::size_t>(o) * plane;
    double bias_acc = 0.0;
    for (int p = 0; p < plane; ++p) bias_acc += g[p];
    d_bias[o] += bias_acc;
    for (int i = 0; i < in_ch; ++i) {
      const double* src = in + static_cast<std::size_t>(i) * side * side;
      double* dsrc =
          d_in == nullptr ? nullptr : d_in + static_cast<std::size_t>(i) * side * side;
      const std::size_t widx = (static_cast<std::size_t>(o) * in_ch + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wk = weights[widx + ky * 3 + kx];
          double acc = 0.0;
          for (int y = 0; y < out_side; ++y) {
            const int sy = 2 * y + ky - 1;
            if (sy < 0 || sy >= side) continue;
            const double* row = src + static_cast<std::size_t>(sy) * side;
            const double* grow = g + static_cast<std::size_t>(y) * out_side;
            double* drow =
                dsrc == nullptr ? nullptr : dsrc + static_cast<std::size_t>(sy) * side;
            const int x_begin = kx == 0 ? 1 : 0;
            for (int x = x_begin; x < out_side; ++x) {
              const int sx = 2 * x + kx - 1;
              if (sx >= side) break;
              acc += grow[x] * row[sx];
              if (drow != nullptr) drow[sx] += wk * grow[x];
            }
          }
          d_weights[widx + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

constexpr char kFeatureMagic[] = "SIFIDFEA";
constexpr char kCheckpointMagic[] = "SIFIDCKP";
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

void EncoderConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (feature_dim < 2) fail("feature_dim must be >= 2");
  if (widths.empty()) fail("at least one conv block is required");
  if (widths.size() > 16) fail("too many conv blocks");
  for (int w : widths) {
    if (w < 1) fail("conv widths must be >= 1");
  }
  if (input_side < 2) fail("input_side must be >= 2");
  const int divisor = 1 << conv_blocks();
  if (input_side % divisor != 0) {
    fail("input_side " + std::to_string(input_side) +
         " is not divisible by 2^conv_blocks = " + std::to_string(divisor));
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    fail("leaky_slope must lie in [0, 1)");
  }
}

std::size_t ParameterCount(const EncoderConfig& config) {
  std::size_t count = 0;
  for (int l = 0; l < config.conv_blocks(); ++l) {
    const std::size_t in = InputWidth(config, l);
    const std::size_t out = config.widths[l];
    count += 9 * in * out + out;
  }
  const std::size_t last = config.widths.back();
  count += last * config.feature_dim + config.feature_dim;
  return count;
}

Encoder::Encoder(EncoderConfig config, std::vector<double> parameters)
    : config_(std::move(config)), parameters_(std::move(parameters)),
      revision_(NextRevision()) {
  config_.Validate();
  if (parameters_.size() != ParameterCount(config_)) {
    throw Error(ErrorCode::kInvalidConfig,
                "parameter vector has " + std::to_string(parameters_.size()) +
                    " entries, config needs " +
                    std::to_string(ParameterCount(config_)));
  }
  for (double p : parameters_) {
    if (!std::isfinite(p)) {
      throw Error(ErrorCode::kInvalidConfig, "non-finite parameter");
    }
  }
}

Encoder Encoder::Init(const EncoderConfig& config) {
  config.Validate();
  std::vector<double> params(ParameterCount(config), 0.0);
  Rng rng(config.init_seed);
  std::size_t offset = 0;
  for (int l = 0; l < config.conv_blocks(); ++l) {
    const int in = InputWidth(config, l);
    const int out = config.widths[l];
    const double limit = std::sqrt(6.0 / (9.0 * in + 9.0 * out));
    const std::size_t n = static_cast<std::size_t>(9) * in * out;
    for (std::size_t i = 0; i < n; ++i) params[offset + i] = rng.Uniform(-limit, limit);
    offset += n + out;
  }
  const int last = config.widths.back();
  const double limit = std::sqrt(6.0 / (last + config.feature_dim));
  const std::size_t n = static_cast<std::size_t>(last) * config.feature_dim;
  for (std::size_t i = 0; i < n; ++i) params[offset + i] = rng.Uniform(-limit, limit);
  return Encoder(config, std::move(params));
}

void Encoder::SetParameters(std::vector<double> parameters) {
  if (parameters.size() != parameters_.size()) {
    throw Error(ErrorCode::kLengthMismatch, "parameter vector length changed");
  }
  for (double p : parameters) {
    if (!std::isfinite(p)) {
      throw Error(ErrorCode::kNonFiniteGradient, "non-finite parameter");
    }
  }
  parameters_ = std::move(parameters);
  revision_ = NextRevision();
}

std::size_t Encoder::conv_weight_offset(int layer) const {
  std::size_t offset = 0;
  for (int l = 0; l < layer; ++l) {
    offset += 9 * static_cast<std::size_t>(InputWidth(config_, l)) *
                  config_.widths[l] +
              config_.widths[l];
  }
  return offset;
}

std::size_t Encoder::conv_bias_offset(int layer) const {
  return conv_weight_offset(layer) +
         9 * static_cast<std::size_t>(InputWidth(config_, layer)) *
             config_.widths[layer];
}

std::size_t Encoder::head_weight_offset() const {
  return conv_weight_offset(config_.conv_blocks());
}

std::size_t Encoder::head_bias_offset() const {
  return head_weight_offset() +
         static_cast<std::size_t>(config_.widths.back()) * config_.feature_dim;
}

Image Preprocess(const Image& img, int input_side) {
  Image out = ToRgb(img);
  if (out.height() != input_side || out.width() != input_side) {
    out = ResizeBilinear(out, input_side, input_side);
  }
  return out;
}

ForwardTrace ForwardWithTrace(const Encoder& enc, const Image& img) {
  const EncoderConfig& cfg = enc.config();
  const int side = cfg.input_side;
  if (img.height() != side || img.width() != side) {
    throw Error(ErrorCode::kShapeMismatch,
                "encoder expects " + std::to_string(side) + "x" +
                    std::to_string(side) + " input, got " +
                    std::to_string(img.height()) + "x" +
                    std::to_string(img.width()));
  }
  ForwardTrace trace;
  trace.revision = enc.revision();
  const int blocks = cfg.conv_blocks();
  trace.layer_inputs.resize(blocks);
  trace.pre_activations.resize(blocks);

  // HWC image -> CHW doubles.
  auto& input = trace.layer_inputs[0];
  input.resize(static_cast<std::size_t>(kInputChannels) * side * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < kInputChannels; ++c) {
        const int src_c = img.channels() == 1 ? 0 : c;
        input[(static_cast<std::size_t>(c) * side + y) * side + x] =
            img.at(y, x, src_c);
      }
    }
  }

  const auto params = enc.parameters();
  const double slope = cfg.leaky_slope;
  int cur_side = side;
  std::vector<double> activated;
  for (int l = 0; l < blocks; ++l) {
    const int in_ch = InputWidth(cfg, l);
    const int out_ch = cfg.widths[l];
    const int out_side = cur_side / 2;
    auto& pre = trace.pre_activations[l];
    pre.assign(static_cast<std::size_t>(out_ch) * out_side * out_side, 0.0);
    ConvForward(trace.layer_inputs[l].data(), in_ch, cur_side,
                params.data() + enc.conv_weight_offset(l),
                params.data() + enc.conv_bias_offset(l), out_ch, pre.data());
    activated.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
      activated[i] = pre[i] > 0.0 ? pre[i] : slope * pre[i];
    }
    if (l + 1 < blocks) {
      trace.layer_inputs[l + 1] = activated;
    }
    cur_side = out_side;
  }

  const int last = cfg.widths.back();
  const int plane = cur_side * cur_side;
  trace.pooled.assign(last, 0.0);
  for (int c = 0; c < last; ++c) {
    double acc = 0.0;
    for (int p = 0; p < plane; ++p) acc += activated[static_cast<std::size_t>(c) * plane + p];
    trace.pooled[c] = acc / plane;
  }

  const double* head_w = params.data() + enc.head_weight_offset();
  const double* head_b = params.data() + enc.head_bias_offset();
  trace.features.assign(cfg.feature_dim, 0.0);
  for (int k = 0; k < cfg.feature_dim; ++k) {
    double acc = head_b[k];
    for (int c = 0; c < last; ++c) {
      acc += head_w[static_cast<std::size_t>(k) * last + c] * trace.pooled[c];
    }
    trace.features[k] = acc;
  }
  trace.valid = true;
  return trace;
}

FeatureVector Forward(const Encoder& enc, const Image& img) {
  return ForwardWithTrace(enc, img).features;
}

FeatureSet ForwardBatch(const Encoder& enc, std::span<const Image> imgs,
                        int jobs) {
  if (imgs.empty()) throw Error(ErrorCode::kEmptyBatch, "empty image batch");
  const int d = enc.config().feature_dim;
  FeatureSet out(static_cast<Eigen::Index>(imgs.size()), d);
  ParallelFor(imgs.size(), jobs, [&](std::size_t i) {
    const FeatureVector f = Forward(enc, imgs[i]);
    for (int k = 0; k < d; ++k) out(static_cast<Eigen::Index>(i), k) = f[k];
  });
  return out;
}

std::vector<double> Backward(const Encoder& enc, const ForwardTrace& trace,
                             std::span<const double> feature_grad,
                             double seed) {
  if (!trace.valid) {
    throw Error(ErrorCode::kStaleCache, "no cached forward pass");
  }
  if (trace.revision != enc.revision()) {
    throw Error(ErrorCode::kStaleCache,
                "forward pass was computed with different parameters");
  }
  const EncoderConfig& cfg = enc.config();
  if (feature_grad.size() != static_cast<std::size_t>(cfg.feature_dim)) {
    throw Error(ErrorCode::kLengthMismatch, "feature gradient length");
  }
  const auto params = enc.parameters();
  std::vector<double> grad(params.size(), 0.0);
  const int last = cfg.widths.back();
  const int blocks = cfg.conv_blocks();

  // Head.
  double* g_head_w = grad.data() + enc.head_weight_offset();
  double* g_head_b = grad.data() + enc.head_bias_offset();
  const double* head_w = params.data() + enc.head_weight_offset();
  std::vector<double> d_pooled(last, 0.0);
  for (int k = 0; k < cfg.feature_dim; ++k) {
    const double g = seed * feature_grad[k];
    g_head_b[k] += g;
    for (int c = 0; c < last; ++c) {
      g_head_w[static_cast<std::size_t>(k) * last + c] += g * trace.pooled[c];
      d_pooled[c] += g * head_w[static_cast<std::size_t>(k) * last + c];
    }
  }

  // Global average pool -> gradient of the last activation map.
  int side = cfg.input_side >> blocks;
  int plane = side * side;
  std::vector<double> d_act(static_cast<std::size_t>(last) * plane);
  for (int c = 0; c < last; ++c) {
    std::fill_n(d_act.begin() + static_cast<std::ptrdiff_t>(c) * plane, plane,
                d_pooled[c] / plane);
  }

  const double slope = cfg.leaky_slope;
  for (int l = blocks - 1; l >= 0; --l) {
    const auto& pre = trace.pre_activations[l];
    for (std::size_t i = 0; i < pre.size(); ++i) {
      if (pre[i] <= 0.0) d_act[i] *= slope;
    }
    const int in_ch = InputWidth(cfg, l);
    const int in_side = side * 2;
    std::vector<double> d_in;
    if (l > 0) d_in.assign(static_cast<std::size_t>(in_ch) * in_side * in_side, 0.0);
    ConvBackward(trace.layer_inputs[l].data(), in_ch, in_side,
                 params.data() + enc.conv_weight_offset(l), cfg.widths[l],
                 d_act.data(), grad.data() + enc.conv_weight_offset(l),
                 grad.data() + enc.conv_bias_offset(l),
                 l > 0 ? d_in.data() : nullptr);
    d_act = std::move(d_in);
    side = in_side;
  }
  return grad;
}

void SaveFeatureFile(const FeatureSet& features, const fs::path& path) {
  if (features.cols() < 1) {
    throw Error(ErrorCode::kDimensionHeaderInvalid, "feature dimension 0");
  }
  std::vector<unsigned char> out(kFeatureMagic, kFeatureMagic + 8);
  PutU32(out, kFormatVersion);
  PutU32(out, static_cast<std::uint32_t>(features.cols()));
  PutU32(out, static_cast<std::uint32_t>(features.rows()));
  out.reserve(out.size() + features.size() * 4);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const float v = static_cast<float>(features(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      PutU32(out, bits);
    }
  }
  WriteAll(path, out);
}

FeatureSet LoadFeatureFile(const fs::path& path) {
  const auto bytes = ReadAll(path);
  ByteReader reader(bytes, ErrorCode::kFormatMismatch);
  if (reader.Bytes(8) != std::string(kFeatureMagic, 8)) {
    throw Error(ErrorCode::kFormatMismatch, "bad feature file magic");
  }
  const std::uint32_t version = reader.U32();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kFormatMismatch,
                "unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t d = reader.U32();
  const std::uint32_t n = reader.U32();
  if (d == 0) {
    throw Error(ErrorCode::kDimensionHeaderInvalid, "feature dimension 0");
  }
  const std::uint64_t expected = std::uint64_t{d} * n * 4;
  if (reader.remaining() != expected) {
    throw Error(ErrorCode::kFormatMismatch,
                "payload of " + std::to_string(reader.remaining()) +
                    " bytes does not hold " + std::to_string(n) +
                    " rows of dimension " + std::to_string(d));
  }
  FeatureSet out(n, d);
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < d; ++c) {
      const std::uint32_t bits = reader.U32();
      float v;
      std::memcpy(&v, &bits, 4);
      out(r, c) = v;
    }
  }
  return out;
}

void SaveCheckpoint(const fs::path& path, const Encoder& enc,
                    const CheckpointMeta& meta) {
  const auto& cfg = enc.config();
  nlohmann::ordered_json header = {
      {"config",
       {{"input_side", cfg.input_side},
        {"widths", cfg.widths},
        {"leaky_slope", cfg.leaky_slope},
        {"feature_dim", cfg.feature_dim},
        {"init_seed", cfg.init_seed}}},
      {"noise_tag", meta.noise_tag},
      {"epoch", meta.epoch},
      {"seed", meta.seed},
      {"config_echo", meta.config_echo}};
  const std::string text = header.dump();
  std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + 8);
  PutU32(out, kFormatVersion);
  PutU32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  PutU64(out, enc.parameter_count());
  for (double p : enc.parameters()) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, 8);
    PutU64(out, bits);
  }
  WriteAll(path, out);
}

Checkpoint LoadCheckpoint(const fs::path& path) {
  const auto bytes = ReadAll(path);
  ByteReader reader(bytes, ErrorCode::kFormatMismatch);
  if (reader.Bytes(8) != std::string(kCheckpointMagic, 8)) {
    throw Error(ErrorCode::kFormatMismatch, "bad checkpoint magic");
  }
  if (reader.U32() != kFormatVersion) {
    throw Error(ErrorCode::kFormatMismatch, "unsupported checkpoint version");
  }
  const std::uint32_t header_len = reader.U32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.Bytes(header_len));
    EncoderConfig cfg;
    const auto& c = header.at("config");
    cfg.input_side = c.at("input_side").get<int>();
    cfg.widths = c.at("widths").get<std::vector<int>>();
    cfg.leaky_slope = c.at("leaky_slope").get<double>();
    cfg.feature_dim = c.at("feature_dim").get<int>();
    cfg.init_seed = c.at("init_seed").get<std::uint64_t>();
    const std::uint64_t count = reader.U64();
    if (reader.remaining() != count * 8) {
      throw Error(ErrorCode::kFormatMismatch, "parameter payload size");
    }
    std::vector<double> params(count);
    for (auto& p : params) {
      const std::uint64_t bits = reader.U64();
      std::memcpy(&p, &bits, 8);
    }
    CheckpointMeta meta;
    meta.noise_tag = header.at("noise_tag").get<std::string>();
    meta.epoch = header.at("epoch").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.config_echo = header.value("config_echo", "");
    return {Encoder(cfg, std::move(params)), meta};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatMismatch,
                std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace sifid::encoder
