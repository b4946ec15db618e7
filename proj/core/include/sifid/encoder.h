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

#ifndef SIFID_ENCODER_H_
#define SIFID_ENCODER_H_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sifid/image.h"

namespace sifid::encoder {

// Small convolutional feature extractor: `widths.size()` blocks of
// 3x3/stride-2/pad-1 convolution + leaky rectifier, global average pool,
// then one affine map to `feature_dim` outputs.
struct EncoderConfig {
  int input_side = 64;
  std::vector<int> widths = {8, 16, 32};
  double leaky_slope = 0.01;
  int feature_dim = 64;
  std::uint64_t init_seed = 0;

  int conv_blocks() const { return static_cast<int>(widths.size()); }
  // Throws InvalidConfig.
  void Validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline constexpr int kInputChannels = 3;

// Closed form: sum over conv layers of (9 * in * out + out) plus the head's
// last_width * feature_dim + feature_dim.
std::size_t ParameterCount(const EncoderConfig& config);

using FeatureVector = std::vector<double>;
// N x d, one feature vector per row.
using FeatureSet = Eigen::MatrixXd;

class Encoder {
 public:
  // Xavier-uniform weights seeded by config.init_seed, zero biases.
  static Encoder Init(const EncoderConfig& config);
  // Throws InvalidConfig on a length mismatch or non-finite parameter.
  Encoder(EncoderConfig config, std::vector<double> parameters);

  const EncoderConfig& config() const { return config_; }
  std::span<const double> parameters() const { return parameters_; }
  std::size_t parameter_count() const { return parameters_.size(); }
  void SetParameters(std::vector<double> parameters);

  // Changes on every parameter update; forward traces remember it.
  std::uint64_t revision() const { return revision_; }

  // Offsets into the flat parameter vector.
  std::size_t conv_weight_offset(int layer) const;
  std::size_t conv_bias_offset(int layer) const;
  std::size_t head_weight_offset() const;
  std::size_t head_bias_offset() const;

 private:
  EncoderConfig config_;
  std::vector<double> parameters_;
  std::uint64_t revision_;
};

// Cached activations of one forward pass.
struct ForwardTrace {
  std::uint64_t revision = 0;
  bool valid = false;
  // Input of every conv layer (CHW); entry 0 is the image.
  std::vector<std::vector<double>> layer_inputs;
  // Pre-activation output of every conv layer.
  std::vector<std::vector<double>> pre_activations;
  std::vector<double> pooled;
  FeatureVector features;
};

// Resizes to input_side x input_side and replicates gray to RGB.
Image Preprocess(const Image& img, int input_side);

// Throws ShapeMismatch unless img is input_side x input_side (1 or 3
// channels; gray is replicated).
ForwardTrace ForwardWithTrace(const Encoder& enc, const Image& img);
FeatureVector Forward(const Encoder& enc, const Image& img);
// Row i equals Forward(enc, imgs[i]). Throws EmptyBatch.
FeatureSet ForwardBatch(const Encoder& enc, std::span<const Image> imgs,
                        int jobs = 1);

// Gradient of (seed * <feature_grad, features>) w.r.t. every parameter,
// i.e. the chain rule seeded with dLoss/dFeatures. Throws StaleCache if
// `trace` is empty or was produced under different parameters.
std::vector<double> Backward(const Encoder& enc, const ForwardTrace& trace,
                             std::span<const double> feature_grad,
                             double seed = 1.0);

// --- Feature files --------------------------------------------------------
// Layout: "SIFIDFEA" magic, u32 version (1), u32 d, u32 N, then N*d
// little-endian float32 values, row-major.
void SaveFeatureFile(const FeatureSet& features,
                     const std::filesystem::path& path);
FeatureSet LoadFeatureFile(const std::filesystem::path& path);

// --- Checkpoints ----------------------------------------------------------
struct CheckpointMeta {
  std::string noise_tag;
  int epoch = 0;
  std::uint64_t seed = 0;
  // Free-form config echo (flat key = value lines).
  std::string config_echo;
};

struct Checkpoint {
  Encoder encoder;
  CheckpointMeta meta;
};

// Layout: "SIFIDCKP" magic, u32 version (1), u32 JSON header length, JSON
// header (encoder config + meta), u64 parameter count, float64 parameters.
void SaveCheckpoint(const std::filesystem::path& path, const Encoder& enc,
                    const CheckpointMeta& meta);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace sifid::encoder

#endif  // SIFID_ENCODER_H_
