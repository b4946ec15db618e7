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

#ifndef SIFID_TRAINER_H_
#define SIFID_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sifid/augment.h"
#include "sifid/encoder.h"
#include "sifid/image.h"

namespace sifid::trainer {

// kAttract minimizes -1/2 cos(F, F~), pulling augmented pairs together.
// kPaperLiteral minimizes +1/2 cos(F, F~) exactly as the loss is printed.
enum class LossSign { kAttract, kPaperLiteral };

std::string LossSignName(LossSign sign);
LossSign ParseLossSign(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  augment::NoiseSpec noise = augment::NoiseSpec::ColorJitter(0.5, 0.3);
  LossSign loss_sign = LossSign::kAttract;
  encoder::EncoderConfig encoder;
  // Worker threads for per-pair forward/backward inside a batch.
  int jobs = 1;

  // Throws InvalidConfig.
  void Validate() const;
  // Flat "key = value" lines, stable order.
  std::string Echo() const;
};

// <F/|F|, F~/|F~|>. Throws ZeroVector / LengthMismatch.
double CosineSimilarity(std::span<const double> f, std::span<const double> f_tilde);
double CosineLoss(std::span<const double> f, std::span<const double> f_tilde,
                  LossSign sign = LossSign::kAttract);

struct LossGradient {
  double loss = 0.0;
  double cosine = 0.0;
  std::vector<double> d_f;
  std::vector<double> d_f_tilde;
};
LossGradient CosineLossWithGradient(std::span<const double> f,
                                    std::span<const double> f_tilde,
                                    LossSign sign = LossSign::kAttract);

struct SgdResult {
  std::vector<double> params;
  std::vector<double> velocity;
};
// v' = momentum * v + g;  p' = p - lr * v'.
// Throws LengthMismatch / NonFiniteGradient.
SgdResult SgdStep(std::span<const double> params, std::span<const double> grads,
                  std::span<const double> velocity, double lr, double momentum);

struct PairResult {
  double loss = 0.0;
  double cosine = 0.0;
  // d(seed * loss)/d(parameters), parameter-vector layout.
  std::vector<double> gradient;
};
// Both inputs must already be encoder-sized (see encoder::Preprocess).
PairResult PairLossAndGradient(const encoder::Encoder& enc, const Image& x,
                               const Image& x_tilde, LossSign sign,
                               double seed = 1.0);

using ImagePair = std::pair<Image, Image>;

// Preprocessed (clean, noised) pairs for one epoch in shuffled order.
// Deterministic in (cfg.seed, epoch).
std::vector<ImagePair> EpochPairs(std::span<const Image> images,
                                  const TrainConfig& cfg, int epoch);

double MeanPairLoss(const encoder::Encoder& enc, std::span<const ImagePair> pairs,
                    LossSign sign, int jobs = 1);
double MeanPairCosine(const encoder::Encoder& enc,
                      std::span<const ImagePair> pairs, int jobs = 1);

struct EpochLog {
  int epoch = 0;
  // Mean pair loss of the end-of-epoch parameters over that epoch's pairs.
  double mean_loss = 0.0;
  // Trace of the clean-feature covariance (collapse monitor).
  double feature_covariance_trace = 0.0;
};

struct CheckpointSeries {
  encoder::Encoder initial;
  // checkpoints[e - 1] is the state after epoch e.
  std::vector<encoder::Encoder> checkpoints;
  augment::NoiseSpec noise;
  TrainConfig config;
  std::vector<EpochLog> log;
  std::vector<double> batch_losses;

  int epochs() const { return static_cast<int>(checkpoints.size()); }
  // Epoch 0 is the initial encoder.
  const encoder::Encoder& at_epoch(int epoch) const {
    return epoch == 0 ? initial : checkpoints.at(epoch - 1);
  }
};

// Throws EmptyTrainDir / DivergenceDetected.
CheckpointSeries Train(std::span<const Image> images, const TrainConfig& cfg);
CheckpointSeries Train(const std::filesystem::path& train_dir,
                       const TrainConfig& cfg);

// "{noise_tag}_{epoch:03}.ckpt"; epoch 000 is the initial encoder.
std::string CheckpointFileName(const std::string& noise_tag, int epoch);
// Writes every checkpoint plus training_log.csv into `dir`.
void WriteSeries(const CheckpointSeries& series, const std::filesystem::path& dir);
void WriteTrainingLog(std::span<const EpochLog> log,
                      const std::filesystem::path& path);

// Reloads the encoders written by WriteSeries for `noise_tag`.
struct LoadedSeries {
  std::string noise_tag;
  std::vector<encoder::Encoder> by_epoch;  // index = epoch, 0 = initial
};
LoadedSeries LoadSeries(const std::filesystem::path& dir,
                        const std::string& noise_tag);

}  // namespace sifid::trainer

#endif  // SIFID_TRAINER_H_
