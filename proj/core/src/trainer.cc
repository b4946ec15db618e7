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

#include "sifid/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sifid/error.h"
#include "sifid/parallel.h"
#include "sifid/rng.h"

namespace sifid::trainer {
namespace fs = std::filesystem;
using encoder::Encoder;
using encoder::FeatureVector;

namespace {

double Norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double SignFactor(LossSign sign) {
  return sign == LossSign::kAttract ? -0.5 : 0.5;
}

void CheckPair(std::span<const double> f, std::span<const double> f_tilde) {
  if (f.size() != f_tilde.size()) {
    throw Error(ErrorCode::kLengthMismatch, "feature vectors differ in length");
  }
}

}  // namespace

std::string LossSignName(LossSign sign) {
  return sign == LossSign::kAttract ? "attract" : "paper_literal";
}

LossSign ParseLossSign(const std::string& name) {
  if (name == "attract") return LossSign::kAttract;
  if (name == "paper_literal") return LossSign::kPaperLiteral;
  throw Error(ErrorCode::kConfigInvalid, "unknown loss sign '" + name + "'");
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (jobs < 1) fail("jobs must be >= 1");
  noise.Validate();
  encoder.Validate();
}

std::string TrainConfig::Echo() const {
  std::ostringstream out;
  out.precision(17);
  out << "epochs = " << epochs << '\n'
      << "batch_size = " << batch_size << '\n'
      << "learning_rate = " << learning_rate << '\n'
      << "momentum = " << momentum << '\n'
      << "seed = " << seed << '\n'
      << "noise = " << noise.Tag() << '\n'
      << "loss_sign = " << LossSignName(loss_sign) << '\n'
      << "input_side = " << encoder.input_side << '\n'
      << "widths = ";
  for (std::size_t i = 0; i < encoder.widths.size(); ++i) {
    out << (i ? "," : "") << encoder.widths[i];
  }
  out << '\n'
      << "leaky_slope = " << encoder.leaky_slope << '\n'
      << "feature_dim = " << encoder.feature_dim << '\n'
      << "init_seed = " << encoder.init_seed << '\n';
  return out.str();
}

double CosineSimilarity(std::span<const double> f,
                        std::span<const double> f_tilde) {
  CheckPair(f, f_tilde);
  const double nf = Norm(f);
  const double nt = Norm(f_tilde);
  if (nf == 0.0 || nt == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) dot += (f[i] / nf) * (f_tilde[i] / nt);
  return std::clamp(dot, -1.0, 1.0);
}

double CosineLoss(std::span<const double> f, std::span<const double> f_tilde,
                  LossSign sign) {
  return SignFactor(sign) * CosineSimilarity(f, f_tilde);
}

LossGradient CosineLossWithGradient(std::span<const double> f,
                                    std::span<const double> f_tilde,
                                    LossSign sign) {
  CheckPair(f, f_tilde);
  const double nf = Norm(f);
  const double nt = Norm(f_tilde);
  if (nf == 0.0 || nt == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  }
  const std::size_t d = f.size();
  std::vector<double> u(d), v(d);
  double c = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    u[i] = f[i] / nf;
    v[i] = f_tilde[i] / nt;
    c += u[i] * v[i];
  }
  const double s = SignFactor(sign);
  LossGradient out;
  out.cosine = c;
  out.loss = s * c;
  out.d_f.resize(d);
  out.d_f_tilde.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.d_f[i] = s * (v[i] - c * u[i]) / nf;
    out.d_f_tilde[i] = s * (u[i] - c * v[i]) / nt;
  }
  return out;
}

SgdResult SgdStep(std::span<const double> params, std::span<const double> grads,
                  std::span<const double> velocity, double lr, double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "params, grads and velocity must have equal length");
  }
  SgdResult out;
  out.params.resize(params.size());
  out.velocity.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(grads[i]) || !std::isfinite(params[i]) ||
        !std::isfinite(velocity[i])) {
      throw Error(ErrorCode::kNonFiniteGradient,
                  "non-finite value at index " + std::to_string(i));
    }
    out.velocity[i] = momentum * velocity[i] + grads[i];
    out.params[i] = params[i] - lr * out.velocity[i];
  }
  return out;
}

PairResult PairLossAndGradient(const Encoder& enc, const Image& x,
                               const Image& x_tilde, LossSign sign,
                               double seed) {
  const auto trace = encoder::ForwardWithTrace(enc, x);
  const auto trace_tilde = encoder::ForwardWithTrace(enc, x_tilde);
  const auto lg = CosineLossWithGradient(trace.features, trace_tilde.features, sign);
  PairResult out;
  out.loss = lg.loss;
  out.cosine = lg.cosine;
  out.gradient = encoder::Backward(enc, trace, lg.d_f, seed);
  const auto other = encoder::Backward(enc, trace_tilde, lg.d_f_tilde, seed);
  for (std::size_t i = 0; i < other.size(); ++i) out.gradient[i] += other[i];
  return out;
}

std::vector<ImagePair> EpochPairs(std::span<const Image> images,
                                  const TrainConfig& cfg, int epoch) {
  const Rng epoch_rng = Rng(cfg.seed).Substream({static_cast<std::uint64_t>(epoch)});
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = epoch_rng.Substream({0xF1});
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(shuffle.UniformInt(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  const int side = cfg.encoder.input_side;
  std::vector<ImagePair> pairs(images.size());
  ParallelFor(order.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t idx = order[k];
    Rng noise_rng = epoch_rng.Substream({0xA6, idx});
    const Image noised = augment::ApplyNoise(cfg.noise, images[idx], noise_rng);
    pairs[k] = {encoder::Preprocess(images[idx], side),
                encoder::Preprocess(noised, side)};
  });
  return pairs;
}

double MeanPairLoss(const Encoder& enc, std::span<const ImagePair> pairs,
                    LossSign sign, int jobs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyBatch, "no pairs");
  std::vector<double> losses(pairs.size());
  ParallelFor(pairs.size(), jobs, [&](std::size_t i) {
    losses[i] = CosineLoss(encoder::Forward(enc, pairs[i].first),
                           encoder::Forward(enc, pairs[i].second), sign);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
}

double MeanPairCosine(const Encoder& enc, std::span<const ImagePair> pairs,
                      int jobs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyBatch, "no pairs");
  std::vector<double> cos(pairs.size());
  ParallelFor(pairs.size(), jobs, [&](std::size_t i) {
    cos[i] = CosineSimilarity(encoder::Forward(enc, pairs[i].first),
                              encoder::Forward(enc, pairs[i].second));
  });
  return std::accumulate(cos.begin(), cos.end(), 0.0) / cos.size();
}

namespace {

// End-of-epoch evaluation: loss of the current parameters over the epoch's
// pairs and the trace of the clean-feature covariance.
EpochLog EvaluateEpoch(const Encoder& enc, std::span<const ImagePair> pairs,
                       const TrainConfig& cfg, int epoch) {
  const std::size_t n = pairs.size();
  const int d = enc.config().feature_dim;
  std::vector<double> losses(n);
  std::vector<FeatureVector> clean(n);
  ParallelFor(n, cfg.jobs, [&](std::size_t i) {
    clean[i] = encoder::Forward(enc, pairs[i].first);
    losses[i] = CosineLoss(clean[i], encoder::Forward(enc, pairs[i].second),
                           cfg.loss_sign);
  });
  EpochLog log;
  log.epoch = epoch;
  log.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  if (n >= 2) {
    double trace = 0.0;
    for (int k = 0; k < d; ++k) {
      double mean = 0.0;
      for (const auto& f : clean) mean += f[k];
      mean /= n;
      double var = 0.0;
      for (const auto& f : clean) var += (f[k] - mean) * (f[k] - mean);
      trace += var / (n - 1);
    }
    log.feature_covariance_trace = trace;
  }
  return log;
}

}  // namespace

CheckpointSeries Train(std::span<const Image> images, const TrainConfig& cfg) {
  cfg.Validate();
  if (images.empty()) {
    throw Error(ErrorCode::kEmptyTrainDir, "no training images");
  }
  Encoder enc = Encoder::Init(cfg.encoder);
  CheckpointSeries series{enc, {}, cfg.noise, cfg, {}, {}};
  std::vector<double> velocity(enc.parameter_count(), 0.0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto pairs = EpochPairs(images, cfg, epoch);
    for (std::size_t begin = 0; begin < pairs.size(); begin += cfg.batch_size) {
      const std::size_t end =
          std::min(pairs.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t count = end - begin;
      const double seed = 1.0 / static_cast<double>(count);
      std::vector<PairResult> results(count);
      ParallelFor(count, cfg.jobs, [&](std::size_t k) {
        const auto& [x, xt] = pairs[begin + k];
        results[k] = PairLossAndGradient(enc, x, xt, cfg.loss_sign, seed);
      });
      // Fixed-order reduction keeps results independent of `jobs`.
      std::vector<double> grad(enc.parameter_count(), 0.0);
      double batch_loss = 0.0;
      for (const auto& r : results) {
        batch_loss += r.loss;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += r.gradient[i];
      }
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::kDivergenceDetected,
                    "non-finite loss at epoch " + std::to_string(epoch));
      }
      series.batch_losses.push_back(batch_loss);
      try {
        SgdResult step = SgdStep(enc.parameters(), grad, velocity,
                                 cfg.learning_rate, cfg.momentum);
        velocity = std::move(step.velocity);
        enc.SetParameters(std::move(step.params));
      } catch (const Error& e) {
        throw Error(ErrorCode::kDivergenceDetected, e.what());
      }
    }
    const EpochLog log = EvaluateEpoch(enc, pairs, cfg, epoch);
    if (!std::isfinite(log.mean_loss)) {
      throw Error(ErrorCode::kDivergenceDetected,
                  "non-finite loss at epoch " + std::to_string(epoch));
    }
    series.log.push_back(log);
    series.checkpoints.push_back(enc);
  }
  return series;
}

CheckpointSeries Train(const fs::path& train_dir, const TrainConfig& cfg) {
  std::vector<fs::path> files;
  try {
    files = ListImageFiles(train_dir);
  } catch (const Error&) {
    throw Error(ErrorCode::kEmptyTrainDir, train_dir.string());
  }
  if (files.empty()) {
    throw Error(ErrorCode::kEmptyTrainDir,
                "no images in " + train_dir.string());
  }
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(LoadImage(f));
  return Train(images, cfg);
}

std::string CheckpointFileName(const std::string& noise_tag, int epoch) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_%03d.ckpt", epoch);
  return noise_tag + buf;
}

void WriteTrainingLog(std::span<const EpochLog> log, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "epoch,mean_loss,feature_covariance_trace\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.mean_loss << ',' << e.feature_covariance_trace
        << '\n';
  }
  if (!out) throw Error(ErrorCode::kWriteFailure, path.string());
}

void WriteSeries(const CheckpointSeries& series, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kWriteFailure, dir.string());
  const std::string tag = series.noise.Tag();
  const std::string echo = series.config.Echo();
  for (int e = 0; e <= series.epochs(); ++e) {
    encoder::SaveCheckpoint(dir / CheckpointFileName(tag, e), series.at_epoch(e),
                            {tag, e, series.config.seed, echo});
  }
  WriteTrainingLog(series.log, dir / (tag + "_training_log.csv"));
}

LoadedSeries LoadSeries(const fs::path& dir, const std::string& noise_tag) {
  LoadedSeries out{noise_tag, {}};
  for (int e = 0;; ++e) {
    const fs::path path = dir / CheckpointFileName(noise_tag, e);
    if (!fs::exists(path)) break;
    out.by_epoch.push_back(encoder::LoadCheckpoint(path).encoder);
  }
  if (out.by_epoch.empty()) {
    throw Error(ErrorCode::kFileNotFound,
                "no checkpoints for '" + noise_tag + "' in " + dir.string());
  }
  return out;
}

}  // namespace sifid::trainer
