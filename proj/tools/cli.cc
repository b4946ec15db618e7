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

#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sifid/augment.h"
#include "sifid/baselines.h"
#include "sifid/correlation.h"
#include "sifid/encoder.h"
#include "sifid/fid.h"
#include "sifid/parallel.h"
#include "sifid/rating_service.h"
#include "sifid/rng.h"
#include "sifid/subjective.h"
#include "sifid/synthgen.h"
#include "sifid/trainer.h"

namespace sifid::cli {
namespace fs = std::filesystem;
using baselines::Metric;
using nlohmann::ordered_json;

int ExitCodeFor(ErrorCode code) { return 2 + static_cast<int>(code); }

namespace {

constexpr char kRunRootEnv[] = "SIFID_RUN_ROOT";

struct Common {
  std::string config;
  std::string run_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct DistortArgs {
  std::string input;
  std::vector<std::string> noises;
};

struct SynthArgs {
  std::string sources;
  int count = 10;
  int size = 128;
  double jitter = 3.0;
};

struct TrainArgs {
  std::string data;
  std::string noise = "colorjitter_b0.5_h0.3";
  int epochs = 100;
  int batch = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::string loss_sign = "attract";
  int feature_dim = 64;
  int input_side = 64;
};

struct SubjectiveArgs {
  std::string ratings;
  std::string normalization = "per_critic";
};

struct MetricArgs {
  std::string checkpoint;      // SI-FID encoder
  std::string fid_checkpoint;  // original-FID encoder
  std::string niqe_model;
  std::string niqe_pristine;
  int niqe_patch = 96;
  int tile = 32;
  int stride = 16;
};

struct ScoreArgs {
  std::string bundle;
  std::string reference;
  std::string stitched;
  std::string metric = "sifid";
  MetricArgs metric_args;
};

struct CurvesArgs {
  std::string bundle;
  std::string checkpoints;
  std::vector<std::string> noises;
  bool all_noises = false;
  std::string train_data;
  SubjectiveArgs subjective;
  TrainArgs train;
};

struct CurveInputArgs {
  std::string curves;
  int tail = 10;
  std::string checkpoints;
};

struct CompareArgs {
  std::string bundle;
  std::vector<std::string> metrics = {"mse", "psnr", "ssim", "ag", "sf"};
  std::vector<std::string> external;
  std::string mode = "per_group";
  SubjectiveArgs subjective;
  MetricArgs metric_args;
};

struct ServeArgs {
  std::string bundles;
  std::string log;
  std::string host = "127.0.0.1";
  int port = 8080;
};

// ------------------------------------------------------------ helpers ----

fs::path ResolveRunDir(const Common& common, const std::string& command,
                       const std::string& echo) {
  if (!common.run_dir.empty()) return common.run_dir;
  const char* env = std::getenv(kRunRootEnv);
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
  char hash[9];
  std::snprintf(hash, sizeof(hash), "%08llx",
                static_cast<unsigned long long>(StableHash(command + "\n" + echo) &
                                                0xffffffffULL));
  return root / (command + "-" + hash);
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kWriteFailure, path.string());
}

void WriteJson(const fs::path& path, const ordered_json& j) {
  WriteText(path, j.dump(2) + "\n");
}

void RequireNonEmpty(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(ErrorCode::kConfigInvalid, flag + " is required");
}

void RequirePositive(int value, const std::string& flag) {
  if (value < 1) throw Error(ErrorCode::kConfigInvalid, flag + " must be >= 1");
}

std::vector<subjective::SubjectiveScore> LoadSubjective(
    const SubjectiveArgs& args, const synthgen::Bundle& bundle) {
  if (args.ratings.empty()) return bundle.subjective;
  const auto table = subjective::IngestCsv(args.ratings);
  const auto mode = subjective::ParseNormalization(args.normalization);
  return subjective::Aggregate(subjective::Normalize(table, mode));
}

// Pairs files with the same stem in two directories.
synthgen::Bundle PairedDirs(const fs::path& reference, const fs::path& stitched) {
  std::map<std::string, fs::path> refs;
  for (const auto& p : ListImageFiles(reference)) refs[p.stem().string()] = p;
  synthgen::Bundle b;
  for (const auto& p : ListImageFiles(stitched)) {
    const auto it = refs.find(p.stem().string());
    if (it == refs.end()) continue;
    synthgen::BundleItem item;
    item.image_id = it->first;
    item.source_id = it->first;
    item.reference = LoadImage(it->second);
    item.stitched = LoadImage(p);
    b.items.push_back(std::move(item));
  }
  if (b.items.empty()) {
    throw Error(ErrorCode::kEmptyTestSet,
                "no file names shared by " + reference.string() + " and " +
                    stitched.string());
  }
  for (const auto& item : b.items) b.sources.push_back(item.reference);
  return b;
}

encoder::Encoder LoadEncoderOrInit(const std::string& path, std::uint64_t seed) {
  if (!path.empty()) return encoder::LoadCheckpoint(path).encoder;
  encoder::EncoderConfig cfg;
  cfg.init_seed = seed;
  return encoder::Encoder::Init(cfg);
}

struct MetricContext {
  const MetricArgs& args;
  std::uint64_t seed;
  int jobs;
  std::optional<baselines::NiqeModel> niqe;

  const baselines::NiqeModel& Niqe() {
    if (!niqe) {
      if (!args.niqe_model.empty()) {
        niqe = baselines::LoadNiqeModel(args.niqe_model);
      } else if (!args.niqe_pristine.empty()) {
        baselines::NiqeParams p;
        p.patch_size = args.niqe_patch;
        niqe = baselines::NiqeFit(fs::path(args.niqe_pristine), p);
      } else {
        throw Error(ErrorCode::kConfigInvalid,
                    "niqe needs --niqe-model or --niqe-pristine");
      }
    }
    return *niqe;
  }
};

correlation::ScoreMap ComputeMetric(Metric metric, const synthgen::Bundle& bundle,
                                    MetricContext& ctx) {
  std::optional<encoder::Encoder> enc;
  if (metric == Metric::kFid) enc = LoadEncoderOrInit(ctx.args.fid_checkpoint, ctx.seed);
  if (metric == Metric::kSiFid) {
    RequireNonEmpty(ctx.args.checkpoint, "--checkpoint");
    enc = encoder::LoadCheckpoint(ctx.args.checkpoint).encoder;
  }
  const baselines::NiqeModel* niqe = metric == Metric::kNiqe ? &ctx.Niqe() : nullptr;
  std::vector<double> values(bundle.items.size());
  ParallelFor(bundle.items.size(), ctx.jobs, [&](std::size_t i) {
    const auto& item = bundle.items[i];
    switch (metric) {
      case Metric::kMse: values[i] = baselines::Mse(item.reference, item.stitched); break;
      case Metric::kPsnr: values[i] = baselines::Psnr(item.reference, item.stitched); break;
      case Metric::kSsim: values[i] = baselines::Ssim(item.reference, item.stitched); break;
      case Metric::kAg: values[i] = baselines::AverageGradient(item.stitched); break;
      case Metric::kSf: values[i] = baselines::SpatialFrequency(item.stitched); break;
      case Metric::kNiqe: values[i] = baselines::NiqeScore(item.stitched, *niqe); break;
      case Metric::kFid:
      case Metric::kSiFid:
        values[i] = fid::ScorePairTiles(item.reference, item.stitched, *enc,
                                        ctx.args.tile, ctx.args.stride);
        break;
    }
  });
  correlation::ScoreMap scores;
  for (std::size_t i = 0; i < values.size(); ++i) scores[bundle.items[i].image_id] = values[i];
  return scores;
}

std::string ScoresCsv(const std::vector<correlation::Indicator>& indicators) {
  std::ostringstream out;
  out.precision(17);
  out << "image_id,metric_name,value,orientation\n";
  for (const auto& ind : indicators) {
    for (const auto& [id, v] : ind.scores) {
      out << id << ',' << ind.name << ',' << v << ','
          << baselines::OrientationName(ind.orientation) << '\n';
    }
  }
  return out.str();
}

std::vector<fs::path> CurveFiles(const std::string& dir) {
  RequireNonEmpty(dir, "--curves");
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) return {fs::path(dir)};
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kFileNotFound, dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("curve_", 0) == 0 && e.path().extension() == ".csv") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kFileNotFound, "no curve_*.csv in " + dir);
  return files;
}

std::vector<correlation::CorrelationCurve> LoadCurves(const std::string& dir) {
  std::vector<correlation::CorrelationCurve> curves;
  for (const auto& f : CurveFiles(dir)) curves.push_back(correlation::ReadCurveCsv(f));
  return curves;
}

ordered_json VerdictJson(const correlation::NoiseVerdict& v) {
  return {{"noise_tag", v.noise_tag},   {"positive", v.positive},
          {"slope", v.slope},           {"final_gain", v.final_gain},
          {"roughness", v.roughness}};
}

trainer::TrainConfig MakeTrainConfig(const TrainArgs& a, const Common& common) {
  trainer::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.seed = common.seed;
  cfg.noise = augment::ParseNoiseTag(a.noise);
  cfg.loss_sign = trainer::ParseLossSign(a.loss_sign);
  cfg.encoder.feature_dim = a.feature_dim;
  cfg.encoder.input_side = a.input_side;
  cfg.encoder.init_seed = common.seed;
  cfg.jobs = common.jobs;
  try {
    cfg.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigInvalid, e.what());
  }
  return cfg;
}

void AddTrainOptions(CLI::App* app, TrainArgs& a, bool with_data) {
  if (with_data) app->add_option("--data", a.data, "Directory of training images");
  app->add_option("--noise", a.noise, "Catalog noise tag");
  app->add_option("--epochs", a.epochs, "Training epochs");
  app->add_option("--batch", a.batch, "Batch size");
  app->add_option("--lr", a.lr, "Learning rate");
  app->add_option("--momentum", a.momentum, "SGD momentum");
  app->add_option("--loss-sign", a.loss_sign, "attract or paper_literal");
  app->add_option("--feature-dim", a.feature_dim, "Encoder feature dimension");
  app->add_option("--input-side", a.input_side, "Encoder input side");
}

void AddSubjectiveOptions(CLI::App* app, SubjectiveArgs& a) {
  app->add_option("--ratings", a.ratings,
                  "Raw critic ratings CSV; defaults to the bundle's synthetic scores");
  app->add_option("--normalization", a.normalization, "per_critic or per_image_literal");
}

void AddMetricOptions(CLI::App* app, MetricArgs& a) {
  app->add_option("--checkpoint", a.checkpoint, "SI-FID encoder checkpoint");
  app->add_option("--fid-checkpoint", a.fid_checkpoint,
                  "Original-FID encoder checkpoint (default: freshly initialized)");
  app->add_option("--niqe-model", a.niqe_model, "Saved NIQE model");
  app->add_option("--niqe-pristine", a.niqe_pristine, "Pristine images to fit NIQE");
  app->add_option("--niqe-patch", a.niqe_patch, "NIQE patch size when fitting");
  app->add_option("--tile", a.tile, "Tile side for per-image FID");
  app->add_option("--stride", a.stride, "Tile stride for per-image FID");
}

// ----------------------------------------------------------- commands ----

void RunDistort(const DistortArgs& a, const Common& c, const fs::path& run,
                std::ostream& out) {
  RequireNonEmpty(a.input, "--input");
  std::vector<augment::NoiseSpec> catalog;
  if (a.noises.empty()) {
    catalog = augment::Catalog();
  } else {
    for (const auto& tag : a.noises) catalog.push_back(augment::ParseNoiseTag(tag));
  }
  augment::DistortOptions opts;
  opts.jobs = c.jobs;
  const auto manifest =
      augment::BuildDistortedSet(a.input, catalog, c.seed, run / "distorted", opts);
  out << "distorted " << manifest.size() << " images ("
      << manifest.size() / catalog.size() << " sources x " << catalog.size()
      << " noises) into " << (run / "distorted").string() << "\n";
}

void RunSynth(const SynthArgs& a, const Common& c, const fs::path& run,
              std::ostream& out) {
  std::vector<Image> sources;
  if (!a.sources.empty()) {
    for (const auto& p : ListImageFiles(a.sources)) sources.push_back(LoadImage(p));
  } else {
    RequirePositive(a.count, "--count");
    sources = synthgen::ProceduralSources(a.count, a.size, a.size, c.seed);
  }
  synthgen::LadderOptions opts;
  opts.jitter = a.jitter;
  opts.jobs = c.jobs;
  const auto bundle = synthgen::BuildSeverityLadder(sources, c.seed, opts);
  synthgen::WriteBundle(bundle, run / "bundle");
  out << "bundle: " << bundle.sources.size() << " sources, " << bundle.items.size()
      << " stitched images -> " << (run / "bundle").string() << "\n";
  out << std::left << std::setw(10) << "severity" << std::setw(14) << "misalign_px"
      << "ghost_opacity\n";
  for (int s = synthgen::kMinSeverity; s <= synthgen::kMaxSeverity; ++s) {
    const auto r = synthgen::DistortionRecipe::ForSeverity(s);
    out << std::setw(10) << s << std::setw(14) << r.misalignment << r.ghost_opacity
        << "\n";
  }
}

void RunTrain(const TrainArgs& a, const Common& c, const fs::path& run,
              std::ostream& out) {
  RequireNonEmpty(a.data, "--data");
  const auto cfg = MakeTrainConfig(a, c);
  const auto series = trainer::Train(fs::path(a.data), cfg);
  trainer::WriteSeries(series, run / "checkpoints");
  WriteText(run / "train_config.txt", cfg.Echo());
  out << "noise " << cfg.noise.Tag() << ", " << series.epochs() << " epochs -> "
      << (run / "checkpoints").string() << "\n";
  out << std::left << std::setw(8) << "epoch" << std::setw(16) << "mean_loss"
      << "feature_cov_trace\n";
  for (const auto& row : series.log) {
    out << std::setw(8) << row.epoch << std::setw(16) << row.mean_loss
        << row.feature_covariance_trace << "\n";
  }
}

void RunScore(const ScoreArgs& a, const Common& c, const fs::path& run,
              std::ostream& out) {
  synthgen::Bundle bundle;
  if (!a.bundle.empty()) {
    bundle = synthgen::ReadBundle(a.bundle);
  } else {
    RequireNonEmpty(a.reference, "--bundle or --reference");
    RequireNonEmpty(a.stitched, "--stitched");
    bundle = PairedDirs(a.reference, a.stitched);
  }
  const Metric metric = baselines::ParseMetric(a.metric);
  MetricContext ctx{a.metric_args, c.seed, c.jobs, std::nullopt};
  correlation::Indicator ind{baselines::MetricName(metric),
                             baselines::OrientationOf(metric),
                             ComputeMetric(metric, bundle, ctx)};
  WriteText(run / "scores.csv", ScoresCsv({ind}));

  if (metric == Metric::kFid || metric == Metric::kSiFid) {
    const encoder::Encoder enc =
        metric == Metric::kFid ? LoadEncoderOrInit(a.metric_args.fid_checkpoint, c.seed)
                               : encoder::LoadCheckpoint(a.metric_args.checkpoint).encoder;
    correlation::EvaluationSet set;
    if (!a.bundle.empty()) {
      set = synthgen::SeverityGroups(bundle);
    } else {
      correlation::EvalGroup all;
      all.id = "all";
      for (const auto& item : bundle.items) {
        all.reference.push_back(item.reference);
        all.stitched.push_back(item.stitched);
        all.stitched_ids.push_back(item.image_id);
      }
      set.grouping = "all";
      set.groups.push_back(std::move(all));
    }
    const auto group_scores = correlation::ScoreGroups(enc, set, c.jobs);
    std::ostringstream csv;
    csv.precision(17);
    csv << "group_id,value\n";
    for (std::size_t g = 0; g < group_scores.size(); ++g) {
      csv << set.groups[g].id << ',' << group_scores[g] << '\n';
      out << std::left << std::setw(14) << set.groups[g].id << group_scores[g] << "\n";
    }
    WriteText(run / "group_scores.csv", csv.str());
  }
  out << ind.name << " (" << baselines::OrientationName(ind.orientation) << ") over "
      << ind.scores.size() << " images -> " << (run / "scores.csv").string() << "\n";
  for (const auto& [id, v] : ind.scores) {
    out << "  " << std::left << std::setw(14) << id << v << "\n";
  }
}

void RunCurves(const CurvesArgs& a, const Common& c, const fs::path& run,
               std::ostream& out) {
  RequireNonEmpty(a.bundle, "--bundle");
  std::vector<std::string> tags = a.noises;
  if (a.all_noises) {
    tags.clear();
    for (const auto& spec : augment::Catalog()) tags.push_back(spec.Tag());
  }
  if (tags.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "give --noise TAG or --all-noises");
  }
  if (a.checkpoints.empty() && a.train_data.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "--checkpoints or --train-data is required");
  }
  const auto bundle = synthgen::ReadBundle(a.bundle);
  const auto set = synthgen::SeverityGroups(bundle);
  const auto scores = LoadSubjective(a.subjective, bundle);
  fs::create_directories(run / "curves");

  std::vector<correlation::CorrelationCurve> curves(tags.size());
  // Parallel across noises; each curve is built single-threaded.
  ParallelFor(tags.size(), c.jobs, [&](std::size_t i) {
    const std::string tag = augment::ParseNoiseTag(tags[i]).Tag();
    std::vector<encoder::Encoder> by_epoch;
    const bool have = !a.checkpoints.empty() &&
                      fs::exists(fs::path(a.checkpoints) /
                                 trainer::CheckpointFileName(tag, 0));
    if (have) {
      by_epoch = trainer::LoadSeries(a.checkpoints, tag).by_epoch;
    } else if (!a.train_data.empty()) {
      TrainArgs ta = a.train;
      ta.noise = tag;
      Common single = c;
      single.jobs = 1;
      const auto series = trainer::Train(fs::path(a.train_data), MakeTrainConfig(ta, single));
      trainer::WriteSeries(series, run / "checkpoints");
      by_epoch = trainer::LoadSeries(run / "checkpoints", tag).by_epoch;
    } else {
      throw Error(ErrorCode::kFileNotFound,
                  "no checkpoints for " + tag + " in " + a.checkpoints);
    }
    curves[i] = correlation::BuildCurve(tag, by_epoch, set, scores);
  });
  out << std::left << std::setw(26) << "noise" << std::setw(8) << "epochs"
      << std::setw(12) << "pcc@0" << std::setw(12) << "srocc@0" << std::setw(12)
      << "pcc@E" << "srocc@E\n";
  for (const auto& curve : curves) {
    correlation::WriteCurveCsv(curve, run / "curves" / ("curve_" + curve.noise_tag + ".csv"));
    const int e = curve.epochs();
    out << std::setw(26) << curve.noise_tag << std::setw(8) << e << std::setw(12)
        << curve.pcc[0] << std::setw(12) << curve.srocc[0] << std::setw(12)
        << curve.pcc[e] << curve.srocc[e] << "\n";
  }
}

void RunClassify(const CurveInputArgs& a, const fs::path& run, std::ostream& out) {
  correlation::ClassifyOptions opts;
  opts.tail = a.tail;
  ordered_json verdicts = ordered_json::array();
  out << std::left << std::setw(26) << "noise" << std::setw(10) << "verdict"
      << std::setw(14) << "slope" << std::setw(14) << "final_gain" << "roughness\n";
  for (const auto& curve : LoadCurves(a.curves)) {
    const auto v = correlation::ClassifyNoise(curve, opts);
    verdicts.push_back(VerdictJson(v));
    out << std::setw(26) << v.noise_tag << std::setw(10)
        << (v.positive ? "positive" : "negative") << std::setw(14) << v.slope
        << std::setw(14) << v.final_gain << v.roughness << "\n";
  }
  WriteJson(run / "verdicts.json", verdicts);
}

void RunSelect(const CurveInputArgs& a, const fs::path& run, std::ostream& out) {
  correlation::ClassifyOptions opts;
  opts.tail = a.tail;
  const auto curves = LoadCurves(a.curves);
  const auto sel = correlation::SelectSiFid(curves, opts);
  ordered_json j = {{"noise_tag", sel.noise_tag},
                    {"epoch", sel.epoch},
                    {"mean_correlation", sel.mean_correlation},
                    {"checkpoint", sel.checkpoint},
                    {"verdict", VerdictJson(sel.verdict)}};
  if (!a.checkpoints.empty()) {
    const fs::path src = fs::path(a.checkpoints) / sel.checkpoint;
    if (!fs::exists(src)) throw Error(ErrorCode::kFileNotFound, src.string());
    fs::copy_file(src, run / "si_fid.ckpt", fs::copy_options::overwrite_existing);
    j["copied_to"] = (run / "si_fid.ckpt").string();
  }
  WriteJson(run / "selection.json", j);
  out << "SI-FID: " << sel.noise_tag << " epoch " << sel.epoch
      << " (mean correlation " << sel.mean_correlation << ", checkpoint "
      << sel.checkpoint << ")\n";
}

void RunCompare(const CompareArgs& a, const Common& c, const fs::path& run,
                std::ostream& out) {
  RequireNonEmpty(a.bundle, "--bundle");
  const auto bundle = synthgen::ReadBundle(a.bundle);
  MetricContext ctx{a.metric_args, c.seed, c.jobs, std::nullopt};
  std::vector<correlation::Indicator> indicators;
  std::vector<std::string> metrics = a.metrics;
  if (!a.metric_args.checkpoint.empty() &&
      std::find(metrics.begin(), metrics.end(), "sifid") == metrics.end()) {
    metrics.push_back("sifid");
  }
  for (const auto& name : metrics) {
    const Metric m = baselines::ParseMetric(name);
    indicators.push_back({baselines::MetricName(m), baselines::OrientationOf(m),
                          ComputeMetric(m, bundle, ctx)});
  }
  for (const auto& csv : a.external) correlation::MergeExternalScores(csv, indicators);
  const auto subjective = synthgen::SubjectiveMap(LoadSubjective(a.subjective, bundle));
  const auto grouping = synthgen::SourceGrouping(bundle);
  correlation::CompareMode mode;
  if (a.mode == "per_group") {
    mode = correlation::CompareMode::kPerGroup;
  } else if (a.mode == "pooled") {
    mode = correlation::CompareMode::kPooled;
  } else {
    throw Error(ErrorCode::kConfigInvalid, "--mode must be per_group or pooled");
  }
  const auto reports = correlation::CompareIndicators(indicators, grouping, subjective, mode);

  ordered_json j = {{"mode", a.mode}, {"grouping", "source"}, {"indicators", ordered_json::array()}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "rank,name,orientation,mean_pcc,var_pcc,mean_srocc,var_srocc\n";
  out << std::left << std::setw(6) << "rank" << std::setw(10) << "metric" << std::setw(14)
      << "orientation" << std::setw(12) << "mean_pcc" << std::setw(12) << "var_pcc"
      << std::setw(12) << "mean_srocc" << "var_srocc\n";
  for (const auto& r : reports) {
    j["indicators"].push_back({{"name", r.name},
                               {"orientation", r.orientation},
                               {"mean_pcc", r.mean_pcc},
                               {"var_pcc", r.var_pcc},
                               {"mean_srocc", r.mean_srocc},
                               {"var_srocc", r.var_srocc},
                               {"rank", r.rank},
                               {"degenerate_groups", r.degenerate_groups},
                               {"pcc", r.pcc},
                               {"srocc", r.srocc}});
    csv << r.rank << ',' << r.name << ',' << r.orientation << ',' << r.mean_pcc << ','
        << r.var_pcc << ',' << r.mean_srocc << ',' << r.var_srocc << '\n';
    out << std::setw(6) << r.rank << std::setw(10) << r.name << std::setw(14)
        << r.orientation << std::setw(12) << r.mean_pcc << std::setw(12) << r.var_pcc
        << std::setw(12) << r.mean_srocc << r.var_srocc << "\n";
  }
  WriteJson(run / "report.json", j);
  WriteText(run / "report.csv", csv.str());
  WriteText(run / "scores.csv", ScoresCsv(indicators));
}

void RunServe(const ServeArgs& a, const fs::path& run, std::ostream& out) {
  RequireNonEmpty(a.bundles, "--bundles");
  const fs::path log = a.log.empty() ? run / "ratings.ndjson" : fs::path(a.log);
  rating::RatingStore store(rating::ImageCatalog::FromRoot(a.bundles), log);
  rating::RatingServer server(store);
  if (!server.Bind(a.host, a.port)) {
    throw Error(ErrorCode::kConfigInvalid,
                "cannot bind " + a.host + ":" + std::to_string(a.port));
  }
  out << "rating service on http://" << a.host << ":" << a.port << " (log "
      << log.string() << ")" << std::endl;
  server.ListenAfterBind();
}

// CLI11 reads --config only before the subcommand; accept it anywhere.
std::vector<std::string> HoistConfig(const std::vector<std::string>& args) {
  std::vector<std::string> front, rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      front = {args[i], args[i + 1]};
      ++i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      front = {args[i]};
    } else {
      rest.push_back(args[i]);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  return front;
}

}  // namespace

int Run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stitched-image quality pipeline", "sifid"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file; flags override it");
  app.allow_config_extras(false);
  app.fallthrough();

  Common common;
  app.add_option("--run-dir", common.run_dir,
                 "Output directory (default: $SIFID_RUN_ROOT or ./runs, plus a config hash)");
  app.add_option("--seed", common.seed, "Master seed");
  app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);

  DistortArgs distort;
  auto* distort_cmd = app.add_subcommand("distort", "Apply the noise catalog to a directory");
  distort_cmd->add_option("--input", distort.input, "Source image directory");
  distort_cmd->add_option("--noises", distort.noises, "Noise tags (default: full catalog)")
      ->delimiter(',');

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a severity-ladder bundle");
  synth_cmd->add_option("--sources", synth.sources, "Source images (default: procedural)");
  synth_cmd->add_option("--count", synth.count, "Procedural source count");
  synth_cmd->add_option("--size", synth.size, "Procedural source side");
  synth_cmd->add_option("--jitter", synth.jitter, "Synthetic subjective jitter amplitude");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune the encoder under one noise");
  AddTrainOptions(train_cmd, train, true);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score a bundle or paired directories");
  score_cmd->add_option("--bundle", score.bundle, "Bundle directory");
  score_cmd->add_option("--reference", score.reference, "Reference image directory");
  score_cmd->add_option("--stitched", score.stitched, "Stitched image directory");
  score_cmd->add_option("--metric", score.metric, "mse|psnr|ssim|ag|sf|niqe|fid|sifid");
  AddMetricOptions(score_cmd, score.metric_args);

  CurvesArgs curves;
  auto* curves_cmd = app.add_subcommand("curves", "Correlation curves over checkpoints");
  curves_cmd->add_option("--bundle", curves.bundle, "Bundle directory");
  curves_cmd->add_option("--checkpoints", curves.checkpoints, "Checkpoint directory");
  curves_cmd->add_option("--noise", curves.noises, "Noise tag (repeatable)");
  curves_cmd->add_flag("--all-noises", curves.all_noises, "Every catalog noise");
  curves_cmd->add_option("--train-data", curves.train_data,
                         "Train missing series from this directory");
  AddSubjectiveOptions(curves_cmd, curves.subjective);
  curves_cmd->add_option("--epochs", curves.train.epochs, "Epochs when training");
  curves_cmd->add_option("--batch", curves.train.batch, "Batch size when training");
  curves_cmd->add_option("--lr", curves.train.lr, "Learning rate when training");
  curves_cmd->add_option("--loss-sign", curves.train.loss_sign, "Loss sign when training");

  CurveInputArgs classify;
  auto* classify_cmd = app.add_subcommand("classify", "Label each curve positive or negative");
  classify_cmd->add_option("--curves", classify.curves, "Curve directory or file");
  classify_cmd->add_option("--tail", classify.tail, "Epochs averaged for the final gain");

  CurveInputArgs select;
  auto* select_cmd = app.add_subcommand("select", "Pick the SI-FID checkpoint");
  select_cmd->add_option("--curves", select.curves, "Curve directory");
  select_cmd->add_option("--tail", select.tail, "Epochs averaged for the final gain");
  select_cmd->add_option("--checkpoints", select.checkpoints,
                         "Copy the chosen checkpoint from here");

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Rank indicators against subjective scores");
  compare_cmd->add_option("--bundle", compare.bundle, "Bundle directory");
  compare_cmd->add_option("--metrics", compare.metrics, "Built-in metrics")->delimiter(',');
  compare_cmd->add_option("--external", compare.external,
                          "image_id,metric_name,value,orientation CSV (repeatable)");
  compare_cmd->add_option("--mode", compare.mode, "per_group or pooled");
  AddSubjectiveOptions(compare_cmd, compare.subjective);
  AddMetricOptions(compare_cmd, compare.metric_args);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("rate-serve", "Serve the rating HTTP API");
  serve_cmd->add_option("--bundles", serve.bundles, "Directory of bundles");
  serve_cmd->add_option("--log", serve.log, "Score log (default: run dir)");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port");

  std::vector<std::string> args = HoistConfig(raw_args);
  std::vector<std::string> commands;
  for (const CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    commands.push_back(sub->get_name());
  }
  const bool has_command = std::any_of(args.begin(), args.end(), [&](const std::string& s) {
    return std::find(commands.begin(), commands.end(), s) != commands.end();
  });
  const bool wants_help = std::any_of(args.begin(), args.end(), [](const std::string& s) {
    return s == "--help" || s == "-h";
  });
  if (!has_command && !wants_help) {
    const std::string given = args.empty() ? std::string() : args.back();
    err << ErrorCodeName(ErrorCode::kUnknownCommand) << ": "
        << (given.empty() ? "no command given" : "unknown command '" + given + "'")
        << "\n"
        << app.help();
    return ExitCodeFor(ErrorCode::kUnknownCommand);
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << ErrorCodeName(ErrorCode::kConfigInvalid) << ": " << e.what() << "\n";
    return ExitCodeFor(ErrorCode::kConfigInvalid);
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    const std::string echo = app.config_to_str(true, false);
    const fs::path run = ResolveRunDir(common, name, echo);
    fs::create_directories(run);
    WriteText(run / "config.toml", echo);
    WriteJson(run / "run.json", {{"command", name},
                                 {"seed", common.seed},
                                 {"jobs", common.jobs},
                                 {"config", "config.toml"}});
    if (name == "distort") RunDistort(distort, common, run, out);
    if (name == "synth") RunSynth(synth, common, run, out);
    if (name == "train") RunTrain(train, common, run, out);
    if (name == "score") RunScore(score, common, run, out);
    if (name == "curves") RunCurves(curves, common, run, out);
    if (name == "classify") RunClassify(classify, run, out);
    if (name == "select") RunSelect(select, run, out);
    if (name == "compare") RunCompare(compare, common, run, out);
    if (name == "rate-serve") RunServe(serve, run, out);
    out << "run directory: " << run.string() << "\n";
  } catch (const Error& e) {
    err << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    err << ErrorCodeName(ErrorCode::kWriteFailure) << ": " << e.what() << "\n";
    return ExitCodeFor(ErrorCode::kWriteFailure);
  }
  return 0;
}

}  // namespace sifid::cli
