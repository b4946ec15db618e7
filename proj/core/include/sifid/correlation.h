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

#ifndef SIFID_CORRELATION_H_
#define SIFID_CORRELATION_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sifid/augment.h"
#include "sifid/baselines.h"
#include "sifid/encoder.h"
#include "sifid/fid.h"
#include "sifid/image.h"
#include "sifid/subjective.h"
#include "sifid/trainer.h"

namespace sifid::correlation {

// Pearson correlation, sample convention. Throws LengthMismatch /
// TooFewSamples (n < 3) / ZeroVariance.
double Pcc(std::span<const double> x, std::span<const double> y);

// 1-based ranks; ties receive the average of the ranks they span.
std::vector<double> MidRanks(std::span<const double> v);

// Spearman correlation: 1 - 6 sum d^2 / (n (n^2 - 1)) when tie-free,
// Pearson correlation of the midranks otherwise.
double Srocc(std::span<const double> x, std::span<const double> y);
// The two routes, exposed separately for cross-checking.
double SroccRankFormula(std::span<const double> x, std::span<const double> y);
double SroccPearsonOnRanks(std::span<const double> x, std::span<const double> y);

// One scoring unit: a reference set and a stitched set whose Frechet
// distance is one objective score. `stitched_ids` name the stitched images
// whose subjective scores are averaged into the group's subjective score.
struct EvalGroup {
  std::string id;
  std::vector<Image> reference;
  std::vector<Image> stitched;
  std::vector<std::string> stitched_ids;
};

struct EvaluationSet {
  std::string grouping;  // recorded in outputs, e.g. "severity"
  std::vector<EvalGroup> groups;
};

struct CorrelationCurve {
  std::string noise_tag;
  // Index = epoch; entry 0 is the untrained (original) indicator.
  std::vector<double> pcc;
  std::vector<double> srocc;

  int epochs() const { return static_cast<int>(pcc.size()) - 1; }
  double mean_at(int epoch) const { return 0.5 * (pcc[epoch] + srocc[epoch]); }
};

struct CurveOptions {
  int jobs = 1;
  fid::FrechetOptions frechet;
};

// Objective scores (squared Frechet distances) of every group.
std::vector<double> ScoreGroups(const encoder::Encoder& enc,
                                const EvaluationSet& set, int jobs = 1,
                                const fid::FrechetOptions& frechet = {});

// Group subjective score = mean of its members' scores. Throws
// MissingSubjective / EmptyTestSet.
std::vector<double> GroupSubjective(
    const EvaluationSet& set,
    const std::vector<subjective::SubjectiveScore>& scores);

// Scores every group with each encoder (index = epoch), negates the
// distances so higher means better, and correlates with subjective scores.
CorrelationCurve BuildCurve(const std::string& noise_tag,
                            std::span<const encoder::Encoder> by_epoch,
                            const EvaluationSet& set,
                            const std::vector<subjective::SubjectiveScore>& scores,
                            const CurveOptions& options = {});
CorrelationCurve BuildCurve(const trainer::CheckpointSeries& series,
                            const EvaluationSet& set,
                            const std::vector<subjective::SubjectiveScore>& scores,
                            const CurveOptions& options = {});

// "noise_tag,epoch,pcc,srocc".
void WriteCurveCsv(const CorrelationCurve& curve, const std::filesystem::path& path);
CorrelationCurve ReadCurveCsv(const std::filesystem::path& path);

struct ClassifyOptions {
  // Epochs averaged for the final gain.
  int tail = 10;
};

struct NoiseVerdict {
  std::string noise_tag;
  bool positive = false;
  double slope = 0.0;       // least-squares slope over epochs 1..E
  double final_gain = 0.0;  // mean(last `tail` epochs) - epoch 0
  double roughness = 0.0;   // std of first differences over epochs 1..E
};

// Works on the per-epoch mean of PCC and SROCC. Positive iff slope > 0 and
// final_gain > 0. Throws IncompleteCurve.
NoiseVerdict ClassifyNoise(const CorrelationCurve& curve,
                           const ClassifyOptions& options = {});

struct Selection {
  std::string noise_tag;
  int epoch = 0;
  double mean_correlation = 0.0;
  std::string checkpoint;  // trainer::CheckpointFileName(noise_tag, epoch)
  NoiseVerdict verdict;
};

// Among positive curves, ranks by final gain (desc), then roughness (asc),
// then tag; picks the checkpoint epoch (>= 1) with the highest mean
// correlation, earliest on ties. Throws NoPositiveNoise.
Selection SelectSiFid(std::span<const CorrelationCurve> curves,
                      const ClassifyOptions& options = {});

// ---------------------------------------------------------- comparison ----

using ScoreMap = std::map<std::string, double>;

struct Indicator {
  std::string name;
  baselines::Orientation orientation = baselines::Orientation::kLowerBetter;
  ScoreMap scores;  // image id -> raw score
};

struct Grouping {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> members;  // image ids per group
};

enum class CompareMode { kPerGroup, kPooled };

struct IndicatorReport {
  std::string name;
  std::string orientation;
  double mean_pcc = 0.0;
  double var_pcc = 0.0;
  double mean_srocc = 0.0;
  double var_srocc = 0.0;
  int rank = 0;
  std::vector<double> pcc;    // per group
  std::vector<double> srocc;  // per group
  // Groups where a score vector was constant; their correlation counts as 0.
  int degenerate_groups = 0;
};

// Orients every indicator (lower-better scores are negated), correlates
// per group against subjective scores and reports mean and sample variance
// across groups, sorted by mean SROCC. Throws IncompleteScores.
std::vector<IndicatorReport> CompareIndicators(
    const std::vector<Indicator>& indicators, const Grouping& grouping,
    const ScoreMap& subjective, CompareMode mode = CompareMode::kPerGroup);

// Merges "image_id,metric_name,value,orientation" rows into `indicators`.
void MergeExternalScores(const std::filesystem::path& csv,
                         std::vector<Indicator>& indicators);

}  // namespace sifid::correlation

#endif  // SIFID_CORRELATION_H_
