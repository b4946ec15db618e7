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

#include "sifid/correlation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "csv.h"
#include "sifid/error.h"
#include "sifid/parallel.h"

namespace sifid::correlation {
namespace fs = std::filesystem;

namespace {

void CheckInputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::kTooFewSamples, "correlation needs n >= 3");
  }
}

bool HasTies(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return std::adjacent_find(s.begin(), s.end()) != s.end();
}

double Mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double SampleVariance(std::span<const double> v) {
  if (v.size() < 2) return std::nan("");
  const double m = Mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

double Pcc(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  const double mx = Mean(x);
  const double my = Mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::kZeroVariance, "constant input to PCC");
  }
  // The (n - 1) factors of the sample covariance and deviations cancel.
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> MidRanks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double SroccRankFormula(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  const auto rx = MidRanks(x);
  const auto ry = MidRanks(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double SroccPearsonOnRanks(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  const auto rx = MidRanks(x);
  const auto ry = MidRanks(y);
  return Pcc(rx, ry);
}

double Srocc(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y);
  if (!HasTies(x) && !HasTies(y)) return SroccRankFormula(x, y);
  return SroccPearsonOnRanks(x, y);
}

std::vector<double> ScoreGroups(const encoder::Encoder& enc,
                                const EvaluationSet& set, int jobs,
                                const fid::FrechetOptions& frechet) {
  if (set.groups.empty()) throw Error(ErrorCode::kEmptyTestSet, "no groups");
  std::vector<double> scores(set.groups.size());
  ParallelFor(set.groups.size(), jobs, [&](std::size_t g) {
    scores[g] = fid::ScoreStitched(set.groups[g].reference, set.groups[g].stitched,
                                   enc, 1, frechet);
  });
  return scores;
}

std::vector<double> GroupSubjective(
    const EvaluationSet& set,
    const std::vector<subjective::SubjectiveScore>& scores) {
  if (set.groups.empty()) throw Error(ErrorCode::kEmptyTestSet, "no groups");
  std::map<std::string, double> lookup;
  for (const auto& s : scores) lookup[s.image_id] = s.value;
  std::vector<double> out;
  out.reserve(set.groups.size());
  for (const auto& g : set.groups) {
    if (g.stitched_ids.empty()) {
      throw Error(ErrorCode::kMissingSubjective, "group '" + g.id + "' has no ids");
    }
    double sum = 0.0;
    for (const auto& id : g.stitched_ids) {
      const auto it = lookup.find(id);
      if (it == lookup.end()) {
        throw Error(ErrorCode::kMissingSubjective,
                    "no subjective score for '" + id + "'");
      }
      sum += it->second;
    }
    out.push_back(sum / static_cast<double>(g.stitched_ids.size()));
  }
  return out;
}

CorrelationCurve BuildCurve(const std::string& noise_tag,
                            std::span<const encoder::Encoder> by_epoch,
                            const EvaluationSet& set,
                            const std::vector<subjective::SubjectiveScore>& scores,
                            const CurveOptions& options) {
  if (by_epoch.empty()) {
    throw Error(ErrorCode::kIncompleteCurve, "no encoders to evaluate");
  }
  const auto subjective = GroupSubjective(set, scores);
  CorrelationCurve curve;
  curve.noise_tag = noise_tag;
  curve.pcc.resize(by_epoch.size());
  curve.srocc.resize(by_epoch.size());
  // Parallel across epochs, single-threaded inside each scoring pass.
  ParallelFor(by_epoch.size(), options.jobs, [&](std::size_t e) {
    auto objective = ScoreGroups(by_epoch[e], set, 1, options.frechet);
    for (double& v : objective) v = -v;
    curve.pcc[e] = Pcc(objective, subjective);
    curve.srocc[e] = Srocc(objective, subjective);
  });
  return curve;
}

CorrelationCurve BuildCurve(const trainer::CheckpointSeries& series,
                            const EvaluationSet& set,
                            const std::vector<subjective::SubjectiveScore>& scores,
                            const CurveOptions& options) {
  std::vector<encoder::Encoder> by_epoch;
  by_epoch.reserve(series.checkpoints.size() + 1);
  by_epoch.push_back(series.initial);
  by_epoch.insert(by_epoch.end(), series.checkpoints.begin(), series.checkpoints.end());
  return BuildCurve(series.noise.Tag(), by_epoch, set, scores, options);
}

void WriteCurveCsv(const CorrelationCurve& curve, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "noise_tag,epoch,pcc,srocc\n";
  for (std::size_t e = 0; e < curve.pcc.size(); ++e) {
    out << curve.noise_tag << ',' << e << ',' << internal::FormatDouble(curve.pcc[e]) << ','
        << internal::FormatDouble(curve.srocc[e]) << '\n';
  }
  if (!out) throw Error(ErrorCode::kWriteFailure, path.string());
}

CorrelationCurve ReadCurveCsv(const fs::path& path) {
  const auto rows = internal::ParseCsvText(internal::ReadText(path));
  const std::vector<std::string> header = {"noise_tag", "epoch", "pcc", "srocc"};
  if (rows.empty() || rows[0] != header) {
    throw Error(ErrorCode::kParseError, path.string() + ": bad curve header");
  }
  CorrelationCurve curve;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ":" + std::to_string(r + 1);
    if (row.size() != 4) throw Error(ErrorCode::kParseError, where);
    if (r == 1) curve.noise_tag = row[0];
    if (row[0] != curve.noise_tag) {
      throw Error(ErrorCode::kParseError, where + ": mixed noise tags");
    }
    const double epoch = internal::ParseDouble(row[1], where);
    if (epoch != static_cast<double>(r - 1)) {
      throw Error(ErrorCode::kIncompleteCurve, where + ": epochs must be 0..E");
    }
    curve.pcc.push_back(internal::ParseDouble(row[2], where));
    curve.srocc.push_back(internal::ParseDouble(row[3], where));
  }
  return curve;
}

NoiseVerdict ClassifyNoise(const CorrelationCurve& curve,
                           const ClassifyOptions& options) {
  const int epochs = curve.epochs();
  if (curve.pcc.size() != curve.srocc.size() || epochs < 2) {
    throw Error(ErrorCode::kIncompleteCurve,
                "curve '" + curve.noise_tag + "' needs epochs 0..E with E >= 2");
  }
  std::vector<double> mean(curve.pcc.size());
  for (std::size_t e = 0; e < mean.size(); ++e) {
    mean[e] = 0.5 * (curve.pcc[e] + curve.srocc[e]);
    if (!std::isfinite(mean[e])) {
      throw Error(ErrorCode::kIncompleteCurve,
                  "non-finite value at epoch " + std::to_string(e));
    }
  }
  NoiseVerdict v;
  v.noise_tag = curve.noise_tag;

  // Least-squares slope over epochs 1..E.
  const double n = epochs;
  const double t_mean = (1.0 + n) / 2.0;
  double y_mean = 0.0;
  for (int e = 1; e <= epochs; ++e) y_mean += mean[e];
  y_mean /= n;
  double sty = 0.0, stt = 0.0;
  for (int e = 1; e <= epochs; ++e) {
    sty += (e - t_mean) * (mean[e] - y_mean);
    stt += (e - t_mean) * (e - t_mean);
  }
  v.slope = sty / stt;

  const int tail = std::clamp(options.tail, 1, epochs);
  double tail_mean = 0.0;
  for (int e = epochs - tail + 1; e <= epochs; ++e) tail_mean += mean[e];
  tail_mean /= tail;
  v.final_gain = tail_mean - mean[0];

  std::vector<double> diffs;
  for (int e = 2; e <= epochs; ++e) diffs.push_back(mean[e] - mean[e - 1]);
  const double d_mean = Mean(diffs);
  double acc = 0.0;
  for (double d : diffs) acc += (d - d_mean) * (d - d_mean);
  v.roughness = std::sqrt(acc / static_cast<double>(diffs.size()));

  v.positive = v.slope > 0.0 && v.final_gain > 0.0;
  return v;
}

Selection SelectSiFid(std::span<const CorrelationCurve> curves,
                      const ClassifyOptions& options) {
  std::vector<std::pair<NoiseVerdict, const CorrelationCurve*>> positives;
  for (const auto& c : curves) {
    const NoiseVerdict v = ClassifyNoise(c, options);
    if (v.positive) positives.emplace_back(v, &c);
  }
  if (positives.empty()) {
    throw Error(ErrorCode::kNoPositiveNoise, "no curve classified positive");
  }
  std::sort(positives.begin(), positives.end(), [](const auto& a, const auto& b) {
    if (a.first.final_gain != b.first.final_gain) {
      return a.first.final_gain > b.first.final_gain;
    }
    if (a.first.roughness != b.first.roughness) {
      return a.first.roughness < b.first.roughness;
    }
    return a.first.noise_tag < b.first.noise_tag;
  });
  const auto& [verdict, curve] = positives.front();
  Selection sel;
  sel.noise_tag = verdict.noise_tag;
  sel.verdict = verdict;
  sel.epoch = 1;
  sel.mean_correlation = curve->mean_at(1);
  for (int e = 2; e <= curve->epochs(); ++e) {
    if (curve->mean_at(e) > sel.mean_correlation) {
      sel.mean_correlation = curve->mean_at(e);
      sel.epoch = e;
    }
  }
  sel.checkpoint = trainer::CheckpointFileName(sel.noise_tag, sel.epoch);
  return sel;
}

std::vector<IndicatorReport> CompareIndicators(
    const std::vector<Indicator>& indicators, const Grouping& grouping,
    const ScoreMap& subjective, CompareMode mode) {
  if (grouping.members.empty() || grouping.ids.size() != grouping.members.size()) {
    throw Error(ErrorCode::kEmptyTestSet, "grouping has no groups");
  }
  std::vector<std::vector<std::string>> groups = grouping.members;
  if (mode == CompareMode::kPooled) {
    std::vector<std::string> all;
    for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
    groups = {all};
  }
  auto lookup = [](const ScoreMap& m, const std::string& id,
                   const std::string& what) {
    const auto it = m.find(id);
    if (it == m.end() || !std::isfinite(it->second)) {
      throw Error(ErrorCode::kIncompleteScores,
                  what + " has no finite score for '" + id + "'");
    }
    return it->second;
  };

  std::vector<IndicatorReport> reports;
  for (const auto& ind : indicators) {
    IndicatorReport rep;
    rep.name = ind.name;
    rep.orientation = baselines::OrientationName(ind.orientation);
    const double sign =
        ind.orientation == baselines::Orientation::kLowerBetter ? -1.0 : 1.0;
    for (const auto& members : groups) {
      std::vector<double> obj, subj;
      for (const auto& id : members) {
        obj.push_back(sign * lookup(ind.scores, id, ind.name));
        subj.push_back(lookup(subjective, id, "subjective"));
      }
      try {
        rep.pcc.push_back(Pcc(obj, subj));
        rep.srocc.push_back(Srocc(obj, subj));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kZeroVariance) throw;
        rep.pcc.push_back(0.0);
        rep.srocc.push_back(0.0);
        ++rep.degenerate_groups;
      }
    }
    rep.mean_pcc = Mean(rep.pcc);
    rep.mean_srocc = Mean(rep.srocc);
    rep.var_pcc = SampleVariance(rep.pcc);
    rep.var_srocc = SampleVariance(rep.srocc);
    reports.push_back(std::move(rep));
  }
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    if (a.mean_srocc != b.mean_srocc) return a.mean_srocc > b.mean_srocc;
    if (a.mean_pcc != b.mean_pcc) return a.mean_pcc > b.mean_pcc;
    return a.name < b.name;
  });
  for (std::size_t i = 0; i < reports.size(); ++i) reports[i].rank = static_cast<int>(i) + 1;
  return reports;
}

void MergeExternalScores(const fs::path& csv, std::vector<Indicator>& indicators) {
  const auto rows = internal::ParseCsvText(internal::ReadText(csv));
  const std::vector<std::string> header = {"image_id", "metric_name", "value",
                                           "orientation"};
  if (rows.empty() || rows[0] != header) {
    throw Error(ErrorCode::kParseError,
                csv.string() + ": header must be image_id,metric_name,value,orientation");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = csv.string() + ":" + std::to_string(r + 1);
    if (row.size() != 4) throw Error(ErrorCode::kParseError, where);
    const auto orientation = baselines::ParseOrientation(row[3]);
    auto it = std::find_if(indicators.begin(), indicators.end(),
                           [&](const Indicator& i) { return i.name == row[1]; });
    if (it == indicators.end()) {
      indicators.push_back({row[1], orientation, {}});
      it = indicators.end() - 1;
    } else if (it->orientation != orientation) {
      throw Error(ErrorCode::kParseError, where + ": orientation changed");
    }
    it->scores[row[0]] = internal::ParseDouble(row[2], where);
  }
}

}  // namespace sifid::correlation
