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

#include <gtest/gtest.h>

#include "sifid/rng.h"
#include "sifid/trainer.h"
#include "test_util.h"

namespace sifid::correlation {
namespace {

using testing::RandomImage;
using testing::SmoothImage;
using testing::TempDir;
using testing::WriteFileBytes;

// Straightforward two-pass Pearson used as an oracle.
double NaivePearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(PccTest, HandComputed) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 4, 5, 4, 5};
  EXPECT_NEAR(Pcc(x, y), 6.0 / std::sqrt(60.0), 1e-12);
  const std::vector<double> z = {-2, -4, -6, -8, -10};
  EXPECT_NEAR(Pcc(x, z), -1.0, 1e-15);
  EXPECT_GE(Pcc(x, z), -1.0);
}

TEST(PccTest, AffineInvariant) {
  Rng rng(5);
  std::vector<double> x(30), y(30);
  for (auto& v : x) v = rng.Uniform(-1, 1);
  for (auto& v : y) v = rng.Uniform(-1, 1);
  std::vector<double> xs(x.size());
  std::transform(x.begin(), x.end(), xs.begin(), [](double v) { return 7.5 * v - 3.0; });
  EXPECT_NEAR(Pcc(x, y), Pcc(xs, y), 1e-12);
  EXPECT_NEAR(Pcc(x, y), NaivePearson(x, y), 1e-12);
  EXPECT_NEAR(Pcc(x, y), Pcc(y, x), 1e-15);
}

TEST(PccTest, Errors) {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {1, 2};
  EXPECT_SIFID_ERROR(Pcc(a, b), ErrorCode::kLengthMismatch);
  EXPECT_SIFID_ERROR(Pcc(b, b), ErrorCode::kTooFewSamples);
  const std::vector<double> flat = {4, 4, 4};
  EXPECT_SIFID_ERROR(Pcc(a, flat), ErrorCode::kZeroVariance);
  EXPECT_SIFID_ERROR(Srocc(a, flat), ErrorCode::kZeroVariance);
}

TEST(RankTest, MidRanks) {
  const std::vector<double> v = {10, 20, 20, 30, 5};
  EXPECT_EQ(MidRanks(v), (std::vector<double>{2, 3.5, 3.5, 5, 1}));
  const std::vector<double> all = {1, 1, 1};
  EXPECT_EQ(MidRanks(all), (std::vector<double>{2, 2, 2}));
}

TEST(SroccTest, HandComputed) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {1, 3, 2, 5, 4};
  // sum d^2 = 4, n = 5.
  EXPECT_NEAR(Srocc(x, y), 0.8, 1e-15);
  EXPECT_NEAR(SroccRankFormula(x, y), 0.8, 1e-15);
  const std::vector<double> mono = {0.1, 0.5, 9, 10, 1e6};
  EXPECT_NEAR(Srocc(x, mono), 1.0, 1e-15);
}

TEST(SroccTest, FormulaMatchesPearsonOnRanks) {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(20), y(20);
    for (auto& v : x) v = rng.Uniform();
    for (auto& v : y) v = rng.Uniform();
    EXPECT_NEAR(SroccRankFormula(x, y), SroccPearsonOnRanks(x, y), 1e-12);
    EXPECT_NEAR(SroccPearsonOnRanks(x, y), NaivePearson(MidRanks(x), MidRanks(y)), 1e-12);
  }
}

TEST(SroccTest, TiesUsePearsonOnMidranks) {
  const std::vector<double> x = {1, 2, 2, 3, 4, 4};
  const std::vector<double> y = {3, 1, 4, 1, 5, 9};
  EXPECT_NEAR(Srocc(x, y), NaivePearson(MidRanks(x), MidRanks(y)), 1e-12);
}

CorrelationCurve MakeCurve(const std::string& tag, const std::vector<double>& mean) {
  CorrelationCurve c;
  c.noise_tag = tag;
  c.pcc = mean;
  c.srocc = mean;
  return c;
}

TEST(ClassifyTest, LinearCurve) {
  std::vector<double> m;
  for (int e = 0; e <= 10; ++e) m.push_back(0.1 + 0.02 * e);
  const auto v = ClassifyNoise(MakeCurve("up", m), {.tail = 3});
  EXPECT_TRUE(v.positive);
  EXPECT_NEAR(v.slope, 0.02, 1e-12);
  // Mean of epochs 8..10 minus epoch 0.
  EXPECT_NEAR(v.final_gain, 0.02 * 9, 1e-12);
  EXPECT_NEAR(v.roughness, 0.0, 1e-12);
}

TEST(ClassifyTest, NegativeAndFlat) {
  std::vector<double> down, flat(6, 0.4);
  for (int e = 0; e <= 5; ++e) down.push_back(0.5 - 0.05 * e);
  EXPECT_FALSE(ClassifyNoise(MakeCurve("down", down)).positive);
  EXPECT_FALSE(ClassifyNoise(MakeCurve("flat", flat)).positive);
  // Rising slope but ending below the start.
  const std::vector<double> dip = {0.9, 0.1, 0.2, 0.3, 0.4};
  const auto v = ClassifyNoise(MakeCurve("dip", dip), {.tail = 1});
  EXPECT_GT(v.slope, 0.0);
  EXPECT_FALSE(v.positive);
}

TEST(ClassifyTest, RoughnessIsStdOfDifferences) {
  const std::vector<double> m = {0.0, 0.1, 0.4, 0.5, 0.9};
  // Differences over epochs 1..4: 0.3, 0.1, 0.4.
  const double mu = 0.8 / 3;
  const double var = ((0.3 - mu) * (0.3 - mu) + (0.1 - mu) * (0.1 - mu) +
                      (0.4 - mu) * (0.4 - mu)) / 3;
  EXPECT_NEAR(ClassifyNoise(MakeCurve("r", m)).roughness, std::sqrt(var), 1e-12);
}

TEST(ClassifyTest, TooShort) {
  EXPECT_SIFID_ERROR(ClassifyNoise(MakeCurve("x", {0.1, 0.2})), ErrorCode::kIncompleteCurve);
}

TEST(SelectTest, PrefersGainThenSmoothness) {
  std::vector<CorrelationCurve> curves = {
      MakeCurve("neg", {0.5, 0.4, 0.3, 0.2}),
      MakeCurve("small", {0.1, 0.2, 0.25, 0.3}),
      MakeCurve("rough", {0.1, 0.7, 0.3, 0.8}),
      MakeCurve("smooth", {0.1, 0.3, 0.5, 0.8}),
  };
  // rough and smooth have equal tail gain with tail = 1.
  const Selection s = SelectSiFid(curves, {.tail = 1});
  EXPECT_EQ(s.noise_tag, "smooth");
  EXPECT_EQ(s.epoch, 3);
  EXPECT_NEAR(s.mean_correlation, 0.8, 1e-15);
  EXPECT_EQ(s.checkpoint, trainer::CheckpointFileName("smooth", 3));

  std::reverse(curves.begin(), curves.end());
  EXPECT_EQ(SelectSiFid(curves, {.tail = 1}).noise_tag, "smooth");
}

TEST(SelectTest, EarliestBestEpoch) {
  std::vector<CorrelationCurve> curves = {MakeCurve("a", {0.5, 0.6, 0.9, 0.9})};
  EXPECT_EQ(SelectSiFid(curves, {.tail = 2}).epoch, 2);
}

TEST(SelectTest, NoPositive) {
  std::vector<CorrelationCurve> curves = {MakeCurve("a", {0.5, 0.4, 0.3})};
  EXPECT_SIFID_ERROR(SelectSiFid(curves), ErrorCode::kNoPositiveNoise);
}

TEST(CurveCsvTest, RoundTripAndErrors) {
  TempDir dir;
  const auto c = MakeCurve("blur_s1.5", {0.1, -0.25, 1.0 / 3.0});
  WriteCurveCsv(c, dir / "c.csv");
  const auto back = ReadCurveCsv(dir / "c.csv");
  EXPECT_EQ(back.noise_tag, c.noise_tag);
  EXPECT_EQ(back.pcc, c.pcc);
  EXPECT_EQ(back.srocc, c.srocc);

  WriteFileBytes(dir / "gap.csv", "noise_tag,epoch,pcc,srocc\nx,0,0.1,0.1\nx,2,0.1,0.1\n");
  EXPECT_SIFID_ERROR(ReadCurveCsv(dir / "gap.csv"), ErrorCode::kIncompleteCurve);
  WriteFileBytes(dir / "mix.csv", "noise_tag,epoch,pcc,srocc\nx,0,0.1,0.1\ny,1,0.1,0.1\n");
  EXPECT_SIFID_ERROR(ReadCurveCsv(dir / "mix.csv"), ErrorCode::kParseError);
}

EvaluationSet SmallSet(subjective::SubjectiveScore* out, int n_out) {
  EvaluationSet set;
  set.grouping = "test";
  int k = 0;
  for (int g = 0; g < 4; ++g) {
    EvalGroup grp;
    grp.id = "g" + std::to_string(g);
    for (int i = 0; i < 3; ++i) {
      grp.reference.push_back(SmoothImage(16, 16, 3, 100 + g * 10 + i));
      grp.stitched.push_back(RandomImage(16, 16, 3, 200 + g * 10 + i));
      const std::string id = grp.id + "_" + std::to_string(i);
      grp.stitched_ids.push_back(id);
      if (k < n_out) out[k++] = {id, 10.0 * g + i, 1};
    }
    set.groups.push_back(std::move(grp));
  }
  return set;
}

TEST(BuildCurveTest, MatchesManualCorrelation) {
  subjective::SubjectiveScore raw[12];
  const EvaluationSet set = SmallSet(raw, 12);
  const std::vector<subjective::SubjectiveScore> scores(raw, raw + 12);
  encoder::EncoderConfig cfg;
  cfg.input_side = 16;
  cfg.widths = {4, 4};
  cfg.feature_dim = 3;
  std::vector<encoder::Encoder> encs;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    cfg.init_seed = s;
    encs.push_back(encoder::Encoder::Init(cfg));
  }
  const auto curve = BuildCurve("t", encs, set, scores, {.jobs = 2, .frechet = {}});
  ASSERT_EQ(curve.epochs(), 2);
  const auto subj = GroupSubjective(set, scores);
  EXPECT_NEAR(subj[1], 11.0, 1e-12);
  for (int e = 0; e <= 2; ++e) {
    auto obj = ScoreGroups(encs[e], set);
    for (auto& v : obj) v = -v;
    EXPECT_NEAR(curve.pcc[e], Pcc(obj, subj), 1e-12);
    EXPECT_NEAR(curve.srocc[e], Srocc(obj, subj), 1e-12);
  }
  const auto serial = BuildCurve("t", encs, set, scores, {.jobs = 1, .frechet = {}});
  EXPECT_EQ(serial.pcc, curve.pcc);
  EXPECT_EQ(serial.srocc, curve.srocc);
}

TEST(BuildCurveTest, MissingSubjective) {
  subjective::SubjectiveScore raw[12];
  const EvaluationSet set = SmallSet(raw, 11);
  const std::vector<subjective::SubjectiveScore> scores(raw, raw + 11);
  EXPECT_SIFID_ERROR(GroupSubjective(set, scores), ErrorCode::kMissingSubjective);
}

Grouping TwoGroups() {
  Grouping g;
  g.ids = {"a", "b"};
  g.members = {{"a1", "a2", "a3", "a4"}, {"b1", "b2", "b3", "b4"}};
  return g;
}

ScoreMap Subjective() {
  return {{"a1", 10}, {"a2", 20}, {"a3", 30}, {"a4", 40},
          {"b1", 15}, {"b2", 5},  {"b3", 25}, {"b4", 35}};
}

TEST(CompareTest, OrientationAndRanking) {
  const ScoreMap subj = Subjective();
  Indicator good{"good", baselines::Orientation::kHigherBetter, subj};
  Indicator inverted{"inverted", baselines::Orientation::kHigherBetter, {}};
  for (const auto& [id, v] : subj) inverted.scores[id] = -v;
  Indicator dist{"dist", baselines::Orientation::kLowerBetter, {}};
  for (const auto& [id, v] : subj) dist.scores[id] = 100 - v;
  const auto reports = CompareIndicators({inverted, good, dist}, TwoGroups(), subj);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].name, "dist");
  EXPECT_EQ(reports[1].name, "good");
  EXPECT_EQ(reports[2].name, "inverted");
  EXPECT_EQ(reports[2].rank, 3);
  EXPECT_NEAR(reports[0].mean_srocc, 1.0, 1e-12);
  EXPECT_NEAR(reports[0].var_srocc, 0.0, 1e-12);
  EXPECT_NEAR(reports[2].mean_srocc, -1.0, 1e-12);
  EXPECT_EQ(reports[0].orientation, "lower_better");
}

TEST(CompareTest, VarianceAcrossGroups) {
  const ScoreMap subj = Subjective();
  ScoreMap m = {{"a1", 1}, {"a2", 2}, {"a3", 3}, {"a4", 4},
                {"b1", 4}, {"b2", 3}, {"b3", 2}, {"b4", 1}};
  const auto r = CompareIndicators({{"m", baselines::Orientation::kHigherBetter, m}},
                                   TwoGroups(), subj);
  const double s0 = Srocc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 40});
  const double s1 = Srocc(std::vector<double>{4, 3, 2, 1}, std::vector<double>{15, 5, 25, 35});
  EXPECT_NEAR(r[0].mean_srocc, 0.5 * (s0 + s1), 1e-12);
  const double mu = 0.5 * (s0 + s1);
  EXPECT_NEAR(r[0].var_srocc, (s0 - mu) * (s0 - mu) + (s1 - mu) * (s1 - mu), 1e-12);
}

TEST(CompareTest, PooledAndDegenerate) {
  const ScoreMap subj = Subjective();
  ScoreMap m = subj;
  for (const char* id : {"b1", "b2", "b3", "b4"}) m[id] = 7.0;
  const auto per = CompareIndicators({{"m", baselines::Orientation::kHigherBetter, m}},
                                     TwoGroups(), subj);
  EXPECT_EQ(per[0].degenerate_groups, 1);
  EXPECT_EQ(per[0].srocc[1], 0.0);
  const auto pooled = CompareIndicators({{"m", baselines::Orientation::kHigherBetter, m}},
                                        TwoGroups(), subj, CompareMode::kPooled);
  ASSERT_EQ(pooled[0].srocc.size(), 1u);
  EXPECT_EQ(pooled[0].degenerate_groups, 0);
  EXPECT_TRUE(std::isnan(pooled[0].var_srocc));
}

TEST(CompareTest, IncompleteScores) {
  ScoreMap m = Subjective();
  m.erase("b3");
  EXPECT_SIFID_ERROR(CompareIndicators({{"m", baselines::Orientation::kHigherBetter, m}},
                                       TwoGroups(), Subjective()),
                     ErrorCode::kIncompleteScores);
  m = Subjective();
  m["a1"] = std::nan("");
  EXPECT_SIFID_ERROR(CompareIndicators({{"m", baselines::Orientation::kHigherBetter, m}},
                                       TwoGroups(), Subjective()),
                     ErrorCode::kIncompleteScores);
}

TEST(CompareTest, MergeExternal) {
  TempDir dir;
  WriteFileBytes(dir / "ext.csv",
                 "image_id,metric_name,value,orientation\n"
                 "a1,lpips,0.5,lower_better\na2,lpips,0.25,lower_better\n"
                 "a1,mse,3,lower_better\n");
  std::vector<Indicator> inds = {{"mse", baselines::Orientation::kLowerBetter, {{"a2", 1}}}};
  MergeExternalScores(dir / "ext.csv", inds);
  ASSERT_EQ(inds.size(), 2u);
  EXPECT_EQ(inds[0].scores.at("a1"), 3.0);
  EXPECT_EQ(inds[1].name, "lpips");
  EXPECT_EQ(inds[1].scores.at("a2"), 0.25);
  WriteFileBytes(dir / "bad.csv",
                 "image_id,metric_name,value,orientation\na1,mse,3,higher_better\n");
  EXPECT_SIFID_ERROR(MergeExternalScores(dir / "bad.csv", inds), ErrorCode::kParseError);
}

}  // namespace
}  // namespace sifid::correlation
