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

#ifndef SIFID_SUBJECTIVE_H_
#define SIFID_SUBJECTIVE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sifid::subjective {

// Critic x image matrix of raw scores in [0, 100]; absent ratings are
// std::nullopt.
struct ScoreTable {
  std::vector<std::string> critics;
  std::vector<std::string> images;
  std::vector<std::vector<std::optional<double>>> scores;  // [critic][image]

  std::size_t present_count() const;
  std::size_t missing_count() const;
  // Adds (or finds) a critic / image and returns its index.
  std::size_t CriticIndex(const std::string& id);
  std::size_t ImageIndex(const std::string& id);
};

enum class Normalization {
  // z-score each critic's ratings across the images they rated.
  kPerCritic,
  // z-score each image's ratings across critics (the literal per-image
  // form; averaging afterwards is identically zero).
  kPerImageLiteral,
};

std::string NormalizationName(Normalization mode);
Normalization ParseNormalization(const std::string& name);

// Population mean and standard deviation per group.
// Throws ZeroVariance / TooFewRatings (group with < 2 ratings).
ScoreTable Normalize(const ScoreTable& table,
                     Normalization mode = Normalization::kPerCritic);

struct SubjectiveScore {
  std::string image_id;
  double value = 0.0;
  int n_raters = 0;
};

// Per image, the mean over critics who rated it. Throws NoRatingsForImage.
std::vector<SubjectiveScore> Aggregate(const ScoreTable& normalized);

// Header "critic_id,image_id,score". Throws ParseError / DuplicateRating /
// ScoreOutOfRange.
ScoreTable IngestCsv(const std::filesystem::path& path);
ScoreTable ParseCsv(const std::string& text);

// "image_id,subjective_score,n_raters".
void WriteScoresCsv(const std::vector<SubjectiveScore>& scores,
                    const std::filesystem::path& path);
std::vector<SubjectiveScore> ReadScoresCsv(const std::filesystem::path& path);

}  // namespace sifid::subjective

#endif  // SIFID_SUBJECTIVE_H_
