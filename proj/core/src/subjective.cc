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

#include "sifid/subjective.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.h"
#include "sifid/error.h"

namespace sifid::subjective {
namespace fs = std::filesystem;

std::size_t ScoreTable::present_count() const {
  std::size_t n = 0;
  for (const auto& row : scores) {
    for (const auto& v : row) n += v.has_value();
  }
  return n;
}

std::size_t ScoreTable::missing_count() const {
  return critics.size() * images.size() - present_count();
}

std::size_t ScoreTable::CriticIndex(const std::string& id) {
  for (std::size_t i = 0; i < critics.size(); ++i) {
    if (critics[i] == id) return i;
  }
  critics.push_back(id);
  scores.emplace_back(images.size());
  return critics.size() - 1;
}

std::size_t ScoreTable::ImageIndex(const std::string& id) {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i] == id) return i;
  }
  images.push_back(id);
  for (auto& row : scores) row.emplace_back();
  return images.size() - 1;
}

std::string NormalizationName(Normalization mode) {
  return mode == Normalization::kPerCritic ? "per_critic" : "per_image_literal";
}

Normalization ParseNormalization(const std::string& name) {
  if (name == "per_critic") return Normalization::kPerCritic;
  if (name == "per_image_literal") return Normalization::kPerImageLiteral;
  throw Error(ErrorCode::kConfigInvalid, "unknown normalization '" + name + "'");
}

namespace {

// z-scores the present entries reached through `get`, in place.
template <typename Cell>
void ZScoreGroup(std::vector<Cell*> cells, const std::string& group) {
  if (cells.size() < 2) {
    throw Error(ErrorCode::kTooFewRatings,
                group + " has fewer than 2 ratings");
  }
  double mean = 0.0;
  for (auto* c : cells) mean += **c;
  mean /= static_cast<double>(cells.size());
  double var = 0.0;
  for (auto* c : cells) var += (**c - mean) * (**c - mean);
  const double sd = std::sqrt(var / static_cast<double>(cells.size()));
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::kZeroVariance, group + " gave identical scores");
  }
  for (auto* c : cells) **c = (**c - mean) / sd;
}

}  // namespace

ScoreTable Normalize(const ScoreTable& table, Normalization mode) {
  ScoreTable out = table;
  using Cell = std::optional<double>;
  if (mode == Normalization::kPerCritic) {
    for (std::size_t c = 0; c < out.critics.size(); ++c) {
      std::vector<Cell*> cells;
      for (auto& v : out.scores[c]) {
        if (v) cells.push_back(&v);
      }
      ZScoreGroup(cells, "critic '" + out.critics[c] + "'");
    }
  } else {
    for (std::size_t i = 0; i < out.images.size(); ++i) {
      std::vector<Cell*> cells;
      for (auto& row : out.scores) {
        if (row[i]) cells.push_back(&row[i]);
      }
      ZScoreGroup(cells, "image '" + out.images[i] + "'");
    }
  }
  return out;
}

std::vector<SubjectiveScore> Aggregate(const ScoreTable& normalized) {
  std::vector<SubjectiveScore> out;
  out.reserve(normalized.images.size());
  for (std::size_t i = 0; i < normalized.images.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : normalized.scores) {
      if (row[i]) {
        sum += *row[i];
        ++n;
      }
    }
    if (n == 0) {
      throw Error(ErrorCode::kNoRatingsForImage, normalized.images[i]);
    }
    out.push_back({normalized.images[i], sum / n, n});
  }
  return out;
}

ScoreTable ParseCsv(const std::string& text) {
  const auto rows = internal::ParseCsvText(text);
  if (rows.empty()) throw Error(ErrorCode::kParseError, "empty ratings CSV");
  const std::vector<std::string> expected = {"critic_id", "image_id", "score"};
  if (rows[0] != expected) {
    throw Error(ErrorCode::kParseError,
                "header must be critic_id,image_id,score");
  }
  ScoreTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(r + 1);
    if (row.size() != 3) {
      throw Error(ErrorCode::kParseError, where + ": expected 3 fields");
    }
    if (row[0].empty() || row[1].empty()) {
      throw Error(ErrorCode::kParseError, where + ": empty id");
    }
    const double score = internal::ParseDouble(row[2], where);
    if (!(score >= 0.0 && score <= 100.0)) {
      throw Error(ErrorCode::kScoreOutOfRange,
                  where + ": score " + row[2] + " outside [0, 100]");
    }
    const std::size_t c = table.CriticIndex(row[0]);
    const std::size_t i = table.ImageIndex(row[1]);
    if (table.scores[c][i]) {
      throw Error(ErrorCode::kDuplicateRating,
                  where + ": critic '" + row[0] + "' already rated '" +
                      row[1] + "'");
    }
    table.scores[c][i] = score;
  }
  return table;
}

ScoreTable IngestCsv(const fs::path& path) {
  return ParseCsv(internal::ReadText(path));
}

void WriteScoresCsv(const std::vector<SubjectiveScore>& scores,
                    const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "image_id,subjective_score,n_raters\n";
  for (const auto& s : scores) {
    out << s.image_id << ',' << internal::FormatDouble(s.value) << ',' << s.n_raters << '\n';
  }
  if (!out) throw Error(ErrorCode::kWriteFailure, path.string());
}

std::vector<SubjectiveScore> ReadScoresCsv(const fs::path& path) {
  const auto rows = internal::ParseCsvText(internal::ReadText(path));
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "image_id" ||
      rows[0][1] != "subjective_score") {
    throw Error(ErrorCode::kParseError,
                path.string() + ": header must start image_id,subjective_score");
  }
  std::vector<SubjectiveScore> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ":" + std::to_string(r + 1);
    if (row.size() < 2) throw Error(ErrorCode::kParseError, where);
    SubjectiveScore s;
    s.image_id = row[0];
    s.value = internal::ParseDouble(row[1], where);
    s.n_raters = row.size() > 2 ? static_cast<int>(internal::ParseDouble(row[2], where)) : 1;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sifid::subjective
