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

#ifndef SIFID_ERROR_H_
#define SIFID_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace sifid {

// Every failure the library reports. The numeric order is stable: the CLI
// derives its process exit codes from it, so append new codes at the end.
enum class ErrorCode {
  kFileNotFound,
  kUnsupportedFormat,
  kCorruptData,
  kWriteFailure,
  kZeroDimension,
  kShapeMismatch,
  kInvalidArgument,
  kEvenKernel,
  kKernelLargerThanImage,
  kHueOutOfRange,
  kEmptyInputDir,
  kInvalidConfig,
  kEmptyBatch,
  kStaleCache,
  kFormatMismatch,
  kDimensionHeaderInvalid,
  kEmptyTrainDir,
  kDivergenceDetected,
  kZeroVector,
  kLengthMismatch,
  kNonFiniteGradient,
  kTooFewSamples,
  kNonFiniteFeature,
  kNotSymmetric,
  kEigenFailure,
  kDimensionMismatch,
  kImageTooSmall,
  kTooFewPristine,
  kNoQualifyingPatches,
  kZeroVariance,
  kTooFewRatings,
  kNoRatingsForImage,
  kParseError,
  kDuplicateRating,
  kScoreOutOfRange,
  kMissingSubjective,
  kEmptyTestSet,
  kIncompleteCurve,
  kNoPositiveNoise,
  kIncompleteScores,
  kDegenerateQuad,
  kSourceTooSmall,
  kTooFewSources,
  kUnknownCommand,
  kConfigInvalid,
  kDuplicateSession,
  kUnknownBundle,
  kUnknownSession,
  kOutOfOrderSubmission,
  kSessionComplete,
  kNothingToExport,
};

// Stable CamelCase name of a code, e.g. "EvenKernel".
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sifid

#endif  // SIFID_ERROR_H_
