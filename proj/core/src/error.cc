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

#include "sifid/error.h"

namespace sifid {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptData: return "CorruptData";
    case ErrorCode::kWriteFailure: return "WriteFailure";
    case ErrorCode::kZeroDimension: return "ZeroDimension";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEvenKernel: return "EvenKernel";
    case ErrorCode::kKernelLargerThanImage: return "KernelLargerThanImage";
    case ErrorCode::kHueOutOfRange: return "HueOutOfRange";
    case ErrorCode::kEmptyInputDir: return "EmptyInputDir";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kFormatMismatch: return "FormatMismatch";
    case ErrorCode::kDimensionHeaderInvalid: return "DimensionHeaderInvalid";
    case ErrorCode::kEmptyTrainDir: return "EmptyTrainDir";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kNonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kEigenFailure: return "EigenFailure";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kTooFewPristine: return "TooFewPristine";
    case ErrorCode::kNoQualifyingPatches: return "NoQualifyingPatches";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kTooFewRatings: return "TooFewRatings";
    case ErrorCode::kNoRatingsForImage: return "NoRatingsForImage";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateRating: return "DuplicateRating";
    case ErrorCode::kScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::kMissingSubjective: return "MissingSubjective";
    case ErrorCode::kEmptyTestSet: return "EmptyTestSet";
    case ErrorCode::kIncompleteCurve: return "IncompleteCurve";
    case ErrorCode::kNoPositiveNoise: return "NoPositiveNoise";
    case ErrorCode::kIncompleteScores: return "IncompleteScores";
    case ErrorCode::kDegenerateQuad: return "DegenerateQuad";
    case ErrorCode::kSourceTooSmall: return "SourceTooSmall";
    case ErrorCode::kTooFewSources: return "TooFewSources";
    case ErrorCode::kUnknownCommand: return "UnknownCommand";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kDuplicateSession: return "DuplicateSession";
    case ErrorCode::kUnknownBundle: return "UnknownBundle";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kOutOfOrderSubmission: return "OutOfOrderSubmission";
    case ErrorCode::kSessionComplete: return "SessionComplete";
    case ErrorCode::kNothingToExport: return "NothingToExport";
  }
  return "Unknown";
}

}  // namespace sifid
