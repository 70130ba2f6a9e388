// Copyright 2026 The SESS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sess {

/// Every failure the library reports carries one of these codes. The CLI
/// maps the code's category onto its process exit status.
enum class ErrorCode {
  // corpus
  MalformedLine,
  DuplicateId,
  EmptyPool,
  MissingId,
  DimMismatch,
  NonFiniteValue,
  // similarity
  ZeroNormVector,
  EmptyTokenization,
  SizeMismatch,
  AlphaOutOfRange,
  MalformedCache,
  // confidence
  NoProbabilityFound,
  UnparseableProbability,
  EmptyAnswerTokens,
  IncompleteCoverage,
  LambdaOutOfRange,
  InvalidConfidence,
  // objectives / selection
  IndexOutOfRange,
  AlreadySelected,
  BudgetExceedsPool,
  InvalidConfig,
  // oracle
  InstanceTooLarge,
  // simharness
  EmptySubset,
  InvalidArgument,
  // scorer client
  MissingAnswer,
  UnsupportedEndpoint,
  HttpError,
  // cli
  MissingInput,
  Io,
};

enum class ErrorCategory { Usage, Data, Network };

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroNormVector: return "ZeroNormVector";
    case ErrorCode::EmptyTokenization: return "EmptyTokenization";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::MalformedCache: return "MalformedCache";
    case ErrorCode::NoProbabilityFound: return "NoProbabilityFound";
    case ErrorCode::UnparseableProbability: return "UnparseableProbability";
    case ErrorCode::EmptyAnswerTokens: return "EmptyAnswerTokens";
    case ErrorCode::IncompleteCoverage: return "IncompleteCoverage";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::InvalidConfidence: return "InvalidConfidence";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::AlreadySelected: return "AlreadySelected";
    case ErrorCode::BudgetExceedsPool: return "BudgetExceedsPool";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingAnswer: return "MissingAnswer";
    case ErrorCode::UnsupportedEndpoint: return "UnsupportedEndpoint";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::AlphaOutOfRange:
    case ErrorCode::LambdaOutOfRange:
    case ErrorCode::BudgetExceedsPool:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InstanceTooLarge:
    case ErrorCode::MissingInput:
      return ErrorCategory::Usage;
    case ErrorCode::UnsupportedEndpoint:
    case ErrorCode::HttpError:
      return ErrorCategory::Network;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }
  /// The offending id, line number or value, without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace sess
