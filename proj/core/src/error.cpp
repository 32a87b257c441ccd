/* Copyright 2026 The zskt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "zskt/error.hpp"

namespace zskt {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kUnknownOp: return "unknown_op";
    case ErrorCode::kNonScalar: return "non_scalar";
    case ErrorCode::kDetached: return "detached";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidSpec: return "invalid_spec";
    case ErrorCode::kNotNormalized: return "not_normalized";
    case ErrorCode::kNanLoss: return "nan_loss";
    case ErrorCode::kNanGradient: return "nan_gradient";
    case ErrorCode::kClassMismatch: return "class_mismatch";
    case ErrorCode::kEmptyDataset: return "empty_dataset";
    case ErrorCode::kSubset: return "subset";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDigestMismatch: return "digest_mismatch";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace zskt
