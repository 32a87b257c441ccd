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

#ifndef ZSKT_ERROR_HPP_
#define ZSKT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace zskt {

// Machine-parsable error classes. The CLI prints `error: <class>: <message>`.
enum class ErrorCode {
  kShapeMismatch,
  kUnknownOp,
  kNonScalar,
  kDetached,
  kInvalidArgument,
  kInvalidSpec,
  kNotNormalized,
  kNanLoss,
  kNanGradient,
  kClassMismatch,
  kEmptyDataset,
  kSubset,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kDigestMismatch,
  kCountMismatch,
  kInvalidConfig,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace zskt

#endif  // ZSKT_ERROR_HPP_
