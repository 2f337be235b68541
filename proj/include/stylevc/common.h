// Copyright (c) 2026 The stylevc Authors
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

#ifndef STYLEVC_COMMON_H_
#define STYLEVC_COMMON_H_

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace stylevc {

using Scalar = double;

// Sequences are stored time-major: one row per frame / token.
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVectorX = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Scalar>;
using RowVector = RowVectorX<Scalar>;
using Vector = VectorX<Scalar>;

enum class ErrorCode {
  kInvalidInput,
  kInvalidConfig,
  kInvalidArgument,
  kNoVoicing,
  kValidation,
  kAlignment,
  kInfeasibleAlignment,
  kInputTooShort,
  kDecodeTimeout,
  kDivergence,
  kNotFound,
  kProtocol,
  kConflict,
  kEmptyResult,
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stylevc

#endif  // STYLEVC_COMMON_H_
