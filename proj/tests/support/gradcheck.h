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

#ifndef STYLEVC_TESTS_GRADCHECK_H_
#define STYLEVC_TESTS_GRADCHECK_H_

#include <functional>
#include <string>

#include "stylevc/nn.h"

namespace gradcheck {

struct Report {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  long long worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  long long entries_checked = 0;
};

// Compares tape gradients with central differences for every entry of
// every parameter. relative error = |a - n| / max(|a|, |n|, floor).
Report check(const stylevc::nn::ParamList& params, const std::function<stylevc::ag::Var(stylevc::ag::Tape&)>& loss,
             double step = 1e-5, double floor = 1e-4);

}  // namespace gradcheck

#endif  // STYLEVC_TESTS_GRADCHECK_H_
