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

#include "support/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace gradcheck {

Report check(const stylevc::nn::ParamList& params, const std::function<stylevc::ag::Var(stylevc::ag::Tape&)>& loss,
             double step, double floor) {
  std::vector<stylevc::Matrix> analytic;
  {
    stylevc::ag::Tape tape;
    const auto root = loss(tape);
    tape.backward(root);
    for (const auto& p : params) analytic.push_back(tape.gradient_of(*p.value));
  }
  auto eval = [&] {
    stylevc::ag::Tape tape(false);
    return loss(tape).item();
  };
  Report report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    stylevc::Matrix& value = *params[k].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + step;
      const double up = eval();
      value.data()[i] = saved - step;
      const double down = eval();
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++report.entries_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = params[k].name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace gradcheck
