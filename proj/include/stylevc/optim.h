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

#ifndef STYLEVC_OPTIM_H_
#define STYLEVC_OPTIM_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stylevc/flat_config.h"
#include "stylevc/nn.h"

namespace stylevc {

// Training schedule shared by recognizer and generator training.
// Learning rate ramps linearly for `warmup_steps`, then decays as
// peak * sqrt(warmup / step).
struct TrainSchedule {
  long long steps = 1000;
  int batch_size = 1;
  Scalar peak_lr = 1e-3;
  long long warmup_steps = 100;
  Scalar clip_norm = 5.0;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.98;
  Scalar adam_eps = 1e-9;
  std::uint64_t seed = 1;

  Scalar learning_rate(long long step) const;

  FlatConfig to_flat() const;
  static TrainSchedule from_flat(const FlatConfig& flat);
};

class Adam {
 public:
  explicit Adam(const TrainSchedule& schedule) : beta1_(schedule.adam_beta1), beta2_(schedule.adam_beta2), eps_(schedule.adam_eps) {}

  void step(const nn::ParamList& params, const std::vector<Matrix>& grads, Scalar lr);
  long long steps_taken() const { return t_; }

 private:
  Scalar beta1_;
  Scalar beta2_;
  Scalar eps_;
  long long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

std::vector<Matrix> zero_gradients(const nn::ParamList& params);

// Adds tape gradients of every parameter into `grads`.
void accumulate_gradients(const ag::Tape& tape, const nn::ParamList& params, std::vector<Matrix>& grads);

// Global L2 norm clipping; returns the norm before clipping.
Scalar clip_gradients(std::vector<Matrix>& grads, Scalar max_norm);

// One example's loss: the optimized total plus reported components.
struct StepLoss {
  ag::Var total;
  std::vector<ag::Var> terms;
};

struct StepRecord {
  long long step = 0;
  Scalar total = 0.0;
  std::vector<Scalar> terms;  // batch means, same order as StepLoss::terms
};

// Mini-batch Adam over `params`. Examples are drawn without replacement in
// reshuffled epochs; `step_counter` drives the learning-rate schedule and is
// advanced once per update. `describe(i)` names example i in diagnostics.
// Throws kDivergence on a non-finite loss.
std::vector<StepRecord> run_training(const nn::ParamList& params, const TrainSchedule& schedule,
                                     std::size_t dataset_size, long long& step_counter,
                                     const std::function<StepLoss(ag::Tape&, std::size_t)>& loss,
                                     const std::function<std::string(std::size_t)>& describe);

// CSV with header "step,total,<term names>" and %.17g values.
void write_training_log(const std::string& path, const std::vector<std::string>& term_names,
                        const std::vector<StepRecord>& log);

// Binary parameter archive: "STVCPAR1", uint32 count, then per parameter
// uint32 name length, name bytes, uint32 rows, uint32 cols, float64 row-major.
void save_parameters(const std::string& path, const nn::ParamList& params);
// Every parameter in `params` must be present with a matching shape.
void load_parameters(const std::string& path, const nn::ParamList& params);

}  // namespace stylevc

#endif  // STYLEVC_OPTIM_H_
