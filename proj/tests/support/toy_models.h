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

#ifndef STYLEVC_TESTS_TOY_MODELS_H_
#define STYLEVC_TESTS_TOY_MODELS_H_

#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/generator.h"
#include "stylevc/optim.h"
#include "stylevc/recognizer.h"

// Small model shapes that train on the toy corpus in seconds.
namespace toy {

// Tiny shapes for finite-difference gradient checks (5 mel bins).
stylevc::RecognizerConfig micro_recognizer_config();
stylevc::GeneratorConfig micro_generator_config();

stylevc::RecognizerConfig recognizer_config();
stylevc::GeneratorConfig generator_config();
stylevc::TrainSchedule schedule(long long steps, std::uint64_t seed = 1);

std::vector<stylevc::RecognizerExample> recognizer_examples(const stylevc::ToyCorpus& corpus);
// Ground-truth durations of the corpus go to `alignments`.
std::vector<stylevc::GeneratorUtterance> generator_utterances(const stylevc::ToyCorpus& corpus,
                                                             stylevc::AlignmentTable& alignments);

struct Models {
  stylevc::ToyCorpus corpus;
  stylevc::AlignmentTable alignments;
  stylevc::RecognizerCheckpoint recognizer;
  stylevc::GeneratorCheckpoint generator;
};

Models train_models(const stylevc::ToyCorpusOptions& options, long long asr_steps, long long tts_steps);

double correlation(const stylevc::Matrix& a, const stylevc::Matrix& b);

}  // namespace toy

#endif  // STYLEVC_TESTS_TOY_MODELS_H_
