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

#ifndef STYLEVC_DATASET_H_
#define STYLEVC_DATASET_H_

#include <map>
#include <string>
#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/features.h"
#include "stylevc/generator.h"
#include "stylevc/recognizer.h"

namespace stylevc {

struct LoadedUtterance {
  UtteranceRecord record;
  AudioWaveform wav;
  MelSpectrogram mel;  // raw log-mel
};

// Reads every record's audio (relative paths resolve against the manifest
// directory) and computes its log-mel.
std::vector<LoadedUtterance> load_utterances(const std::vector<UtteranceRecord>& records,
                                             const std::string& manifest_path, const FeatureConfig& features);

std::vector<LoadedUtterance> toy_utterances(const ToyCorpus& corpus, const FeatureConfig& features);

std::map<std::string, long long> frame_counts(const std::vector<LoadedUtterance>& data);

// Utterance-normalized features for the recognizer.
std::vector<RecognizerExample> recognizer_examples(const std::vector<LoadedUtterance>& data);
std::vector<GeneratorUtterance> generator_utterances(const std::vector<LoadedUtterance>& data);

}  // namespace stylevc

#endif  // STYLEVC_DATASET_H_
