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

#include "stylevc/dataset.h"

namespace stylevc {

std::vector<LoadedUtterance> load_utterances(const std::vector<UtteranceRecord>& records,
                                             const std::string& manifest_path, const FeatureConfig& features) {
  std::vector<LoadedUtterance> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    LoadedUtterance u;
    u.record = r;
    try {
      u.wav = read_wav(resolve_audio_path(manifest_path, r.audio_path), features.sample_rate);
      u.mel = compute_log_mel(u.wav, features);
    } catch (const Error& e) {
      throw Error(e.code(), r.id + ": " + e.what());
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<LoadedUtterance> toy_utterances(const ToyCorpus& corpus, const FeatureConfig& features) {
  std::vector<LoadedUtterance> out;
  out.reserve(corpus.utterances.size());
  for (const auto& t : corpus.utterances) out.push_back({t.record, t.wav, compute_log_mel(t.wav, features)});
  return out;
}

std::map<std::string, long long> frame_counts(const std::vector<LoadedUtterance>& data) {
  std::map<std::string, long long> out;
  for (const auto& u : data) out[u.record.id] = u.mel.frames.rows();
  return out;
}

std::vector<RecognizerExample> recognizer_examples(const std::vector<LoadedUtterance>& data) {
  std::vector<RecognizerExample> out;
  out.reserve(data.size());
  for (const auto& u : data) out.push_back({u.record.id, utterance_mvn(u.mel.frames), u.record.phonemes});
  return out;
}

std::vector<GeneratorUtterance> generator_utterances(const std::vector<LoadedUtterance>& data) {
  std::vector<GeneratorUtterance> out;
  out.reserve(data.size());
  for (const auto& u : data) out.push_back({u.record.id, u.record.speaker, u.mel.frames, u.record.phonemes});
  return out;
}

}  // namespace stylevc
