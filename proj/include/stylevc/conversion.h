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

#ifndef STYLEVC_CONVERSION_H_
#define STYLEVC_CONVERSION_H_

#include <string>
#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/features.h"
#include "stylevc/generator.h"
#include "stylevc/recognizer.h"

namespace stylevc {

struct ConversionConfig {
  FeatureConfig features;
  int beam = 4;
  bool synthesize_audio = true;  // run Griffin-Lim on the generated mel
};

struct ConversionResult {
  PhonemeSequence phonemes;
  bool recognition_timed_out = false;
  RowVector style;
  std::vector<Scalar> predicted_durations;
  DurationSequence durations;
  MelSpectrogram mel;
  AudioWaveform wav;
};

// source -> mvn(log-mel) -> recognize -> cbhg; reference -> log-mel -> gst;
// rhythm -> quantize -> state expansion -> free-running decode -> inversion.
// Pass the source as reference for style transfer.
ConversionResult convert(const AudioWaveform& source, const AudioWaveform& reference, int target_speaker,
                         const RecognizerCheckpoint& recognizer, const GeneratorCheckpoint& generator,
                         const ConversionConfig& config);

enum class ReferencePolicy { kSource, kFixed };

ReferencePolicy parse_reference_policy(const std::string& name);

struct BatchRequest {
  std::vector<UtteranceRecord> records;
  std::string manifest_path;  // relative audio paths resolve against its directory
  ReferencePolicy policy = ReferencePolicy::kSource;
  std::string fixed_reference;  // audio path, required for kFixed
  std::string target_speaker;
  std::string out_dir;
};

struct BatchRow {
  std::string id;
  std::string status;  // "ok" or "failed"
  long long output_frames = 0;
  double wall_seconds = 0.0;
  std::string reference;
  std::string message;
};

// Writes <id>.wav, <id>.mel and <id>.meta per record plus report.csv.
// Per-utterance failures are recorded in the report, not thrown.
std::vector<BatchRow> batch_convert(const BatchRequest& request, const RecognizerCheckpoint& recognizer,
                                    const GeneratorCheckpoint& generator, const ConversionConfig& config);

void write_conversion_meta(const std::string& path, const std::string& id, const ConversionResult& result,
                           const std::string& speaker, const std::string& reference,
                           const PhonemeInventory& inventory);

}  // namespace stylevc

#endif  // STYLEVC_CONVERSION_H_
