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

#include "stylevc/conversion.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <spdlog/spdlog.h>

namespace stylevc {

ConversionResult convert(const AudioWaveform& source, const AudioWaveform& reference, int target_speaker,
                         const RecognizerCheckpoint& recognizer, const GeneratorCheckpoint& generator,
                         const ConversionConfig& config) {
  if (target_speaker < 0 || target_speaker >= generator.num_speakers()) {
    throw Error(ErrorCode::kInvalidInput, "target speaker " + std::to_string(target_speaker) +
                                              " is not in the generator speaker table");
  }
  if (recognizer.inventory.hash() != generator.inventory.hash()) {
    throw Error(ErrorCode::kInvalidInput, "recognizer and generator use different phoneme inventories");
  }
  ConversionResult out;
  const MelSpectrogram source_mel = compute_log_mel(source, config.features);
  const Recognition rec = recognize(utterance_mvn(source_mel.frames), recognizer, config.beam);
  out.phonemes = rec.phonemes;
  out.recognition_timed_out = rec.timed_out;
  if (out.phonemes.empty()) throw Error(ErrorCode::kEmptyResult, "the recognizer produced no phonemes");

  const Matrix encoded = cbhg_encode(out.phonemes, generator);
  const MelSpectrogram reference_mel = compute_log_mel(reference, config.features);
  out.style = gst_encode(reference_mel.frames, generator).embedding;
  out.predicted_durations = predict_rhythm(encoded, out.style, target_speaker, generator);
  out.durations = quantize_durations(out.predicted_durations);
  out.mel = decode_mel(state_expand(encoded, out.durations), out.style, target_speaker, generator);
  out.mel.frame_shift_ms = source_mel.frame_shift_ms;
  out.mel.frame_length_ms = source_mel.frame_length_ms;
  if (config.synthesize_audio) out.wav = invert_mel(out.mel, config.features);
  return out;
}

ReferencePolicy parse_reference_policy(const std::string& name) {
  if (name == "source") return ReferencePolicy::kSource;
  if (name == "fixed") return ReferencePolicy::kFixed;
  throw Error(ErrorCode::kInvalidArgument, "reference policy must be 'source' or 'fixed', got '" + name + "'");
}

void write_conversion_meta(const std::string& path, const std::string& id, const ConversionResult& result,
                           const std::string& speaker, const std::string& reference,
                           const PhonemeInventory& inventory) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "id=" << id << '\n';
  out << "phonemes=" << join_symbols(result.phonemes, inventory) << '\n';
  out << "durations=";
  for (std::size_t i = 0; i < result.durations.size(); ++i) out << (i ? " " : "") << result.durations.frames[i];
  out << '\n';
  char buf[32];
  out << "predicted_durations=";
  for (std::size_t i = 0; i < result.predicted_durations.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", result.predicted_durations[i]);
    out << (i ? " " : "") << buf;
  }
  out << '\n';
  out << "style=";
  for (Eigen::Index i = 0; i < result.style.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", result.style(i));
    out << (i ? " " : "") << buf;
  }
  out << '\n';
  out << "speaker=" << speaker << '\n';
  out << "reference=" << reference << '\n';
  out << "frames=" << result.mel.frames.rows() << '\n';
  out << "recognition_timed_out=" << (result.recognition_timed_out ? 1 : 0) << '\n';
}

std::vector<BatchRow> batch_convert(const BatchRequest& request, const RecognizerCheckpoint& recognizer,
                                    const GeneratorCheckpoint& generator, const ConversionConfig& config) {
  if (request.records.empty()) throw Error(ErrorCode::kInvalidInput, "empty conversion manifest");
  const auto speaker = generator.find_speaker(request.target_speaker);
  if (!speaker) throw Error(ErrorCode::kInvalidInput, "unknown target speaker " + request.target_speaker);
  AudioWaveform fixed;
  if (request.policy == ReferencePolicy::kFixed) {
    if (request.fixed_reference.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "the fixed reference policy needs a reference utterance");
    }
    fixed = read_wav(request.fixed_reference, config.features.sample_rate);
  }
  std::filesystem::create_directories(request.out_dir);

  std::vector<BatchRow> rows;
  for (const auto& record : request.records) {
    const auto start = std::chrono::steady_clock::now();
    BatchRow row;
    row.id = record.id;
    row.reference = request.policy == ReferencePolicy::kSource ? record.id : request.fixed_reference;
    try {
      const AudioWaveform source =
          read_wav(resolve_audio_path(request.manifest_path, record.audio_path), config.features.sample_rate);
      const AudioWaveform& reference = request.policy == ReferencePolicy::kSource ? source : fixed;
      const ConversionResult result = convert(source, reference, *speaker, recognizer, generator, config);
      const std::string base = request.out_dir + "/" + record.id;
      if (config.synthesize_audio) write_wav(base + ".wav", result.wav);
      write_mel(base + ".mel", result.mel);
      write_conversion_meta(base + ".meta", record.id, result, request.target_speaker, row.reference,
                            generator.inventory);
      row.status = "ok";
      row.output_frames = result.mel.frames.rows();
      if (result.recognition_timed_out) row.message = "recognition timed out; partial hypothesis used";
    } catch (const std::exception& e) {
      row.status = "failed";
      row.message = e.what();
      spdlog::warn("conversion of {} failed: {}", record.id, e.what());
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }

  std::ofstream report(request.out_dir + "/report.csv");
  if (!report) throw Error(ErrorCode::kIo, "cannot write " + request.out_dir + "/report.csv");
  report << "id,status,output_frames,wall_time_s,reference,message\n";
  for (const auto& r : rows) {
    std::string message = r.message;
    for (char& c : message) {
      if (c == ',' || c == '\n') c = ';';
    }
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.6f", r.wall_seconds);
    report << r.id << ',' << r.status << ',' << r.output_frames << ',' << wall << ',' << r.reference << ','
           << message << '\n';
  }
  return rows;
}

}  // namespace stylevc
