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

#ifndef STYLEVC_GENERATOR_H_
#define STYLEVC_GENERATOR_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/flat_config.h"
#include "stylevc/nn.h"
#include "stylevc/optim.h"

// Speech generator: CBHG phoneme encoder, GST style encoder, speaker table,
// rhythm module and an autoregressive mel decoder.
//
//   loss = recon_term + rhythm_term
//
// recon_term is the L2 error of the teacher-forced decoder output (before
// and after the postnet) against the normalized mel, rhythm_term the L2
// error of the predicted log-durations against log(durations).
namespace stylevc {

struct GeneratorConfig {
  int n_mels = 80;
  int phoneme_embedding = 64;
  int cbhg_width = 32;  // encoder output is 2 * cbhg_width
  int cbhg_bank_size = 16;
  int cbhg_highway_layers = 4;
  int style_dim = 256;
  int speaker_dim = 256;
  int style_tokens = 10;
  int style_heads = 4;
  int reference_channels = 32;
  int reference_gru = 32;
  int rhythm_hidden = 128;
  int rhythm_layers = 3;
  int decoder_fc = 32;
  int decoder_lstm = 128;
  int decoder_layers = 2;
  int reduction = 2;
  int postnet_channels = 128;
  int postnet_layers = 5;
  int postnet_kernel = 5;

  void validate() const;
  int encoder_dim() const { return 2 * cbhg_width; }
  FlatConfig to_flat() const;
  static GeneratorConfig from_flat(const FlatConfig& flat);
};

struct CbhgEncoder {
  nn::Embedding embedding;
  nn::Linear prenet1;
  nn::Linear prenet2;
  std::vector<nn::Conv1d> bank;
  nn::Conv1d projection1;
  nn::Conv1d projection2;
  std::vector<nn::Highway> highways;
  nn::BiGru gru;

  void collect(const std::string& prefix, nn::ParamList& out);
};

struct GstEncoder {
  nn::Conv1d conv1;
  nn::Conv1d conv2;
  nn::Gru gru;
  nn::Linear query;
  Matrix tokens;  // style_tokens x style_dim
  nn::MultiHeadAttention attention;

  void collect(const std::string& prefix, nn::ParamList& out);
};

struct RhythmModule {
  std::vector<nn::BiLstm> layers;
  nn::Linear head;

  void collect(const std::string& prefix, nn::ParamList& out);
};

struct MelDecoder {
  nn::Linear fc1;
  nn::Linear fc2;
  nn::Linear frame_prenet;
  std::vector<nn::Lstm> lstms;
  nn::Linear frame_proj;
  std::vector<nn::Conv1d> postnet;

  void collect(const std::string& prefix, nn::ParamList& out);
};

struct GeneratorCheckpoint {
  GeneratorConfig config;
  PhonemeInventory inventory;
  std::vector<std::string> speakers;
  long long step = 0;

  CbhgEncoder cbhg;
  GstEncoder gst;
  nn::Embedding speaker_table;
  RhythmModule rhythm;
  MelDecoder decoder;

  // Per-bin statistics used to normalize mel targets; not trained.
  Matrix mel_mean;
  Matrix mel_std;

  GeneratorCheckpoint() = default;
  GeneratorCheckpoint(const GeneratorConfig& config, const PhonemeInventory& inventory,
                      std::vector<std::string> speakers, std::uint64_t seed);

  int num_speakers() const { return static_cast<int>(speakers.size()); }
  std::optional<int> find_speaker(const std::string& name) const;

  // Trainable parameters, grouped by module prefix.
  nn::ParamList parameters();
  // parameters() plus the normalization statistics.
  nn::ParamList archive_entries();

  Matrix normalize(const Matrix& mel) const;
  Matrix denormalize(const Matrix& normalized) const;
};

struct StyleEncoding {
  RowVector embedding;                // 1 x style_dim
  std::vector<RowVector> attention;   // per head, 1 x style_tokens
};

// One encoder vector per phoneme (N x encoder_dim).
nn::Var cbhg_encode(nn::Tape& tape, const PhonemeSequence& phonemes, const GeneratorCheckpoint& ckpt);
Matrix cbhg_encode(const PhonemeSequence& phonemes, const GeneratorCheckpoint& ckpt);

// Style embedding of a raw log-mel. `weights`, when non-null, receives each
// head's attention over the token bank.
nn::Var gst_encode(nn::Tape& tape, const Matrix& mel, const GeneratorCheckpoint& ckpt,
                   std::vector<nn::Var>* weights = nullptr);
StyleEncoding gst_encode(const Matrix& mel, const GeneratorCheckpoint& ckpt);

// Row i of the input repeated durations[i] times.
nn::Var state_expand(nn::Var encoded, const DurationSequence& durations);
Matrix state_expand(const Matrix& encoded, const DurationSequence& durations);

nn::Var speaker_vector(nn::Tape& tape, int speaker, const GeneratorCheckpoint& ckpt);

// Rhythm head output: predicted log-durations, N x 1.
nn::Var predict_log_durations(nn::Tape& tape, nn::Var encoded, nn::Var style, nn::Var speaker,
                              const GeneratorCheckpoint& ckpt);
// Predicted durations in frames (exp of the head output).
std::vector<Scalar> predict_rhythm(const Matrix& encoded, const RowVector& style, int speaker,
                                   const GeneratorCheckpoint& ckpt);

// Round to nearest, then clamp to at least one frame.
DurationSequence quantize_durations(const std::vector<Scalar>& durations);

struct DecodedMel {
  nn::Var before_postnet;  // normalized domain, R_sum x n_mels
  nn::Var after_postnet;
};

// `teacher` (normalized, R_sum x n_mels) enables teacher forcing; without it
// the decoder feeds back its own pre-postnet frames.
DecodedMel decode_mel(nn::Tape& tape, nn::Var expanded, nn::Var style, nn::Var speaker,
                      const GeneratorCheckpoint& ckpt, const Matrix* teacher);
// Raw log-mel output with exactly expanded.rows() frames.
MelSpectrogram decode_mel(const Matrix& expanded, const RowVector& style, int speaker, const GeneratorCheckpoint& ckpt,
                          const std::optional<MelSpectrogram>& teacher = std::nullopt);

struct GeneratorLossVars {
  nn::Var total;
  nn::Var recon_term;
  nn::Var rhythm_term;
};

struct GeneratorLoss {
  Scalar total = 0.0;
  Scalar recon_term = 0.0;
  Scalar rhythm_term = 0.0;
};

GeneratorLossVars generator_loss(nn::Tape& tape, const Matrix& mel, const PhonemeSequence& phonemes,
                                 const DurationSequence& durations, int speaker, const GeneratorCheckpoint& ckpt);
GeneratorLoss generator_loss(const Matrix& mel, const PhonemeSequence& phonemes, const DurationSequence& durations,
                             int speaker, const GeneratorCheckpoint& ckpt);

struct GeneratorUtterance {
  std::string id;
  std::string speaker;
  Matrix mel;  // raw log-mel
  PhonemeSequence phonemes;
};

struct GeneratorLogRow {
  long long step = 0;
  Scalar total = 0.0;
  Scalar recon_term = 0.0;
  Scalar rhythm_term = 0.0;
};

struct GeneratorTraining {
  GeneratorCheckpoint checkpoint;
  std::vector<GeneratorLogRow> log;
};

// Speakers default to the sorted set found in `data`. Normalization
// statistics are estimated from `data`.
GeneratorTraining train_generator(const std::vector<GeneratorUtterance>& data, const AlignmentTable& alignments,
                                  const GeneratorConfig& config, const PhonemeInventory& inventory,
                                  const TrainSchedule& schedule, std::vector<std::string> speakers = {});

// Fine-tunes every parameter on the target data. Speakers missing from the
// table get a new row initialized to the mean of the existing rows.
GeneratorTraining adapt_generator(GeneratorCheckpoint checkpoint, const std::vector<GeneratorUtterance>& data,
                                  const AlignmentTable& alignments, const TrainSchedule& schedule);

void write_generator_log(const std::string& path, const std::vector<GeneratorLogRow>& log);

void save_generator(const std::string& dir, GeneratorCheckpoint& ckpt);
GeneratorCheckpoint load_generator(const std::string& dir, const PhonemeInventory* expected = nullptr);

}  // namespace stylevc

#endif  // STYLEVC_GENERATOR_H_
