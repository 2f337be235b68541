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

#ifndef STYLEVC_RECOGNIZER_H_
#define STYLEVC_RECOGNIZER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/flat_config.h"
#include "stylevc/nn.h"
#include "stylevc/optim.h"

// Phoneme recognizer: conv-pool subsampling frontend, self-attention
// encoder, CTC head and attention decoder trained on
//   loss = lambda * ctc_term + (1 - lambda) * att_term.
namespace stylevc {

struct RecognizerConfig {
  Scalar lambda = 0.3;
  int encoder_blocks = 12;
  int decoder_blocks = 6;
  int attention_heads = 8;
  int model_width = 256;
  int ffn_width = 1024;
  int subsample_factor = 4;  // power of two; one conv-pool stage per halving
  int frontend_channels = 64;
  int n_mels = 80;
  int beam = 4;

  void validate() const;
  int frontend_stages() const;
  FlatConfig to_flat() const;
  static RecognizerConfig from_flat(const FlatConfig& flat);
};

struct TransformerFeedForward {
  nn::Linear expand;
  nn::Linear contract;

  TransformerFeedForward() = default;
  TransformerFeedForward(int width, int hidden, nn::Rng& rng) : expand(width, hidden, rng), contract(hidden, width, rng) {}
  nn::Var operator()(nn::Tape& tape, nn::Var x) const;
  void collect(const std::string& prefix, nn::ParamList& out);
};

struct EncoderBlock {
  nn::LayerNorm attn_norm;
  nn::MultiHeadAttention self_attn;
  nn::LayerNorm ffn_norm;
  TransformerFeedForward ffn;

  EncoderBlock() = default;
  EncoderBlock(const RecognizerConfig& cfg, nn::Rng& rng);
  nn::Var operator()(nn::Tape& tape, nn::Var x) const;
  void collect(const std::string& prefix, nn::ParamList& out);
};

struct DecoderBlock {
  nn::LayerNorm self_norm;
  nn::MultiHeadAttention self_attn;
  nn::LayerNorm cross_norm;
  nn::MultiHeadAttention cross_attn;
  nn::LayerNorm ffn_norm;
  TransformerFeedForward ffn;

  DecoderBlock() = default;
  DecoderBlock(const RecognizerConfig& cfg, nn::Rng& rng);
  nn::Var operator()(nn::Tape& tape, nn::Var x, nn::Var memory) const;
  void collect(const std::string& prefix, nn::ParamList& out);
};

struct FrontendStage {
  nn::Conv1d first;
  nn::Conv1d second;
};

struct RecognizerCheckpoint {
  RecognizerConfig config;
  PhonemeInventory inventory;
  long long step = 0;

  std::vector<FrontendStage> frontend;
  nn::Linear input_proj;
  std::vector<EncoderBlock> encoder;
  nn::LayerNorm encoder_norm;
  nn::Linear ctc_head;
  nn::Embedding token_embedding;
  std::vector<DecoderBlock> decoder;
  nn::LayerNorm decoder_norm;
  nn::Linear output_head;

  RecognizerCheckpoint() = default;
  RecognizerCheckpoint(const RecognizerConfig& config, const PhonemeInventory& inventory, std::uint64_t seed);

  nn::ParamList parameters();
};

// Encoder states for an utterance-normalized mel (T x n_mels):
// ceil(T / subsample_factor) x model_width.
nn::Var encode(nn::Tape& tape, const Matrix& mel, const RecognizerCheckpoint& ckpt);
Matrix encode(const Matrix& mel, const RecognizerCheckpoint& ckpt);

nn::Var ctc_logits(nn::Tape& tape, nn::Var encoded, const RecognizerCheckpoint& ckpt);
// Next-token logits for every position of `inputs` (which starts with sos).
nn::Var decoder_logits(nn::Tape& tape, nn::Var encoded, const std::vector<int>& inputs,
                       const RecognizerCheckpoint& ckpt);

struct HybridLossVars {
  nn::Var total;
  nn::Var ctc_term;
  nn::Var att_term;
};

struct HybridLoss {
  Scalar total = 0.0;
  Scalar ctc_term = 0.0;
  Scalar att_term = 0.0;
};

// lambda * ctc_term + (1 - lambda) * att_term.
Scalar combine_hybrid(Scalar lambda, Scalar ctc_term, Scalar att_term);

HybridLossVars hybrid_loss(nn::Tape& tape, const Matrix& mel, const PhonemeSequence& phonemes,
                           const RecognizerCheckpoint& ckpt, Scalar lambda);
HybridLoss hybrid_loss(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt,
                       Scalar lambda);

struct RecognizerExample {
  std::string id;
  Matrix features;  // utterance-normalized log-mel
  PhonemeSequence phonemes;
};

struct RecognizerLogRow {
  long long step = 0;
  Scalar total = 0.0;
  Scalar ctc_term = 0.0;
  Scalar att_term = 0.0;
};

struct RecognizerTraining {
  RecognizerCheckpoint checkpoint;
  std::vector<RecognizerLogRow> log;
};

// Throws kInfeasibleAlignment before any update if an example cannot be
// emitted by CTC, kDivergence on a non-finite loss.
RecognizerTraining train_recognizer(const std::vector<RecognizerExample>& dataset, const RecognizerConfig& config,
                                    const PhonemeInventory& inventory, const TrainSchedule& schedule);

// Continues training an existing checkpoint.
RecognizerTraining continue_recognizer(RecognizerCheckpoint checkpoint, const std::vector<RecognizerExample>& dataset,
                                       const TrainSchedule& schedule);

void write_recognizer_log(const std::string& path, const std::vector<RecognizerLogRow>& log);

struct Recognition {
  PhonemeSequence phonemes;
  Scalar score = 0.0;  // joint log score, eos included when complete
  bool timed_out = false;
};

// Joint CTC/attention beam search. beam = 1 is greedy. Hypotheses are
// limited to 2 x encoded length tokens; when none ends in that budget the
// best partial hypothesis is returned with timed_out set.
Recognition recognize(const Matrix& mel, const RecognizerCheckpoint& ckpt, int beam);

// Joint log score of a complete hypothesis (eos appended).
Scalar joint_score(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt);

// Viterbi alignment over the CTC lattice, mapped back to mel frames.
DurationSequence ctc_force_align(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt);

// Encoded-frame ownership of a Viterbi state path: blank frames belong to
// the preceding label, leading blanks to the first label.
std::vector<int> label_counts_from_path(const std::vector<int>& states, std::size_t num_labels);

void save_recognizer(const std::string& dir, RecognizerCheckpoint& ckpt);
// When `expected` is given its hash must match the stored inventory hash.
RecognizerCheckpoint load_recognizer(const std::string& dir, const PhonemeInventory* expected = nullptr);

}  // namespace stylevc

#endif  // STYLEVC_RECOGNIZER_H_
