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

#include "stylevc/recognizer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <spdlog/spdlog.h>

#include "stylevc/ctc.h"

namespace stylevc {

namespace {

constexpr const char* kRecognizerFormat = "stylevc-recognizer-1";
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

using nn::Tape;
using nn::Var;

Eigen::Index encoded_length(Eigen::Index frames, int factor) { return (frames + factor - 1) / factor; }

void check_tokens(const PhonemeSequence& phonemes, const PhonemeInventory& inventory) {
  for (int t : phonemes.tokens) {
    if (!inventory.is_symbol(t)) {
      throw Error(ErrorCode::kInvalidInput, "token " + std::to_string(t) + " is not a phoneme of the inventory");
    }
  }
}

Matrix log_softmax_rows(const Matrix& x) {
  const Vector max = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - max;
  const Vector lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

}  // namespace

void RecognizerConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  if (encoder_blocks < 0 || decoder_blocks < 0) throw Error(ErrorCode::kInvalidConfig, "block counts must be >= 0");
  if (model_width < 1 || attention_heads < 1 || model_width % attention_heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, "attention_heads must divide model_width");
  }
  if (subsample_factor < 1 || (subsample_factor & (subsample_factor - 1)) != 0) {
    throw Error(ErrorCode::kInvalidConfig, "subsample_factor must be a power of two");
  }
  if (ffn_width < 1 || frontend_channels < 1 || n_mels < 1) {
    throw Error(ErrorCode::kInvalidConfig, "layer widths must be positive");
  }
  if (beam < 1) throw Error(ErrorCode::kInvalidConfig, "beam must be >= 1");
}

int RecognizerConfig::frontend_stages() const {
  int stages = 0;
  for (int f = subsample_factor; f > 1; f /= 2) ++stages;
  return stages;
}

FlatConfig RecognizerConfig::to_flat() const {
  FlatConfig flat;
  flat.set("lambda", lambda);
  flat.set("encoder_blocks", encoder_blocks);
  flat.set("decoder_blocks", decoder_blocks);
  flat.set("attention_heads", attention_heads);
  flat.set("model_width", model_width);
  flat.set("ffn_width", ffn_width);
  flat.set("subsample_factor", subsample_factor);
  flat.set("frontend_channels", frontend_channels);
  flat.set("n_mels", n_mels);
  flat.set("beam", beam);
  return flat;
}

RecognizerConfig RecognizerConfig::from_flat(const FlatConfig& flat) {
  RecognizerConfig c;
  c.lambda = flat.get_double("lambda", c.lambda);
  c.encoder_blocks = static_cast<int>(flat.get_int("encoder_blocks", c.encoder_blocks));
  c.decoder_blocks = static_cast<int>(flat.get_int("decoder_blocks", c.decoder_blocks));
  c.attention_heads = static_cast<int>(flat.get_int("attention_heads", c.attention_heads));
  c.model_width = static_cast<int>(flat.get_int("model_width", c.model_width));
  c.ffn_width = static_cast<int>(flat.get_int("ffn_width", c.ffn_width));
  c.subsample_factor = static_cast<int>(flat.get_int("subsample_factor", c.subsample_factor));
  c.frontend_channels = static_cast<int>(flat.get_int("frontend_channels", c.frontend_channels));
  c.n_mels = static_cast<int>(flat.get_int("n_mels", c.n_mels));
  c.beam = static_cast<int>(flat.get_int("beam", c.beam));
  c.validate();
  return c;
}

Var TransformerFeedForward::operator()(Tape& tape, Var x) const { return contract(tape, ag::relu(expand(tape, x))); }

void TransformerFeedForward::collect(const std::string& prefix, nn::ParamList& out) {
  expand.collect(prefix + ".expand", out);
  contract.collect(prefix + ".contract", out);
}

EncoderBlock::EncoderBlock(const RecognizerConfig& cfg, nn::Rng& rng)
    : attn_norm(cfg.model_width),
      self_attn(cfg.model_width, cfg.attention_heads, rng),
      ffn_norm(cfg.model_width),
      ffn(cfg.model_width, cfg.ffn_width, rng) {}

Var EncoderBlock::operator()(Tape& tape, Var x) const {
  const Var normed = attn_norm(tape, x);
  x = ag::add(x, self_attn(tape, normed, normed));
  return ag::add(x, ffn(tape, ffn_norm(tape, x)));
}

void EncoderBlock::collect(const std::string& prefix, nn::ParamList& out) {
  attn_norm.collect(prefix + ".attn_norm", out);
  self_attn.collect(prefix + ".self_attn", out);
  ffn_norm.collect(prefix + ".ffn_norm", out);
  ffn.collect(prefix + ".ffn", out);
}

DecoderBlock::DecoderBlock(const RecognizerConfig& cfg, nn::Rng& rng)
    : self_norm(cfg.model_width),
      self_attn(cfg.model_width, cfg.attention_heads, rng),
      cross_norm(cfg.model_width),
      cross_attn(cfg.model_width, cfg.attention_heads, rng),
      ffn_norm(cfg.model_width),
      ffn(cfg.model_width, cfg.ffn_width, rng) {}

Var DecoderBlock::operator()(Tape& tape, Var x, Var memory) const {
  const Matrix mask = nn::causal_mask(x.rows());
  const Var normed = self_norm(tape, x);
  x = ag::add(x, self_attn(tape, normed, normed, &mask));
  x = ag::add(x, cross_attn(tape, cross_norm(tape, x), memory));
  return ag::add(x, ffn(tape, ffn_norm(tape, x)));
}

void DecoderBlock::collect(const std::string& prefix, nn::ParamList& out) {
  self_norm.collect(prefix + ".self_norm", out);
  self_attn.collect(prefix + ".self_attn", out);
  cross_norm.collect(prefix + ".cross_norm", out);
  cross_attn.collect(prefix + ".cross_attn", out);
  ffn_norm.collect(prefix + ".ffn_norm", out);
  ffn.collect(prefix + ".ffn", out);
}

RecognizerCheckpoint::RecognizerCheckpoint(const RecognizerConfig& cfg, const PhonemeInventory& inv,
                                           std::uint64_t seed)
    : config(cfg), inventory(inv) {
  config.validate();
  nn::Rng rng(seed);
  int channels = config.n_mels;
  for (int s = 0; s < config.frontend_stages(); ++s) {
    frontend.push_back({nn::Conv1d(channels, config.frontend_channels, 3, rng),
                        nn::Conv1d(config.frontend_channels, config.frontend_channels, 3, rng)});
    channels = config.frontend_channels;
  }
  input_proj = nn::Linear(channels, config.model_width, rng);
  for (int b = 0; b < config.encoder_blocks; ++b) encoder.emplace_back(config, rng);
  encoder_norm = nn::LayerNorm(config.model_width);
  const int vocab = inventory.vocab_size();
  ctc_head = nn::Linear(config.model_width, vocab, rng);
  token_embedding = nn::Embedding(vocab, config.model_width, rng);
  for (int b = 0; b < config.decoder_blocks; ++b) decoder.emplace_back(config, rng);
  decoder_norm = nn::LayerNorm(config.model_width);
  output_head = nn::Linear(config.model_width, vocab, rng);
}

nn::ParamList RecognizerCheckpoint::parameters() {
  nn::ParamList out;
  for (std::size_t s = 0; s < frontend.size(); ++s) {
    frontend[s].first.collect("frontend." + std::to_string(s) + ".conv1", out);
    frontend[s].second.collect("frontend." + std::to_string(s) + ".conv2", out);
  }
  input_proj.collect("input_proj", out);
  for (std::size_t b = 0; b < encoder.size(); ++b) encoder[b].collect("encoder." + std::to_string(b), out);
  encoder_norm.collect("encoder_norm", out);
  ctc_head.collect("ctc_head", out);
  token_embedding.collect("token_embedding", out);
  for (std::size_t b = 0; b < decoder.size(); ++b) decoder[b].collect("decoder." + std::to_string(b), out);
  decoder_norm.collect("decoder_norm", out);
  output_head.collect("output_head", out);
  return out;
}

Var encode(Tape& tape, const Matrix& mel, const RecognizerCheckpoint& ckpt) {
  const auto& cfg = ckpt.config;
  if (mel.cols() != cfg.n_mels) {
    throw Error(ErrorCode::kInvalidInput, "expected " + std::to_string(cfg.n_mels) + " mel bins, got " +
                                              std::to_string(mel.cols()));
  }
  if (mel.rows() < cfg.subsample_factor) {
    throw Error(ErrorCode::kInputTooShort, std::to_string(mel.rows()) + " frames is shorter than the subsample factor " +
                                               std::to_string(cfg.subsample_factor));
  }
  if (!mel.allFinite()) throw Error(ErrorCode::kInvalidInput, "non-finite mel input");
  Var x = tape.constant(mel);
  for (const auto& stage : ckpt.frontend) {
    x = ag::relu(stage.first(tape, x));
    x = ag::relu(stage.second(tape, x));
    x = ag::max_pool_rows(x, 2, 2);
  }
  x = ckpt.input_proj(tape, x);
  x = ag::add(x, tape.constant(nn::sinusoidal_positions(x.rows(), cfg.model_width)));
  for (const auto& block : ckpt.encoder) x = block(tape, x);
  return ckpt.encoder_norm(tape, x);
}

Matrix encode(const Matrix& mel, const RecognizerCheckpoint& ckpt) {
  Tape tape(false);
  return encode(tape, mel, ckpt).value();
}

Var ctc_logits(Tape& tape, Var encoded, const RecognizerCheckpoint& ckpt) { return ckpt.ctc_head(tape, encoded); }

Var decoder_logits(Tape& tape, Var encoded, const std::vector<int>& inputs, const RecognizerCheckpoint& ckpt) {
  Var x = ckpt.token_embedding(tape, inputs);
  x = ag::add(x, tape.constant(nn::sinusoidal_positions(x.rows(), ckpt.config.model_width)));
  for (const auto& block : ckpt.decoder) x = block(tape, x, encoded);
  return ckpt.output_head(tape, ckpt.decoder_norm(tape, x));
}

Scalar combine_hybrid(Scalar lambda, Scalar ctc_term, Scalar att_term) {
  if (lambda == 1.0) return ctc_term;
  if (lambda == 0.0) return att_term;
  return lambda * ctc_term + (1.0 - lambda) * att_term;
}

HybridLossVars hybrid_loss(Tape& tape, const Matrix& mel, const PhonemeSequence& phonemes,
                           const RecognizerCheckpoint& ckpt, Scalar lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must lie in [0, 1]");
  check_tokens(phonemes, ckpt.inventory);
  const Var enc = encode(tape, mel, ckpt);
  if (!ctc::feasible(enc.rows(), phonemes.tokens)) {
    throw Error(ErrorCode::kInfeasibleAlignment,
                std::to_string(phonemes.size()) + " phonemes cannot be emitted from " + std::to_string(enc.rows()) +
                    " encoded frames");
  }
  HybridLossVars out;
  out.ctc_term = ctc::loss(ctc_logits(tape, enc, ckpt), phonemes.tokens, PhonemeInventory::kBlank);
  std::vector<int> inputs{PhonemeInventory::kSos};
  inputs.insert(inputs.end(), phonemes.tokens.begin(), phonemes.tokens.end());
  std::vector<int> targets = phonemes.tokens;
  targets.push_back(PhonemeInventory::kEos);
  out.att_term = ag::cross_entropy_sum(decoder_logits(tape, enc, inputs, ckpt), targets);
  if (lambda == 1.0) {
    out.total = ag::scale(out.ctc_term, 1.0);
  } else if (lambda == 0.0) {
    out.total = ag::scale(out.att_term, 1.0);
  } else {
    out.total = ag::add(ag::scale(out.ctc_term, lambda), ag::scale(out.att_term, 1.0 - lambda));
  }
  return out;
}

HybridLoss hybrid_loss(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt,
                       Scalar lambda) {
  Tape tape(false);
  const auto vars = hybrid_loss(tape, mel, phonemes, ckpt, lambda);
  return {vars.total.item(), vars.ctc_term.item(), vars.att_term.item()};
}

RecognizerTraining train_recognizer(const std::vector<RecognizerExample>& dataset, const RecognizerConfig& config,
                                    const PhonemeInventory& inventory, const TrainSchedule& schedule) {
  return continue_recognizer(RecognizerCheckpoint(config, inventory, schedule.seed), dataset, schedule);
}

RecognizerTraining continue_recognizer(RecognizerCheckpoint checkpoint, const std::vector<RecognizerExample>& dataset,
                                       const TrainSchedule& schedule) {
  if (dataset.empty()) throw Error(ErrorCode::kInvalidInput, "empty recognizer training set");
  const auto& cfg = checkpoint.config;
  for (const auto& ex : dataset) {
    check_tokens(ex.phonemes, checkpoint.inventory);
    if (ex.features.cols() != cfg.n_mels || ex.features.rows() < cfg.subsample_factor) {
      throw Error(ErrorCode::kInvalidInput, ex.id + ": features have the wrong width or are too short");
    }
    const auto enc_len = encoded_length(ex.features.rows(), cfg.subsample_factor);
    if (!ctc::feasible(enc_len, ex.phonemes.tokens)) {
      throw Error(ErrorCode::kInfeasibleAlignment, ex.id + ": " + std::to_string(ex.phonemes.size()) +
                                                       " phonemes cannot be emitted from " + std::to_string(enc_len) +
                                                       " encoded frames");
    }
  }

  RecognizerTraining out;
  const auto records = run_training(
      checkpoint.parameters(), schedule, dataset.size(), checkpoint.step,
      [&](Tape& tape, std::size_t i) {
        const auto l = hybrid_loss(tape, dataset[i].features, dataset[i].phonemes, checkpoint, cfg.lambda);
        return StepLoss{l.total, {l.ctc_term, l.att_term}};
      },
      [&](std::size_t i) { return dataset[i].id; });
  for (const auto& r : records) out.log.push_back({r.step, r.total, r.terms[0], r.terms[1]});
  out.checkpoint = std::move(checkpoint);
  return out;
}

void write_recognizer_log(const std::string& path, const std::vector<RecognizerLogRow>& log) {
  std::vector<StepRecord> records;
  records.reserve(log.size());
  for (const auto& r : log) records.push_back({r.step, r.total, {r.ctc_term, r.att_term}});
  write_training_log(path, {"ctc_term", "att_term"}, records);
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  Scalar att = 0.0;
  ctc::PrefixScorer::State ctc;
  Scalar score = 0.0;
};

Scalar weigh(Scalar lambda, Scalar ctc_score, Scalar att_score) { return combine_hybrid(lambda, ctc_score, att_score); }

RowVector next_token_log_probs(const Matrix& encoded, const std::vector<int>& prefix, const RecognizerCheckpoint& ckpt) {
  Tape tape(false);
  std::vector<int> inputs{PhonemeInventory::kSos};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  const Matrix logits = decoder_logits(tape, tape.constant(encoded), inputs, ckpt).value();
  return log_softmax_rows(logits.bottomRows(1)).row(0);
}

Recognition beam_search(const Matrix& encoded, const Matrix& ctc_log_probs, const RecognizerCheckpoint& ckpt,
                        int beam) {
  const Scalar lambda = ckpt.config.lambda;
  const ctc::PrefixScorer scorer(ctc_log_probs, PhonemeInventory::kBlank);
  const int vocab = ckpt.inventory.vocab_size();
  const auto max_len = static_cast<std::size_t>(2 * encoded.rows());

  Hypothesis root;
  root.ctc = scorer.initial();
  std::vector<Hypothesis> alive{root};
  bool have_final = false;
  Recognition best_final;
  best_final.score = kNegInf;

  for (std::size_t len = 0; len < max_len && !alive.empty(); ++len) {
    std::vector<Hypothesis> grown;
    for (const auto& h : alive) {
      const RowVector lp = next_token_log_probs(encoded, h.tokens, ckpt);
      const Scalar end_score = weigh(lambda, scorer.final_score(h.ctc), h.att + lp(PhonemeInventory::kEos));
      if (!have_final || end_score > best_final.score) {
        have_final = true;
        best_final.phonemes.tokens = h.tokens;
        best_final.score = end_score;
      }
      for (int c = PhonemeInventory::kNumSpecials; c < vocab; ++c) {
        Hypothesis next;
        next.tokens = h.tokens;
        next.tokens.push_back(c);
        next.att = h.att + lp(c);
        next.ctc = scorer.extend(h.ctc, c);
        next.score = weigh(lambda, next.ctc.prefix_score, next.att);
        if (next.score == kNegInf) continue;
        grown.push_back(std::move(next));
      }
    }
    std::stable_sort(grown.begin(), grown.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (grown.size() > static_cast<std::size_t>(beam)) grown.resize(static_cast<std::size_t>(beam));
    alive = std::move(grown);
    // Extensions never raise a score, so a finished hypothesis at least as
    // good as every live one is final.
    if (alive.empty() || best_final.score >= alive.front().score) return best_final;
  }
  if (alive.empty()) return best_final;
  Recognition partial;
  partial.phonemes.tokens = alive.front().tokens;
  partial.score = alive.front().score;
  partial.timed_out = true;
  return partial;
}

}  // namespace

Recognition recognize(const Matrix& mel, const RecognizerCheckpoint& ckpt, int beam) {
  if (beam < 1) throw Error(ErrorCode::kInvalidArgument, "beam must be >= 1");
  Tape tape(false);
  const Var enc = encode(tape, mel, ckpt);
  const Matrix ctc_lp = log_softmax_rows(ctc_logits(tape, enc, ckpt).value());
  Recognition result = beam_search(enc.value(), ctc_lp, ckpt, beam);
  if (beam > 1) {
    const Recognition greedy = beam_search(enc.value(), ctc_lp, ckpt, 1);
    const bool better = (result.timed_out && !greedy.timed_out) ||
                        (result.timed_out == greedy.timed_out && greedy.score > result.score);
    if (better) result = greedy;
  }
  if (result.timed_out) {
    spdlog::warn("recognizer decode reached {} tokens without eos; returning partial hypothesis",
                 2 * enc.rows());
  }
  return result;
}

Scalar joint_score(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt) {
  check_tokens(phonemes, ckpt.inventory);
  Tape tape(false);
  const Var enc = encode(tape, mel, ckpt);
  const Matrix ctc_lp = log_softmax_rows(ctc_logits(tape, enc, ckpt).value());
  const Scalar ctc_score = ctc::feasible(enc.rows(), phonemes.tokens)
                               ? ctc::log_likelihood(ctc_lp, phonemes.tokens, PhonemeInventory::kBlank)
                               : kNegInf;
  std::vector<int> inputs{PhonemeInventory::kSos};
  inputs.insert(inputs.end(), phonemes.tokens.begin(), phonemes.tokens.end());
  const Matrix lp = log_softmax_rows(decoder_logits(tape, enc, inputs, ckpt).value());
  Scalar att = 0.0;
  for (std::size_t i = 0; i <= phonemes.size(); ++i) {
    const int target = i < phonemes.size() ? phonemes.tokens[i] : PhonemeInventory::kEos;
    att += lp(static_cast<Eigen::Index>(i), target);
  }
  return combine_hybrid(ckpt.config.lambda, ctc_score, att);
}

std::vector<int> label_counts_from_path(const std::vector<int>& states, std::size_t num_labels) {
  std::vector<int> counts(num_labels, 0);
  for (int s : states) {
    int label = (s % 2 == 1) ? (s - 1) / 2 : s / 2 - 1;
    label = std::clamp(label, 0, static_cast<int>(num_labels) - 1);
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

DurationSequence ctc_force_align(const Matrix& mel, const PhonemeSequence& phonemes, const RecognizerCheckpoint& ckpt) {
  if (phonemes.empty()) throw Error(ErrorCode::kAlignment, "cannot align an empty phoneme sequence");
  check_tokens(phonemes, ckpt.inventory);
  Tape tape(false);
  const Var enc = encode(tape, mel, ckpt);
  if (!ctc::feasible(enc.rows(), phonemes.tokens)) {
    throw Error(ErrorCode::kAlignment, std::to_string(phonemes.size()) + " phonemes cannot be aligned to " +
                                           std::to_string(enc.rows()) + " encoded frames");
  }
  const Matrix lp = log_softmax_rows(ctc_logits(tape, enc, ckpt).value());
  const auto path = ctc::viterbi(lp, phonemes.tokens, PhonemeInventory::kBlank);
  const auto counts = label_counts_from_path(path.states, phonemes.size());
  const int factor = ckpt.config.subsample_factor;
  DurationSequence out;
  out.frames.reserve(counts.size());
  for (int c : counts) out.frames.push_back(c * factor);
  const long long excess = enc.rows() * factor - mel.rows();
  out.frames.back() -= static_cast<int>(excess);
  return out;
}

void save_recognizer(const std::string& dir, RecognizerCheckpoint& ckpt) {
  std::filesystem::create_directories(dir);
  save_parameters(dir + "/params.bin", ckpt.parameters());
  FlatConfig flat = ckpt.config.to_flat();
  flat.set("format", std::string(kRecognizerFormat));
  flat.set("inventory_hash", ckpt.inventory.hash());
  flat.set("step", ckpt.step);
  flat.save(dir + "/config.txt");
  ckpt.inventory.save(dir + "/inventory.txt");
}

RecognizerCheckpoint load_recognizer(const std::string& dir, const PhonemeInventory* expected) {
  const FlatConfig flat = FlatConfig::load(dir + "/config.txt");
  if (flat.get_string("format", "") != kRecognizerFormat) {
    throw Error(ErrorCode::kInvalidInput, dir + " is not a recognizer checkpoint");
  }
  const PhonemeInventory inventory = PhonemeInventory::load(dir + "/inventory.txt");
  const std::string stored = flat.get_string("inventory_hash", "");
  if (stored != inventory.hash()) {
    throw Error(ErrorCode::kInvalidInput, dir + ": inventory file does not match the recorded hash");
  }
  if (expected && expected->hash() != stored) {
    throw Error(ErrorCode::kInvalidInput, dir + ": checkpoint inventory hash " + stored +
                                              " does not match the supplied inventory " + expected->hash());
  }
  RecognizerCheckpoint ckpt(RecognizerConfig::from_flat(flat), inventory, 0);
  ckpt.step = flat.get_int("step", 0);
  load_parameters(dir + "/params.bin", ckpt.parameters());
  return ckpt;
}

}  // namespace stylevc
