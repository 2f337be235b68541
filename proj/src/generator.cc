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

#include "stylevc/generator.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

namespace stylevc {

namespace {

constexpr const char* kGeneratorFormat = "stylevc-generator-1";
constexpr Scalar kStdFloor = 1e-4;

using nn::Tape;
using nn::Var;

void check_mel(const Matrix& mel, const GeneratorConfig& cfg) {
  if (mel.rows() < 1) throw Error(ErrorCode::kInvalidInput, "mel has no frames");
  if (mel.cols() != cfg.n_mels) {
    throw Error(ErrorCode::kInvalidInput, "expected " + std::to_string(cfg.n_mels) + " mel bins, got " +
                                              std::to_string(mel.cols()));
  }
  if (!mel.allFinite()) throw Error(ErrorCode::kInvalidInput, "non-finite mel input");
}

void check_speaker(int speaker, const GeneratorCheckpoint& ckpt) {
  if (speaker < 0 || speaker >= ckpt.num_speakers()) {
    throw Error(ErrorCode::kInvalidInput, "speaker index " + std::to_string(speaker) + " outside a table of " +
                                              std::to_string(ckpt.num_speakers()));
  }
}

void check_durations(const DurationSequence& durations, std::size_t phonemes) {
  if (durations.size() != phonemes) {
    throw Error(ErrorCode::kInvalidInput, std::to_string(durations.size()) + " durations for " +
                                              std::to_string(phonemes) + " phonemes");
  }
  for (int d : durations.frames) {
    if (d < 1) throw Error(ErrorCode::kInvalidInput, "durations must be >= 1");
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  const int dims[] = {n_mels,        phoneme_embedding, cbhg_width,     cbhg_bank_size, style_dim,
                      speaker_dim,   style_tokens,      style_heads,    reference_channels,
                      reference_gru, rhythm_hidden,     rhythm_layers,  decoder_fc,     decoder_lstm,
                      decoder_layers, reduction,        postnet_channels, postnet_kernel};
  for (int d : dims) {
    if (d < 1) throw Error(ErrorCode::kInvalidConfig, "generator sizes must be positive");
  }
  if (cbhg_highway_layers < 0 || postnet_layers < 0) {
    throw Error(ErrorCode::kInvalidConfig, "layer counts must be >= 0");
  }
  if (style_dim % style_heads != 0) throw Error(ErrorCode::kInvalidConfig, "style_heads must divide style_dim");
}

FlatConfig GeneratorConfig::to_flat() const {
  FlatConfig flat;
  flat.set("n_mels", n_mels);
  flat.set("phoneme_embedding", phoneme_embedding);
  flat.set("cbhg_width", cbhg_width);
  flat.set("cbhg_bank_size", cbhg_bank_size);
  flat.set("cbhg_highway_layers", cbhg_highway_layers);
  flat.set("style_dim", style_dim);
  flat.set("speaker_dim", speaker_dim);
  flat.set("style_tokens", style_tokens);
  flat.set("style_heads", style_heads);
  flat.set("reference_channels", reference_channels);
  flat.set("reference_gru", reference_gru);
  flat.set("rhythm_hidden", rhythm_hidden);
  flat.set("rhythm_layers", rhythm_layers);
  flat.set("decoder_fc", decoder_fc);
  flat.set("decoder_lstm", decoder_lstm);
  flat.set("decoder_layers", decoder_layers);
  flat.set("reduction", reduction);
  flat.set("postnet_channels", postnet_channels);
  flat.set("postnet_layers", postnet_layers);
  flat.set("postnet_kernel", postnet_kernel);
  return flat;
}

GeneratorConfig GeneratorConfig::from_flat(const FlatConfig& flat) {
  GeneratorConfig c;
  auto get = [&](const char* key, int& field) { field = static_cast<int>(flat.get_int(key, field)); };
  get("n_mels", c.n_mels);
  get("phoneme_embedding", c.phoneme_embedding);
  get("cbhg_width", c.cbhg_width);
  get("cbhg_bank_size", c.cbhg_bank_size);
  get("cbhg_highway_layers", c.cbhg_highway_layers);
  get("style_dim", c.style_dim);
  get("speaker_dim", c.speaker_dim);
  get("style_tokens", c.style_tokens);
  get("style_heads", c.style_heads);
  get("reference_channels", c.reference_channels);
  get("reference_gru", c.reference_gru);
  get("rhythm_hidden", c.rhythm_hidden);
  get("rhythm_layers", c.rhythm_layers);
  get("decoder_fc", c.decoder_fc);
  get("decoder_lstm", c.decoder_lstm);
  get("decoder_layers", c.decoder_layers);
  get("reduction", c.reduction);
  get("postnet_channels", c.postnet_channels);
  get("postnet_layers", c.postnet_layers);
  get("postnet_kernel", c.postnet_kernel);
  c.validate();
  return c;
}

void CbhgEncoder::collect(const std::string& prefix, nn::ParamList& out) {
  embedding.collect(prefix + ".embedding", out);
  prenet1.collect(prefix + ".prenet1", out);
  prenet2.collect(prefix + ".prenet2", out);
  for (std::size_t k = 0; k < bank.size(); ++k) bank[k].collect(prefix + ".bank." + std::to_string(k + 1), out);
  projection1.collect(prefix + ".projection1", out);
  projection2.collect(prefix + ".projection2", out);
  for (std::size_t k = 0; k < highways.size(); ++k) highways[k].collect(prefix + ".highway." + std::to_string(k), out);
  gru.collect(prefix + ".gru", out);
}

void GstEncoder::collect(const std::string& prefix, nn::ParamList& out) {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
  gru.collect(prefix + ".gru", out);
  query.collect(prefix + ".query", out);
  out.push_back({prefix + ".tokens", &tokens});
  attention.collect(prefix + ".attention", out);
}

void RhythmModule::collect(const std::string& prefix, nn::ParamList& out) {
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k].collect(prefix + ".lstm." + std::to_string(k), out);
  head.collect(prefix + ".head", out);
}

void MelDecoder::collect(const std::string& prefix, nn::ParamList& out) {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
  frame_prenet.collect(prefix + ".frame_prenet", out);
  for (std::size_t k = 0; k < lstms.size(); ++k) lstms[k].collect(prefix + ".lstm." + std::to_string(k), out);
  frame_proj.collect(prefix + ".frame_proj", out);
  for (std::size_t k = 0; k < postnet.size(); ++k) postnet[k].collect(prefix + ".postnet." + std::to_string(k), out);
}

GeneratorCheckpoint::GeneratorCheckpoint(const GeneratorConfig& cfg, const PhonemeInventory& inv,
                                         std::vector<std::string> speaker_names, std::uint64_t seed)
    : config(cfg), inventory(inv), speakers(std::move(speaker_names)) {
  config.validate();
  if (speakers.empty()) throw Error(ErrorCode::kInvalidConfig, "generator needs at least one speaker");
  nn::Rng rng(seed);
  const int w = config.cbhg_width;

  cbhg.embedding = nn::Embedding(inventory.vocab_size(), config.phoneme_embedding, rng);
  cbhg.prenet1 = nn::Linear(config.phoneme_embedding, 2 * w, rng);
  cbhg.prenet2 = nn::Linear(2 * w, w, rng);
  for (int k = 1; k <= config.cbhg_bank_size; ++k) cbhg.bank.emplace_back(w, w, k, rng);
  cbhg.projection1 = nn::Conv1d(config.cbhg_bank_size * w, w, 3, rng);
  cbhg.projection2 = nn::Conv1d(w, w, 3, rng);
  for (int k = 0; k < config.cbhg_highway_layers; ++k) cbhg.highways.emplace_back(w, rng);
  cbhg.gru = nn::BiGru(w, w, rng);

  gst.conv1 = nn::Conv1d(config.n_mels, config.reference_channels, 3, rng);
  gst.conv2 = nn::Conv1d(config.reference_channels, config.reference_channels, 3, rng);
  gst.gru = nn::Gru(config.reference_channels, config.reference_gru, rng);
  gst.query = nn::Linear(config.reference_gru, config.style_dim, rng);
  {
    std::normal_distribution<Scalar> dist(0.0, 0.5);
    gst.tokens.resize(config.style_tokens, config.style_dim);
    for (Eigen::Index i = 0; i < gst.tokens.size(); ++i) gst.tokens.data()[i] = dist(rng);
  }
  gst.attention = nn::MultiHeadAttention(config.style_dim, config.style_heads, rng);

  speaker_table = nn::Embedding(num_speakers(), config.speaker_dim, rng);

  int in = config.encoder_dim() + config.style_dim + config.speaker_dim;
  for (int k = 0; k < config.rhythm_layers; ++k) {
    rhythm.layers.emplace_back(in, config.rhythm_hidden, rng);
    in = 2 * config.rhythm_hidden;
  }
  rhythm.head = nn::Linear(in, 1, rng);

  decoder.fc1 = nn::Linear(config.reduction * config.encoder_dim(), config.decoder_fc, rng);
  decoder.fc2 = nn::Linear(config.decoder_fc, config.decoder_fc, rng);
  decoder.frame_prenet = nn::Linear(config.n_mels, config.decoder_fc, rng);
  in = 2 * config.decoder_fc + config.style_dim + config.speaker_dim;
  for (int k = 0; k < config.decoder_layers; ++k) {
    decoder.lstms.emplace_back(in, config.decoder_lstm, rng);
    in = config.decoder_lstm;
  }
  decoder.frame_proj = nn::Linear(config.decoder_lstm, config.reduction * config.n_mels, rng);
  int channels = config.n_mels;
  for (int k = 0; k < config.postnet_layers; ++k) {
    const int out = (k + 1 == config.postnet_layers) ? config.n_mels : config.postnet_channels;
    decoder.postnet.emplace_back(channels, out, config.postnet_kernel, rng);
    channels = out;
  }

  mel_mean = Matrix::Zero(1, config.n_mels);
  mel_std = Matrix::Ones(1, config.n_mels);
}

std::optional<int> GeneratorCheckpoint::find_speaker(const std::string& name) const {
  const auto it = std::find(speakers.begin(), speakers.end(), name);
  if (it == speakers.end()) return std::nullopt;
  return static_cast<int>(it - speakers.begin());
}

nn::ParamList GeneratorCheckpoint::parameters() {
  nn::ParamList out;
  cbhg.collect("cbhg", out);
  gst.collect("gst", out);
  speaker_table.collect("speaker_table", out);
  rhythm.collect("rhythm", out);
  decoder.collect("decoder", out);
  return out;
}

nn::ParamList GeneratorCheckpoint::archive_entries() {
  nn::ParamList out = parameters();
  out.push_back({"stats.mel_mean", &mel_mean});
  out.push_back({"stats.mel_std", &mel_std});
  return out;
}

Matrix GeneratorCheckpoint::normalize(const Matrix& mel) const {
  return ((mel.rowwise() - mel_mean.row(0)).array().rowwise() / mel_std.row(0).array()).matrix();
}

Matrix GeneratorCheckpoint::denormalize(const Matrix& normalized) const {
  return ((normalized.array().rowwise() * mel_std.row(0).array()).rowwise() + mel_mean.row(0).array()).matrix();
}

Var cbhg_encode(Tape& tape, const PhonemeSequence& phonemes, const GeneratorCheckpoint& ckpt) {
  if (phonemes.empty()) throw Error(ErrorCode::kInvalidInput, "cannot encode an empty phoneme sequence");
  for (int t : phonemes.tokens) {
    if (!ckpt.inventory.is_symbol(t)) {
      throw Error(ErrorCode::kInvalidInput, "token " + std::to_string(t) + " is not a phoneme of the inventory");
    }
  }
  const auto& c = ckpt.cbhg;
  const Var x = c.embedding(tape, phonemes.tokens);
  const Var pre = ag::relu(c.prenet2(tape, ag::relu(c.prenet1(tape, x))));
  std::vector<Var> banks;
  banks.reserve(c.bank.size());
  for (const auto& conv : c.bank) banks.push_back(ag::relu(conv(tape, pre)));
  Var y = banks.size() == 1 ? banks.front() : ag::concat_cols(banks);
  y = ag::max_pool_rows(y, 2, 1);
  y = ag::relu(c.projection1(tape, y));
  y = ag::add(c.projection2(tape, y), pre);
  for (const auto& hw : c.highways) y = hw(tape, y);
  return c.gru(tape, y);
}

Matrix cbhg_encode(const PhonemeSequence& phonemes, const GeneratorCheckpoint& ckpt) {
  Tape tape(false);
  return cbhg_encode(tape, phonemes, ckpt).value();
}

Var gst_encode(Tape& tape, const Matrix& mel, const GeneratorCheckpoint& ckpt, std::vector<Var>* weights) {
  check_mel(mel, ckpt.config);
  const auto& g = ckpt.gst;
  Var x = tape.constant(ckpt.normalize(mel));
  x = ag::max_pool_rows(ag::relu(g.conv1(tape, x)), 2, 2);
  x = ag::max_pool_rows(ag::relu(g.conv2(tape, x)), 2, 2);
  const Var states = g.gru.run(tape, x);
  const Var reference = ag::slice_rows(states, states.rows() - 1, 1);
  const Var query = g.query(tape, reference);
  const Var bank = ag::tanh(tape.param(g.tokens));
  return g.attention(tape, query, bank, nullptr, weights);
}

StyleEncoding gst_encode(const Matrix& mel, const GeneratorCheckpoint& ckpt) {
  Tape tape(false);
  std::vector<Var> weights;
  StyleEncoding out;
  out.embedding = gst_encode(tape, mel, ckpt, &weights).value().row(0);
  for (const auto& w : weights) out.attention.push_back(w.value().row(0));
  return out;
}

namespace {

std::vector<int> owner_index(const DurationSequence& durations, std::size_t rows) {
  if (durations.size() != rows) {
    throw Error(ErrorCode::kInvalidInput, std::to_string(durations.size()) + " durations for " +
                                              std::to_string(rows) + " encoded vectors");
  }
  std::vector<int> index;
  index.reserve(static_cast<std::size_t>(std::max(0LL, durations.total())));
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations.frames[i] < 1) throw Error(ErrorCode::kInvalidInput, "durations must be >= 1");
    index.insert(index.end(), static_cast<std::size_t>(durations.frames[i]), static_cast<int>(i));
  }
  return index;
}

}  // namespace

Var state_expand(Var encoded, const DurationSequence& durations) {
  return ag::gather_rows(encoded, owner_index(durations, static_cast<std::size_t>(encoded.rows())));
}

Matrix state_expand(const Matrix& encoded, const DurationSequence& durations) {
  const auto index = owner_index(durations, static_cast<std::size_t>(encoded.rows()));
  Matrix out(static_cast<Eigen::Index>(index.size()), encoded.cols());
  for (std::size_t t = 0; t < index.size(); ++t) out.row(static_cast<Eigen::Index>(t)) = encoded.row(index[t]);
  return out;
}

Var speaker_vector(Tape& tape, int speaker, const GeneratorCheckpoint& ckpt) {
  check_speaker(speaker, ckpt);
  return ckpt.speaker_table(tape, {speaker});
}

Var predict_log_durations(Tape& tape, Var encoded, Var style, Var speaker, const GeneratorCheckpoint& ckpt) {
  const Var cond = ag::concat_cols({style, speaker});
  const Var repeated = ag::gather_rows(cond, std::vector<int>(static_cast<std::size_t>(encoded.rows()), 0));
  Var x = ag::concat_cols({encoded, repeated});
  for (const auto& layer : ckpt.rhythm.layers) x = layer(tape, x);
  return ckpt.rhythm.head(tape, x);
}

std::vector<Scalar> predict_rhythm(const Matrix& encoded, const RowVector& style, int speaker,
                                   const GeneratorCheckpoint& ckpt) {
  if (encoded.rows() < 1) throw Error(ErrorCode::kInvalidInput, "empty encoder output");
  Tape tape(false);
  const Matrix log_d = predict_log_durations(tape, tape.constant(encoded), tape.constant(style),
                                             speaker_vector(tape, speaker, ckpt), ckpt)
                           .value();
  std::vector<Scalar> out(static_cast<std::size_t>(log_d.rows()));
  for (Eigen::Index i = 0; i < log_d.rows(); ++i) out[static_cast<std::size_t>(i)] = std::exp(log_d(i, 0));
  return out;
}

DurationSequence quantize_durations(const std::vector<Scalar>& durations) {
  DurationSequence out;
  out.frames.reserve(durations.size());
  for (Scalar d : durations) {
    if (!std::isfinite(d)) throw Error(ErrorCode::kInvalidInput, "non-finite duration");
    out.frames.push_back(static_cast<int>(std::max(1L, std::lround(d))));
  }
  return out;
}

DecodedMel decode_mel(Tape& tape, Var expanded, Var style, Var speaker, const GeneratorCheckpoint& ckpt,
                      const Matrix* teacher) {
  const auto& cfg = ckpt.config;
  const auto& dec = ckpt.decoder;
  const Eigen::Index frames = expanded.rows();
  if (frames < 1) throw Error(ErrorCode::kInvalidInput, "decoder needs at least one frame");
  if (teacher && (teacher->rows() != frames || teacher->cols() != cfg.n_mels)) {
    throw Error(ErrorCode::kInvalidInput, "teacher has " + std::to_string(teacher->rows()) + " frames, expected " +
                                              std::to_string(frames));
  }
  const int r = cfg.reduction;
  const Eigen::Index steps = (frames + r - 1) / r;
  std::vector<int> padded(static_cast<std::size_t>(steps * r));
  for (std::size_t t = 0; t < padded.size(); ++t) {
    padded[t] = static_cast<int>(std::min<Eigen::Index>(static_cast<Eigen::Index>(t), frames - 1));
  }
  const Var grouped = ag::reshape(ag::gather_rows(expanded, padded), steps, r * expanded.cols());
  const Var fc = ag::relu(dec.fc2(tape, ag::relu(dec.fc1(tape, grouped))));
  const Var cond = ag::concat_cols({style, speaker});

  std::vector<nn::Lstm::State> states;
  for (const auto& lstm : dec.lstms) states.push_back(lstm.initial(tape));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(steps));
  const Var silence = tape.constant(Matrix::Zero(1, cfg.n_mels));
  for (Eigen::Index k = 0; k < steps; ++k) {
    Var previous = silence;
    if (k > 0) {
      previous = teacher ? tape.constant(teacher->row(k * r - 1))
                         : ag::slice_rows(outputs.back(), r - 1, 1);
    }
    Var h = ag::concat_cols({ag::slice_rows(fc, k, 1), cond, ag::relu(dec.frame_prenet(tape, previous))});
    for (std::size_t l = 0; l < dec.lstms.size(); ++l) {
      states[l] = dec.lstms[l].step(tape, dec.lstms[l].project(tape, h), states[l]);
      h = states[l].h;
    }
    outputs.push_back(ag::reshape(dec.frame_proj(tape, h), r, cfg.n_mels));
  }
  DecodedMel out;
  out.before_postnet = ag::slice_rows(outputs.size() == 1 ? outputs.front() : ag::concat_rows(outputs), 0, frames);
  Var y = out.before_postnet;
  for (std::size_t k = 0; k < dec.postnet.size(); ++k) {
    y = dec.postnet[k](tape, y);
    if (k + 1 < dec.postnet.size()) y = ag::tanh(y);
  }
  out.after_postnet = dec.postnet.empty() ? out.before_postnet : ag::add(out.before_postnet, y);
  return out;
}

MelSpectrogram decode_mel(const Matrix& expanded, const RowVector& style, int speaker, const GeneratorCheckpoint& ckpt,
                          const std::optional<MelSpectrogram>& teacher) {
  Tape tape(false);
  Matrix normalized_teacher;
  if (teacher) {
    check_mel(teacher->frames, ckpt.config);
    normalized_teacher = ckpt.normalize(teacher->frames);
  }
  const auto decoded = decode_mel(tape, tape.constant(expanded), tape.constant(style),
                                  speaker_vector(tape, speaker, ckpt), ckpt,
                                  teacher ? &normalized_teacher : nullptr);
  MelSpectrogram out;
  out.frames = ckpt.denormalize(decoded.after_postnet.value());
  if (teacher) {
    out.frame_shift_ms = teacher->frame_shift_ms;
    out.frame_length_ms = teacher->frame_length_ms;
  }
  return out;
}

GeneratorLossVars generator_loss(Tape& tape, const Matrix& mel, const PhonemeSequence& phonemes,
                                 const DurationSequence& durations, int speaker, const GeneratorCheckpoint& ckpt) {
  check_mel(mel, ckpt.config);
  check_durations(durations, phonemes.size());
  if (durations.total() != mel.rows()) {
    throw Error(ErrorCode::kInvalidInput, "durations sum to " + std::to_string(durations.total()) + " but the mel has " +
                                              std::to_string(mel.rows()) + " frames");
  }
  const Matrix target = ckpt.normalize(mel);
  const Var encoded = cbhg_encode(tape, phonemes, ckpt);
  const Var style = gst_encode(tape, mel, ckpt);
  const Var spk = speaker_vector(tape, speaker, ckpt);

  Matrix log_target(static_cast<Eigen::Index>(durations.size()), 1);
  for (std::size_t i = 0; i < durations.size(); ++i) {
    log_target(static_cast<Eigen::Index>(i), 0) = std::log(static_cast<Scalar>(durations.frames[i]));
  }
  GeneratorLossVars out;
  out.rhythm_term = ag::mse(predict_log_durations(tape, encoded, style, spk, ckpt), log_target);
  const auto decoded = decode_mel(tape, state_expand(encoded, durations), style, spk, ckpt, &target);
  out.recon_term = ag::add(ag::mse(decoded.before_postnet, target), ag::mse(decoded.after_postnet, target));
  out.total = ag::add(out.recon_term, out.rhythm_term);
  return out;
}

GeneratorLoss generator_loss(const Matrix& mel, const PhonemeSequence& phonemes, const DurationSequence& durations,
                             int speaker, const GeneratorCheckpoint& ckpt) {
  Tape tape(false);
  const auto v = generator_loss(tape, mel, phonemes, durations, speaker, ckpt);
  return {v.total.item(), v.recon_term.item(), v.rhythm_term.item()};
}

namespace {

struct PreparedUtterance {
  const GeneratorUtterance* source;
  int speaker;
  DurationSequence durations;
};

std::vector<PreparedUtterance> prepare(const std::vector<GeneratorUtterance>& data, const AlignmentTable& alignments,
                                       const GeneratorCheckpoint& ckpt) {
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty generator training set");
  std::vector<PreparedUtterance> out;
  for (const auto& u : data) {
    const auto speaker = ckpt.find_speaker(u.speaker);
    if (!speaker) throw Error(ErrorCode::kInvalidInput, u.id + ": unknown speaker " + u.speaker);
    const auto it = alignments.find(u.id);
    if (it == alignments.end()) throw Error(ErrorCode::kAlignment, "no alignment for utterance " + u.id);
    try {
      check_mel(u.mel, ckpt.config);
      check_durations(it->second, u.phonemes.size());
    } catch (const Error& e) {
      throw Error(e.code(), u.id + ": " + e.what());
    }
    if (it->second.total() != u.mel.rows()) {
      throw Error(ErrorCode::kInvalidInput, u.id + ": alignment covers " + std::to_string(it->second.total()) +
                                                " frames, mel has " + std::to_string(u.mel.rows()));
    }
    out.push_back({&u, *speaker, it->second});
  }
  return out;
}

GeneratorTraining fit(GeneratorCheckpoint checkpoint, const std::vector<GeneratorUtterance>& data,
                      const AlignmentTable& alignments, const TrainSchedule& schedule) {
  const auto prepared = prepare(data, alignments, checkpoint);
  GeneratorTraining out;
  const auto records = run_training(
      checkpoint.parameters(), schedule, prepared.size(), checkpoint.step,
      [&](Tape& tape, std::size_t i) {
        const auto& p = prepared[i];
        const auto l = generator_loss(tape, p.source->mel, p.source->phonemes, p.durations, p.speaker, checkpoint);
        return StepLoss{l.total, {l.recon_term, l.rhythm_term}};
      },
      [&](std::size_t i) { return prepared[i].source->id; });
  for (const auto& r : records) out.log.push_back({r.step, r.total, r.terms[0], r.terms[1]});
  out.checkpoint = std::move(checkpoint);
  return out;
}

}  // namespace

GeneratorTraining train_generator(const std::vector<GeneratorUtterance>& data, const AlignmentTable& alignments,
                                  const GeneratorConfig& config, const PhonemeInventory& inventory,
                                  const TrainSchedule& schedule, std::vector<std::string> speakers) {
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty generator training set");
  if (speakers.empty()) {
    std::set<std::string> names;
    for (const auto& u : data) names.insert(u.speaker);
    speakers.assign(names.begin(), names.end());
  }
  GeneratorCheckpoint ckpt(config, inventory, std::move(speakers), schedule.seed);
  Eigen::Index frames = 0;
  RowVector sum = RowVector::Zero(config.n_mels);
  RowVector sq = RowVector::Zero(config.n_mels);
  for (const auto& u : data) {
    check_mel(u.mel, config);
    frames += u.mel.rows();
    sum += u.mel.colwise().sum();
    sq += u.mel.array().square().matrix().colwise().sum();
  }
  const RowVector mean = sum / static_cast<Scalar>(frames);
  const RowVector var = (sq / static_cast<Scalar>(frames)).array() - mean.array().square();
  ckpt.mel_mean = mean;
  ckpt.mel_std = var.array().max(0.0).sqrt().max(kStdFloor).matrix();
  return fit(std::move(ckpt), data, alignments, schedule);
}

GeneratorTraining adapt_generator(GeneratorCheckpoint checkpoint, const std::vector<GeneratorUtterance>& data,
                                  const AlignmentTable& alignments, const TrainSchedule& schedule) {
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty adaptation set");
  for (const auto& u : data) {
    if (checkpoint.find_speaker(u.speaker)) continue;
    Matrix& table = checkpoint.speaker_table.table;
    const RowVector mean = table.colwise().mean();
    table.conservativeResize(table.rows() + 1, Eigen::NoChange);
    table.row(table.rows() - 1) = mean;
    checkpoint.speakers.push_back(u.speaker);
    spdlog::info("appended speaker {} to the speaker table", u.speaker);
  }
  return fit(std::move(checkpoint), data, alignments, schedule);
}

void write_generator_log(const std::string& path, const std::vector<GeneratorLogRow>& log) {
  std::vector<StepRecord> records;
  records.reserve(log.size());
  for (const auto& r : log) records.push_back({r.step, r.total, {r.recon_term, r.rhythm_term}});
  write_training_log(path, {"recon_term", "rhythm_term"}, records);
}

void save_generator(const std::string& dir, GeneratorCheckpoint& ckpt) {
  std::filesystem::create_directories(dir);
  save_parameters(dir + "/params.bin", ckpt.archive_entries());
  FlatConfig flat = ckpt.config.to_flat();
  flat.set("format", std::string(kGeneratorFormat));
  flat.set("inventory_hash", ckpt.inventory.hash());
  flat.set("step", ckpt.step);
  flat.set("num_speakers", ckpt.num_speakers());
  flat.save(dir + "/config.txt");
  ckpt.inventory.save(dir + "/inventory.txt");
  std::ofstream out(dir + "/speakers.txt");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + dir + "/speakers.txt");
  for (const auto& s : ckpt.speakers) out << s << '\n';
}

GeneratorCheckpoint load_generator(const std::string& dir, const PhonemeInventory* expected) {
  const FlatConfig flat = FlatConfig::load(dir + "/config.txt");
  if (flat.get_string("format", "") != kGeneratorFormat) {
    throw Error(ErrorCode::kInvalidInput, dir + " is not a generator checkpoint");
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
  std::ifstream in(dir + "/speakers.txt");
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + dir + "/speakers.txt");
  std::vector<std::string> speakers;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) speakers.push_back(line);
  }
  if (static_cast<long long>(speakers.size()) != flat.get_int("num_speakers", -1)) {
    throw Error(ErrorCode::kInvalidInput, dir + ": speaker table size does not match the config");
  }
  GeneratorCheckpoint ckpt(GeneratorConfig::from_flat(flat), inventory, std::move(speakers), 0);
  ckpt.step = flat.get_int("step", 0);
  load_parameters(dir + "/params.bin", ckpt.archive_entries());
  return ckpt;
}

}  // namespace stylevc
