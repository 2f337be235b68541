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

#include "stylevc/corpus.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace stylevc {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols, std::vector<std::string> special_names)
    : symbols_(std::move(symbols)), specials_(std::move(special_names)) {
  if (specials_.size() != kNumSpecials) {
    throw Error(ErrorCode::kValidation, "inventory needs exactly four special names");
  }
  for (int i = 0; i < kNumSpecials; ++i) {
    if (!index_.emplace(specials_[i], i).second) {
      throw Error(ErrorCode::kValidation, "duplicate special symbol " + specials_[i]);
    }
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw Error(ErrorCode::kValidation, "empty phoneme symbol");
    if (!index_.emplace(symbols_[i], kNumSpecials + static_cast<int>(i)).second) {
      throw Error(ErrorCode::kValidation, "duplicate or special-colliding symbol " + symbols_[i]);
    }
  }
}

PhonemeInventory PhonemeInventory::load(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> symbols;
  std::vector<std::string> specials = {"<blank>", "<sos>", "<eos>", "<pad>"};
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields[0] == "#specials") {
      if (fields.size() != 5) throw Error(ErrorCode::kValidation, "#specials header needs four names");
      specials.assign(fields.begin() + 1, fields.end());
      continue;
    }
    if (fields[0][0] == '#') continue;
    if (fields.size() != 1) throw Error(ErrorCode::kValidation, "inventory line has spaces: " + line);
    symbols.push_back(fields[0]);
  }
  return PhonemeInventory(std::move(symbols), std::move(specials));
}

void PhonemeInventory::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "#specials";
  for (const auto& s : specials_) out << ' ' << s;
  out << '\n';
  for (const auto& s : symbols_) out << s << '\n';
}

std::optional<int> PhonemeInventory::find(const std::string& symbol) const {
  const auto it = index_.find(symbol);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& PhonemeInventory::name(int token) const {
  if (token < 0 || token >= vocab_size()) {
    throw Error(ErrorCode::kInvalidInput, "token " + std::to_string(token) + " outside vocabulary");
  }
  return token < kNumSpecials ? specials_[token] : symbols_[token - kNumSpecials];
}

std::string PhonemeInventory::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (const auto& s : specials_) mix(s);
  for (const auto& s : symbols_) mix(s);
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

PhonemeSequence encode_symbols(const std::vector<std::string>& symbols, const PhonemeInventory& inventory) {
  PhonemeSequence seq;
  for (const auto& s : symbols) {
    const auto token = inventory.find(s);
    if (!token || !inventory.is_symbol(*token)) {
      throw Error(ErrorCode::kValidation, "unknown phoneme symbol '" + s + "'");
    }
    seq.tokens.push_back(*token);
  }
  return seq;
}

std::vector<std::string> decode_symbols(const PhonemeSequence& seq, const PhonemeInventory& inventory) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (int t : seq.tokens) out.push_back(inventory.name(t));
  return out;
}

std::string join_symbols(const PhonemeSequence& seq, const PhonemeInventory& inventory) {
  std::string out;
  for (int t : seq.tokens) {
    if (!out.empty()) out += ' ';
    out += inventory.name(t);
  }
  return out;
}

long long DurationSequence::total() const {
  return std::accumulate(frames.begin(), frames.end(), 0LL);
}

std::vector<UtteranceRecord> parse_manifest(const std::string& text, const PhonemeInventory& inventory) {
  std::vector<UtteranceRecord> records;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream fs(line);
    std::string field;
    while (std::getline(fs, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error(ErrorCode::kValidation,
                  "manifest line " + std::to_string(line_no) + " needs 4 tab-separated fields");
    }
    UtteranceRecord record{fields[0], fields[1], fields[2], {}};
    if (record.id.empty()) throw Error(ErrorCode::kValidation, "empty id on line " + std::to_string(line_no));
    if (!seen.insert(record.id).second) {
      throw Error(ErrorCode::kValidation, "duplicate utterance id '" + record.id + "'");
    }
    const auto symbols = split_ws(fields[3]);
    if (symbols.empty()) {
      throw Error(ErrorCode::kValidation, "utterance '" + record.id + "' has no phonemes");
    }
    for (const auto& s : symbols) {
      const auto token = inventory.find(s);
      if (!token || !inventory.is_symbol(*token)) {
        throw Error(ErrorCode::kValidation,
                    "utterance '" + record.id + "' uses unknown phoneme symbol '" + s + "'");
      }
      record.phonemes.tokens.push_back(*token);
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<UtteranceRecord> load_manifest(const std::string& path, const PhonemeInventory& inventory) {
  return parse_manifest(read_file(path), inventory);
}

void save_manifest(const std::string& path, const std::vector<UtteranceRecord>& records,
                   const PhonemeInventory& inventory) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& r : records) {
    out << r.id << '\t' << r.audio_path << '\t' << r.speaker << '\t' << join_symbols(r.phonemes, inventory)
        << '\n';
  }
}

DurationSequence reconcile_durations(const std::string& id, std::vector<int> durations,
                                     std::size_t phoneme_count, long long mel_frames) {
  if (durations.size() != phoneme_count) {
    throw Error(ErrorCode::kAlignment, "utterance '" + id + "' has " + std::to_string(durations.size()) +
                                           " durations for " + std::to_string(phoneme_count) + " phonemes");
  }
  for (int d : durations) {
    if (d < 0) throw Error(ErrorCode::kAlignment, "utterance '" + id + "' has a negative duration");
  }
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] != 0) continue;
    durations[i] = 1;
    std::size_t neighbor = i;
    if (i > 0) neighbor = i - 1;
    if (i + 1 < durations.size() && (neighbor == i || durations[i + 1] > durations[neighbor])) neighbor = i + 1;
    if (neighbor != i && durations[neighbor] > 1) --durations[neighbor];
    spdlog::warn("alignment for '{}': zero duration at phoneme {} clamped to 1", id, i);
  }
  const long long sum = std::accumulate(durations.begin(), durations.end(), 0LL);
  const long long diff = mel_frames - sum;
  if (diff < -2 || diff > 2) {
    throw Error(ErrorCode::kAlignment, "utterance '" + id + "' durations sum to " + std::to_string(sum) +
                                           " but the mel has " + std::to_string(mel_frames) + " frames");
  }
  if (durations.back() + diff < 1) {
    throw Error(ErrorCode::kAlignment, "utterance '" + id + "' cannot absorb the frame-count mismatch");
  }
  durations.back() += static_cast<int>(diff);
  return DurationSequence{std::move(durations)};
}

AlignmentTable parse_alignments(const std::string& text, const std::vector<UtteranceRecord>& records,
                                const std::map<std::string, long long>& frame_counts) {
  std::map<std::string, const UtteranceRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  AlignmentTable table;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::string& id = fields[0];
    const auto rec = by_id.find(id);
    if (rec == by_id.end()) throw Error(ErrorCode::kAlignment, "alignment for unknown utterance '" + id + "'");
    const auto frames = frame_counts.find(id);
    if (frames == frame_counts.end()) {
      throw Error(ErrorCode::kAlignment, "no mel frame count for utterance '" + id + "'");
    }
    std::vector<int> durations;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        durations.push_back(std::stoi(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kAlignment, "utterance '" + id + "' has a non-integer duration");
      }
    }
    if (!table.emplace(id, reconcile_durations(id, std::move(durations), rec->second->phonemes.size(),
                                               frames->second))
             .second) {
      throw Error(ErrorCode::kAlignment, "duplicate alignment for '" + id + "'");
    }
  }
  return table;
}

AlignmentTable load_alignments(const std::string& path, const std::vector<UtteranceRecord>& records,
                               const std::map<std::string, long long>& frame_counts) {
  return parse_alignments(read_file(path), records, frame_counts);
}

void save_alignments(const std::string& path, const AlignmentTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& [id, durations] : table) {
    out << id;
    for (int d : durations.frames) out << ' ' << d;
    out << '\n';
  }
}

CorpusSplit split_records(const std::vector<UtteranceRecord>& records, double val_fraction,
                          double test_fraction, std::uint64_t seed) {
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1) {
    throw Error(ErrorCode::kInvalidArgument, "split fractions must be non-negative and sum to <= 1");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n = records.size();
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * n));
  CorpusSplit split;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = records[order[k]];
    if (k < n_val) {
      split.val.push_back(r);
    } else if (k < n_val + n_test) {
      split.test.push_back(r);
    } else {
      split.train.push_back(r);
    }
  }
  return split;
}

std::string resolve_audio_path(const std::string& manifest_path, const std::string& audio_path) {
  const std::filesystem::path p(audio_path);
  if (p.is_absolute()) return audio_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

std::vector<std::string> speakers_of(const std::vector<UtteranceRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.speaker) == out.end()) out.push_back(r.speaker);
  }
  return out;
}

namespace {

std::string toy_symbol(int k) {
  static const char* kNames[] = {"a", "e", "i", "o", "u", "m", "n", "l", "r", "w", "y", "h"};
  if (k < 12) return kNames[k];
  return "p" + std::to_string(k);
}

struct Formants {
  Scalar f1;
  Scalar f2;
};

Formants toy_formants(int symbol, int num_symbols) {
  const Scalar span = std::max(1, num_symbols - 1);
  const int shuffled = (symbol * 5 + 2) % std::max(1, num_symbols);
  return {300.0 + 600.0 * symbol / span, 900.0 + 1700.0 * shuffled / span};
}

}  // namespace

AudioWaveform synthesize_toy_utterance(const PhonemeSequence& phonemes, const DurationSequence& durations,
                                       int speaker, const ToyCorpusOptions& options, std::uint64_t seed) {
  if (phonemes.size() != durations.size() || phonemes.empty()) {
    throw Error(ErrorCode::kInvalidInput, "phoneme and duration sequences must match and be non-empty");
  }
  constexpr Scalar kTwoPi = 2.0 * std::numbers::pi_v<Scalar>;
  const FeatureConfig& fc = options.features;
  const int shift = fc.shift_samples();
  const Scalar sr = fc.sample_rate;
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> noise(0.0, options.noise_level);
  std::uniform_real_distribution<Scalar> unit(0.0, 1.0);

  const Scalar base_f0 = 110.0 + 75.0 * speaker;
  const Scalar tract = 1.0 + 0.07 * speaker;
  const Scalar contour_rate = 0.5 + 1.5 * unit(rng);
  const Scalar contour_depth = 0.05 + 0.1 * unit(rng);
  const Scalar loudness = 0.25 + 0.15 * unit(rng);

  const long long total_frames = durations.total();
  AudioWaveform wav;
  wav.sample_rate = sr;
  wav.samples.resize(static_cast<std::size_t>(total_frames) * shift);
  const int max_harmonics = static_cast<int>(std::min<Scalar>(4000.0, 0.45 * sr) / (0.8 * base_f0));
  std::vector<Scalar> phase(max_harmonics + 1, 0.0);

  std::size_t n = 0;
  for (std::size_t p = 0; p < phonemes.size(); ++p) {
    const Formants f = toy_formants(phonemes.tokens[p] - PhonemeInventory::kNumSpecials, options.num_symbols);
    const std::size_t end = n + static_cast<std::size_t>(durations.frames[p]) * shift;
    for (; n < end; ++n) {
      const Scalar time = n / sr;
      const Scalar f0 = base_f0 * (1.0 + contour_depth * std::sin(kTwoPi * contour_rate * time));
      Scalar sample = 0.0;
      for (int h = 1; h <= max_harmonics; ++h) {
        const Scalar freq = h * f0;
        phase[h] = std::fmod(phase[h] + kTwoPi * freq / sr, kTwoPi);
        if (freq >= 0.45 * sr) continue;
        const Scalar d1 = (freq - f.f1 * tract) / 110.0;
        const Scalar d2 = (freq - f.f2 * tract) / 160.0;
        const Scalar amp = std::exp(-0.5 * d1 * d1) + 0.7 * std::exp(-0.5 * d2 * d2) + 0.01;
        sample += amp * std::sin(phase[h]);
      }
      wav.samples[n] = loudness * 0.25 * sample + noise(rng);
    }
  }
  return wav;
}

ToyCorpus make_toy_corpus(const ToyCorpusOptions& options) {
  if (options.num_symbols < 2 || options.num_speakers < 1 || options.num_utterances < 0 ||
      options.min_phonemes < 1 || options.max_phonemes < options.min_phonemes || options.min_duration < 1 ||
      options.max_duration < options.min_duration) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent toy corpus options");
  }
  ToyCorpus corpus;
  std::vector<std::string> symbols;
  for (int k = 0; k < options.num_symbols; ++k) symbols.push_back(toy_symbol(k));
  corpus.inventory = PhonemeInventory(symbols);

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> length(options.min_phonemes, options.max_phonemes);
  std::uniform_int_distribution<int> duration(options.min_duration, options.max_duration);
  std::uniform_int_distribution<int> symbol(0, options.num_symbols - 1);
  for (int u = 0; u < options.num_utterances; ++u) {
    ToyUtterance utt;
    const int speaker = u % options.num_speakers;
    char id[32];
    std::snprintf(id, sizeof(id), "utt%03d", u);
    utt.record.id = id;
    utt.record.speaker = "spk" + std::to_string(speaker);
    utt.record.audio_path = std::string("wav/") + id + ".wav";
    const int len = length(rng);
    int previous = -1;
    for (int i = 0; i < len; ++i) {
      int s = symbol(rng);
      while (s == previous) s = symbol(rng);
      previous = s;
      utt.record.phonemes.tokens.push_back(PhonemeInventory::kNumSpecials + s);
      utt.durations.frames.push_back(duration(rng));
    }
    utt.wav = synthesize_toy_utterance(utt.record.phonemes, utt.durations, speaker, options, rng());
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "wav");
  corpus.inventory.save((fs::path(dir) / "inventory.txt").string());
  std::vector<UtteranceRecord> records;
  AlignmentTable alignments;
  for (const auto& utt : corpus.utterances) {
    write_wav((fs::path(dir) / utt.record.audio_path).string(), utt.wav);
    records.push_back(utt.record);
    alignments[utt.record.id] = utt.durations;
  }
  save_manifest((fs::path(dir) / "manifest.tsv").string(), records, corpus.inventory);
  save_alignments((fs::path(dir) / "alignments.txt").string(), alignments);
}

}  // namespace stylevc
