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

#ifndef STYLEVC_CORPUS_H_
#define STYLEVC_CORPUS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylevc/common.h"
#include "stylevc/features.h"

namespace stylevc {

// Token ids index the full vocabulary: the four specials come first, then
// the phoneme symbols in file order.
class PhonemeInventory {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kPad = 3;
  static constexpr int kNumSpecials = 4;

  PhonemeInventory() = default;
  explicit PhonemeInventory(std::vector<std::string> symbols,
                            std::vector<std::string> special_names = {"<blank>", "<sos>", "<eos>", "<pad>"});

  // One symbol per line. An optional header line "#specials <blank> <sos> <eos> <pad>"
  // renames the specials; other '#' lines are comments.
  static PhonemeInventory load(const std::string& path);
  void save(const std::string& path) const;

  int vocab_size() const { return kNumSpecials + static_cast<int>(symbols_.size()); }
  int num_symbols() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::vector<std::string>& special_names() const { return specials_; }

  std::optional<int> find(const std::string& symbol) const;
  const std::string& name(int token) const;
  bool is_symbol(int token) const { return token >= kNumSpecials && token < vocab_size(); }

  // FNV-1a over specials and symbols, as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> symbols_;
  std::vector<std::string> specials_ = {"<blank>", "<sos>", "<eos>", "<pad>"};
  std::map<std::string, int> index_;
};

struct PhonemeSequence {
  std::vector<int> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const PhonemeSequence&) const = default;
};

PhonemeSequence encode_symbols(const std::vector<std::string>& symbols, const PhonemeInventory& inventory);
std::vector<std::string> decode_symbols(const PhonemeSequence& seq, const PhonemeInventory& inventory);
std::string join_symbols(const PhonemeSequence& seq, const PhonemeInventory& inventory);

struct DurationSequence {
  std::vector<int> frames;

  std::size_t size() const { return frames.size(); }
  long long total() const;
  bool operator==(const DurationSequence&) const = default;
};

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  std::string speaker;
  PhonemeSequence phonemes;
};

using AlignmentTable = std::map<std::string, DurationSequence>;

// Tab-separated: id, audio path, speaker, space-separated phoneme symbols.
std::vector<UtteranceRecord> load_manifest(const std::string& path, const PhonemeInventory& inventory);
std::vector<UtteranceRecord> parse_manifest(const std::string& text, const PhonemeInventory& inventory);
void save_manifest(const std::string& path, const std::vector<UtteranceRecord>& records,
                   const PhonemeInventory& inventory);

// One line per utterance: id followed by integer frame durations.
AlignmentTable load_alignments(const std::string& path, const std::vector<UtteranceRecord>& records,
                               const std::map<std::string, long long>& frame_counts);
AlignmentTable parse_alignments(const std::string& text, const std::vector<UtteranceRecord>& records,
                                const std::map<std::string, long long>& frame_counts);
void save_alignments(const std::string& path, const AlignmentTable& table);

// Applies the zero-duration clamp and the +/-2 frame reconciliation to one entry.
DurationSequence reconcile_durations(const std::string& id, std::vector<int> durations,
                                     std::size_t phoneme_count, long long mel_frames);

struct CorpusSplit {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> val;
  std::vector<UtteranceRecord> test;
};

CorpusSplit split_records(const std::vector<UtteranceRecord>& records, double val_fraction,
                          double test_fraction, std::uint64_t seed);

// Resolves a manifest-relative audio path.
std::string resolve_audio_path(const std::string& manifest_path, const std::string& audio_path);

// Distinct speaker names in order of first appearance.
std::vector<std::string> speakers_of(const std::vector<UtteranceRecord>& records);

// A small synthetic corpus: each phoneme is a harmonic source shaped by a
// symbol-specific pair of formants, each speaker has its own pitch range.
struct ToyCorpusOptions {
  int num_utterances = 20;
  int num_speakers = 2;
  int num_symbols = 6;
  int min_phonemes = 3;
  int max_phonemes = 6;
  int min_duration = 4;  // frames
  int max_duration = 9;
  Scalar noise_level = 3e-3;
  std::uint64_t seed = 7;
  FeatureConfig features;
};

struct ToyUtterance {
  UtteranceRecord record;
  AudioWaveform wav;
  DurationSequence durations;
};

struct ToyCorpus {
  PhonemeInventory inventory;
  std::vector<ToyUtterance> utterances;
};

ToyCorpus make_toy_corpus(const ToyCorpusOptions& options);

// Writes inventory.txt, manifest.tsv, alignments.txt and wav/<id>.wav under `dir`.
void write_toy_corpus(const ToyCorpus& corpus, const std::string& dir);

// Synthesizes one utterance of the toy voice for an arbitrary phoneme/duration pair.
AudioWaveform synthesize_toy_utterance(const PhonemeSequence& phonemes, const DurationSequence& durations,
                                       int speaker, const ToyCorpusOptions& options, std::uint64_t seed);

}  // namespace stylevc

#endif  // STYLEVC_CORPUS_H_
