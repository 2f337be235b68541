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

#ifndef STYLEVC_EVALUATION_H_
#define STYLEVC_EVALUATION_H_

#include <map>
#include <string>
#include <vector>

#include "stylevc/corpus.h"
#include "stylevc/features.h"

namespace stylevc {

struct PerResult {
  long long sub = 0;
  long long del = 0;
  long long ins = 0;
  long long ref_len = 0;

  // Percentages of ref_len.
  Scalar sub_rate() const;
  Scalar del_rate() const;
  Scalar ins_rate() const;
  Scalar per() const;
};

// Unit-cost edit distance. Counts come from a single backtrace that prefers,
// among equal-cost moves, the diagonal (match or substitution), then
// deletion, then insertion.
PerResult compute_per(const std::vector<int>& hyp, const std::vector<int>& ref);
PerResult compute_per(const PhonemeSequence& hyp, const PhonemeSequence& ref);
PerResult compute_per(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// Pooled counts over utterances; both maps must have the same ids.
PerResult corpus_per(const std::map<std::string, std::vector<std::string>>& hyp,
                     const std::map<std::string, std::vector<std::string>>& ref);

struct PerRow {
  std::string id;
  PerResult counts;
};

// Per-utterance rows in id order plus the pooled total.
std::vector<PerRow> per_rows(const std::map<std::string, std::vector<std::string>>& hyp,
                             const std::map<std::string, std::vector<std::string>>& ref, PerResult* pooled = nullptr);

// CSV with header id,sub,del,ins,ref_len.
void write_per_csv(const std::string& path, const std::vector<PerRow>& rows);
std::vector<PerRow> read_per_csv(const std::string& path);

// Transcript CSV with header id,phonemes; phonemes are space-separated symbols.
std::map<std::string, std::vector<std::string>> read_transcripts(const std::string& path);
void write_transcripts(const std::string& path, const std::map<std::string, std::vector<std::string>>& transcripts);

struct NamedContour {
  std::string label;
  F0Contour contour;
};

// Writes an SVG line plot to `svg_path` and the plotted series to
// `csv_path` (label,frame,time_s,f0_hz). Each line keeps its own length.
void plot_f0_overlay(const std::vector<NamedContour>& contours, const std::string& svg_path,
                     const std::string& csv_path);
std::vector<NamedContour> read_f0_csv(const std::string& path);

struct F0Similarity {
  Scalar rmse_hz = 0.0;
  Scalar correlation = 0.0;
};

// The longer contour is linearly resampled to the shorter length. Pearson
// correlation of two constant series is 1 when both are constant, else 0
// if only one is.
F0Similarity f0_similarity(const F0Contour& a, const F0Contour& b);

inline const std::string kNoPreference = "NP";

// A response already attributed to a system (or NP).
struct AttributedChoice {
  std::string test_id;
  std::string option;
};

struct PreferenceSummary {
  std::string test_id;
  long long trials = 0;
  std::vector<std::string> options;  // systems in the given order, NP last
  std::map<std::string, long long> counts;
  std::map<std::string, Scalar> percentages;
};

// `systems` lists options that must appear even with zero votes.
PreferenceSummary aggregate_preferences(const std::vector<AttributedChoice>& responses,
                                        const std::vector<std::string>& systems = {});

// CSV with header option,count,pct.
void write_preference_csv(const std::string& path, const PreferenceSummary& summary);

}  // namespace stylevc

#endif  // STYLEVC_EVALUATION_H_
