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

#ifndef STYLEVC_CTC_H_
#define STYLEVC_CTC_H_

#include <vector>

#include "stylevc/autograd.h"

namespace stylevc::ctc {

// Smallest number of frames that can emit `labels` (one extra blank between
// equal neighbours).
int min_frames(const std::vector<int>& labels);
bool feasible(Eigen::Index frames, const std::vector<int>& labels);

// log P(labels | log_probs) by the forward recursion; log_probs is T x V of
// normalized log probabilities.
Scalar log_likelihood(const Matrix& log_probs, const std::vector<int>& labels, int blank);

// -log P_CTC(labels | softmax(logits)) as a 1x1 Var. The gradient with
// respect to the logits is softmax - posterior occupancy.
ag::Var loss(ag::Var logits, const std::vector<int>& labels, int blank);

struct ViterbiPath {
  // Index into the blank-augmented sequence (even = blank, 2k+1 = labels[k]) per frame.
  std::vector<int> states;
  Scalar log_prob = 0.0;
};

// Best single blank-augmented path that collapses to `labels`.
ViterbiPath viterbi(const Matrix& log_probs, const std::vector<int>& labels, int blank);

// Incremental CTC prefix probability for joint beam search.
class PrefixScorer {
 public:
  struct State {
    Vector nonblank;  // log prob of prefix ending in a label at frame t
    Vector blank;     // ... ending in blank at frame t
    int last = -1;
    Scalar prefix_score = 0.0;  // log P(prefix as a prefix of the output)
  };

  PrefixScorer(const Matrix& log_probs, int blank);

  State initial() const;
  State extend(const State& prefix, int token) const;
  // log P(prefix is the complete output).
  Scalar final_score(const State& prefix) const;

 private:
  Matrix log_probs_;
  int blank_;
};

}  // namespace stylevc::ctc

#endif  // STYLEVC_CTC_H_
