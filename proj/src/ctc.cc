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

#include "stylevc/ctc.h"

#include <cmath>
#include <limits>
#include <string>

namespace stylevc::ctc {

namespace {

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

Scalar log_add(Scalar a, Scalar b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const Scalar hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::vector<int> augment(const std::vector<int>& labels, int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t k = 0; k < labels.size(); ++k) ext[2 * k + 1] = labels[k];
  return ext;
}

// Whether state s may be entered from s - 2 (skipping a blank).
bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

void check_inputs(const Matrix& log_probs, const std::vector<int>& labels, int blank) {
  if (blank < 0 || blank >= log_probs.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "blank index outside the vocabulary");
  }
  for (int l : labels) {
    if (l < 0 || l >= log_probs.cols() || l == blank) {
      throw Error(ErrorCode::kInvalidArgument, "CTC label outside the vocabulary or equal to blank");
    }
  }
  if (!feasible(log_probs.rows(), labels)) {
    throw Error(ErrorCode::kInfeasibleAlignment,
                std::to_string(labels.size()) + " labels need " + std::to_string(min_frames(labels)) +
                    " frames, have " + std::to_string(log_probs.rows()));
  }
}

Matrix forward_table(const Matrix& lp, const std::vector<int>& ext, int blank) {
  const Eigen::Index frames = lp.rows();
  const auto states = ext.size();
  Matrix alpha = Matrix::Constant(frames, static_cast<Eigen::Index>(states), kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (states > 1) alpha(0, 1) = lp(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      Scalar acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(ext, s, blank)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + lp(t, ext[s]);
    }
  }
  return alpha;
}

Scalar total_from(const Matrix& alpha) {
  const Eigen::Index last = alpha.cols() - 1;
  Scalar total = alpha(alpha.rows() - 1, last);
  if (last >= 1) total = log_add(total, alpha(alpha.rows() - 1, last - 1));
  return total;
}

Matrix row_log_softmax(const Matrix& x) {
  const Vector max = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - max;
  const Vector lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

}  // namespace

int min_frames(const std::vector<int>& labels) {
  int frames = static_cast<int>(labels.size());
  for (std::size_t k = 1; k < labels.size(); ++k) {
    if (labels[k] == labels[k - 1]) ++frames;
  }
  return frames;
}

bool feasible(Eigen::Index frames, const std::vector<int>& labels) {
  return frames >= 1 && frames >= min_frames(labels);
}

Scalar log_likelihood(const Matrix& log_probs, const std::vector<int>& labels, int blank) {
  check_inputs(log_probs, labels, blank);
  return total_from(forward_table(log_probs, augment(labels, blank), blank));
}

ag::Var loss(ag::Var logits, const std::vector<int>& labels, int blank) {
  const Matrix lp = row_log_softmax(logits.value());
  check_inputs(lp, labels, blank);
  const auto ext = augment(labels, blank);
  const Matrix alpha = forward_table(lp, ext, blank);
  const Scalar log_p = total_from(alpha);
  ag::Tape& tape = logits.tape();
  const int il = logits.id();
  return tape.push(Matrix::Constant(1, 1, -log_p), tape.requires_grad(il),
                   [il, lp, ext, alpha, log_p, blank](ag::Tape& t, const Matrix& g, const Matrix&) {
                     const Eigen::Index frames = lp.rows();
                     const auto states = ext.size();
                     Matrix beta = Matrix::Constant(frames, static_cast<Eigen::Index>(states), kNegInf);
                     beta(frames - 1, states - 1) = lp(frames - 1, ext[states - 1]);
                     if (states > 1) beta(frames - 1, states - 2) = lp(frames - 1, ext[states - 2]);
                     for (Eigen::Index tt = frames - 2; tt >= 0; --tt) {
                       for (std::size_t s = 0; s < states; ++s) {
                         Scalar acc = beta(tt + 1, s);
                         if (s + 1 < states) acc = log_add(acc, beta(tt + 1, s + 1));
                         if (s + 2 < states && can_skip(ext, s + 2, blank)) acc = log_add(acc, beta(tt + 1, s + 2));
                         if (acc != kNegInf) beta(tt, s) = acc + lp(tt, ext[s]);
                       }
                     }
                     Matrix grad = lp.array().exp().matrix();
                     for (Eigen::Index tt = 0; tt < frames; ++tt) {
                       for (std::size_t s = 0; s < states; ++s) {
                         const Scalar a = alpha(tt, s), b = beta(tt, s);
                         if (a == kNegInf || b == kNegInf) continue;
                         grad(tt, ext[s]) -= std::exp(a + b - lp(tt, ext[s]) - log_p);
                       }
                     }
                     t.accumulate(il, grad * g(0, 0));
                   });
}

ViterbiPath viterbi(const Matrix& log_probs, const std::vector<int>& labels, int blank) {
  check_inputs(log_probs, labels, blank);
  const auto ext = augment(labels, blank);
  const Eigen::Index frames = log_probs.rows();
  const auto states = static_cast<Eigen::Index>(ext.size());
  Matrix score = Matrix::Constant(frames, states, kNegInf);
  Eigen::MatrixXi back = Eigen::MatrixXi::Constant(frames, states, -1);
  score(0, 0) = log_probs(0, ext[0]);
  if (states > 1) score(0, 1) = log_probs(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      Scalar best = score(t - 1, s);
      int from = static_cast<int>(s);
      if (s >= 1 && score(t - 1, s - 1) > best) {
        best = score(t - 1, s - 1);
        from = static_cast<int>(s - 1);
      }
      if (can_skip(ext, static_cast<std::size_t>(s), blank) && score(t - 1, s - 2) > best) {
        best = score(t - 1, s - 2);
        from = static_cast<int>(s - 2);
      }
      if (best == kNegInf) continue;
      score(t, s) = best + log_probs(t, ext[s]);
      back(t, s) = from;
    }
  }
  Eigen::Index end = states - 1;
  if (states > 1 && score(frames - 1, states - 2) > score(frames - 1, end)) end = states - 2;
  ViterbiPath path;
  path.log_prob = score(frames - 1, end);
  path.states.assign(static_cast<std::size_t>(frames), 0);
  int s = static_cast<int>(end);
  for (Eigen::Index t = frames - 1; t >= 0; --t) {
    path.states[static_cast<std::size_t>(t)] = s;
    if (t > 0) s = back(t, s);
  }
  return path;
}

PrefixScorer::PrefixScorer(const Matrix& log_probs, int blank) : log_probs_(log_probs), blank_(blank) {
  if (log_probs_.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "prefix scorer needs frames");
}

PrefixScorer::State PrefixScorer::initial() const {
  const Eigen::Index frames = log_probs_.rows();
  State state;
  state.nonblank = Vector::Constant(frames, kNegInf);
  state.blank.resize(frames);
  Scalar acc = 0.0;
  for (Eigen::Index t = 0; t < frames; ++t) {
    acc += log_probs_(t, blank_);
    state.blank(t) = acc;
  }
  state.prefix_score = 0.0;
  return state;
}

PrefixScorer::State PrefixScorer::extend(const State& prefix, int token) const {
  const Eigen::Index frames = log_probs_.rows();
  State out;
  out.last = token;
  out.nonblank = Vector::Constant(frames, kNegInf);
  out.blank = Vector::Constant(frames, kNegInf);
  if (prefix.last < 0) out.nonblank(0) = log_probs_(0, token);
  Scalar psi = out.nonblank(0);
  for (Eigen::Index t = 1; t < frames; ++t) {
    const Scalar phi = prefix.last == token ? prefix.blank(t - 1) : log_add(prefix.blank(t - 1), prefix.nonblank(t - 1));
    out.nonblank(t) = log_add(out.nonblank(t - 1), phi) + log_probs_(t, token);
    out.blank(t) = log_add(out.blank(t - 1), out.nonblank(t - 1)) + log_probs_(t, blank_);
    psi = log_add(psi, phi + log_probs_(t, token));
  }
  out.prefix_score = psi;
  return out;
}

Scalar PrefixScorer::final_score(const State& prefix) const {
  const Eigen::Index last = log_probs_.rows() - 1;
  return log_add(prefix.nonblank(last), prefix.blank(last));
}

}  // namespace stylevc::ctc
