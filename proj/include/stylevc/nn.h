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

#ifndef STYLEVC_NN_H_
#define STYLEVC_NN_H_

#include <random>
#include <string>
#include <vector>

#include "stylevc/autograd.h"

// Layers hold their parameters by value; collect() exposes them by name for
// the optimizer and the checkpoint archive.
namespace stylevc::nn {

using ag::Tape;
using ag::Var;
using Rng = std::mt19937_64;

struct ParamRef {
  std::string name;
  Matrix* value;
};
using ParamList = std::vector<ParamRef>;

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng);

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  int in_features() const { return static_cast<int>(weight.rows()); }
  int out_features() const { return static_cast<int>(weight.cols()); }
  void collect(const std::string& prefix, ParamList& out);
};

struct Embedding {
  Matrix table;  // vocab x dim

  Embedding() = default;
  Embedding(int vocab, int dim, Rng& rng);
  Var operator()(Tape& tape, const std::vector<int>& ids) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct LayerNorm {
  Matrix gamma;
  Matrix beta;

  LayerNorm() = default;
  explicit LayerNorm(int dim);
  Var operator()(Tape& tape, Var x) const;
  void collect(const std::string& prefix, ParamList& out);
};

// "Same"-padded 1-D convolution over time; channels are columns.
struct Conv1d {
  Matrix weight;  // (kernel * in) x out
  Matrix bias;
  int kernel = 1;

  Conv1d() = default;
  Conv1d(int in, int out, int kernel, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  void collect(const std::string& prefix, ParamList& out);
};

// Fused LSTM cell: gates (R x 4H, order i f g o) and previous cell (R x H)
// to [h | c] (R x 2H).
Var lstm_cell(Var gates, Var cell);

struct Lstm {
  Matrix w_input;   // in x 4H
  Matrix w_hidden;  // H x 4H
  Matrix bias;      // 1 x 4H
  int hidden = 0;

  struct State {
    Var h;
    Var c;
  };

  Lstm() = default;
  Lstm(int in, int hidden, Rng& rng);
  State initial(Tape& tape) const;
  // Input-side gate pre-activations x * W + b for a whole sequence.
  Var project(Tape& tape, Var x) const;
  State step(Tape& tape, Var projected_row, const State& state) const;
  Var run(Tape& tape, Var x, bool reverse = false) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct BiLstm {
  Lstm fw;
  Lstm bw;

  BiLstm() = default;
  BiLstm(int in, int hidden, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct Gru {
  Matrix w_input;   // in x 3H (order r z n)
  Matrix w_hidden;  // H x 3H
  Matrix b_input;
  Matrix b_hidden;
  int hidden = 0;

  Gru() = default;
  Gru(int in, int hidden, Rng& rng);
  Var run(Tape& tape, Var x, bool reverse = false) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct BiGru {
  Gru fw;
  Gru bw;

  BiGru() = default;
  BiGru(int in, int hidden, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(int width, int heads, Rng& rng);
  // `mask` is added to the (Tq x Tk) scores of every head when non-null.
  // `weights`, when non-null, receives each head's Tq x Tk attention matrix.
  Var operator()(Tape& tape, Var q, Var memory, const Matrix* mask = nullptr,
                 std::vector<Var>* weights = nullptr) const;
  void collect(const std::string& prefix, ParamList& out);
};

struct Highway {
  Linear transform;
  Linear gate;

  Highway() = default;
  Highway(int width, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  void collect(const std::string& prefix, ParamList& out);
};

// rows x width additive sinusoidal position table.
Matrix sinusoidal_positions(Eigen::Index rows, int width);

// 0 on and below the diagonal, -1e9 above.
Matrix causal_mask(Eigen::Index size);

}  // namespace stylevc::nn

#endif  // STYLEVC_NN_H_
