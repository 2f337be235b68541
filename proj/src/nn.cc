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

#include "stylevc/nn.h"

#include <cmath>

namespace stylevc::nn {

namespace {

Eigen::ArrayXXd sigmoid_of(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

}  // namespace

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(int in, int out, Rng& rng) : weight(xavier(in, out, rng)), bias(Matrix::Zero(1, out)) {}

Var Linear::operator()(Tape& tape, Var x) const {
  return ag::add_row(ag::matmul(x, tape.param(weight)), tape.param(bias));
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Embedding::Embedding(int vocab, int dim, Rng& rng) {
  std::normal_distribution<Scalar> dist(0.0, 1.0 / std::sqrt(static_cast<Scalar>(dim)));
  table.resize(vocab, dim);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = dist(rng);
}

Var Embedding::operator()(Tape& tape, const std::vector<int>& ids) const {
  for (int id : ids) {
    if (id < 0 || id >= table.rows()) {
      throw Error(ErrorCode::kInvalidInput, "token index " + std::to_string(id) + " outside embedding table");
    }
  }
  return ag::gather_rows(tape.param(table), ids);
}

void Embedding::collect(const std::string& prefix, ParamList& out) { out.push_back({prefix + ".table", &table}); }

LayerNorm::LayerNorm(int dim) : gamma(Matrix::Ones(1, dim)), beta(Matrix::Zero(1, dim)) {}

Var LayerNorm::operator()(Tape& tape, Var x) const {
  return ag::layer_norm(x, tape.param(gamma), tape.param(beta));
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
}

Conv1d::Conv1d(int in, int out, int kernel_size, Rng& rng)
    : weight(xavier(static_cast<Eigen::Index>(kernel_size) * in, out, rng)),
      bias(Matrix::Zero(1, out)),
      kernel(kernel_size) {}

Var Conv1d::operator()(Tape& tape, Var x) const {
  const Var cols = kernel == 1 ? x : ag::unfold_rows(x, kernel);
  return ag::add_row(ag::matmul(cols, tape.param(weight)), tape.param(bias));
}

void Conv1d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Var lstm_cell(Var gates, Var cell) {
  const Eigen::Index h = cell.cols();
  if (gates.cols() != 4 * h || gates.rows() != cell.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "lstm_cell shape mismatch");
  }
  const Eigen::ArrayXXd a = gates.value().array();
  const Eigen::ArrayXXd i = sigmoid_of(a.middleCols(0, h));
  const Eigen::ArrayXXd f = sigmoid_of(a.middleCols(h, h));
  const Eigen::ArrayXXd u = a.middleCols(2 * h, h).tanh();
  const Eigen::ArrayXXd o = sigmoid_of(a.middleCols(3 * h, h));
  const Eigen::ArrayXXd c_prev = cell.value().array();
  const Eigen::ArrayXXd c = f * c_prev + i * u;
  const Eigen::ArrayXXd tc = c.tanh();
  Matrix out(cell.rows(), 2 * h);
  out.leftCols(h) = (o * tc).matrix();
  out.rightCols(h) = c.matrix();

  Tape& tape = gates.tape();
  const int ig = gates.id(), ic = cell.id();
  const bool grad = tape.requires_grad(ig) || tape.requires_grad(ic);
  return tape.push(std::move(out), grad, [=](Tape& t, const Matrix& g, const Matrix&) {
    const Eigen::ArrayXXd gh = g.leftCols(h).array();
    const Eigen::ArrayXXd dc = g.rightCols(h).array() + gh * o * (1.0 - tc.square());
    if (t.requires_grad(ig)) {
      Matrix da(g.rows(), 4 * h);
      da.middleCols(0, h) = (dc * u * i * (1.0 - i)).matrix();
      da.middleCols(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
      da.middleCols(2 * h, h) = (dc * i * (1.0 - u.square())).matrix();
      da.middleCols(3 * h, h) = (gh * tc * o * (1.0 - o)).matrix();
      t.accumulate(ig, da);
    }
    if (t.requires_grad(ic)) t.accumulate(ic, (dc * f).matrix());
  });
}

Lstm::Lstm(int in, int hidden_size, Rng& rng)
    : w_input(xavier(in, 4 * hidden_size, rng)),
      w_hidden(xavier(hidden_size, 4 * hidden_size, rng)),
      bias(Matrix::Zero(1, 4 * hidden_size)),
      hidden(hidden_size) {
  bias.middleCols(hidden, hidden).setOnes();  // forget gate
}

Lstm::State Lstm::initial(Tape& tape) const {
  return {tape.constant(Matrix::Zero(1, hidden)), tape.constant(Matrix::Zero(1, hidden))};
}

Var Lstm::project(Tape& tape, Var x) const {
  return ag::add_row(ag::matmul(x, tape.param(w_input)), tape.param(bias));
}

Lstm::State Lstm::step(Tape& tape, Var projected_row, const State& state) const {
  const Var gates = ag::add(projected_row, ag::matmul(state.h, tape.param(w_hidden)));
  const Var hc = lstm_cell(gates, state.c);
  return {ag::slice_cols(hc, 0, hidden), ag::slice_cols(hc, hidden, hidden)};
}

Var Lstm::run(Tape& tape, Var x, bool reverse) const {
  const Var projected = project(tape, x);
  const Eigen::Index steps = x.rows();
  std::vector<Var> outputs(static_cast<std::size_t>(steps));
  State state = initial(tape);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    state = step(tape, ag::slice_rows(projected, t, 1), state);
    outputs[static_cast<std::size_t>(t)] = state.h;
  }
  return ag::concat_rows(outputs);
}

void Lstm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_hidden", &w_hidden});
  out.push_back({prefix + ".bias", &bias});
}

BiLstm::BiLstm(int in, int hidden, Rng& rng) : fw(in, hidden, rng), bw(in, hidden, rng) {}

Var BiLstm::operator()(Tape& tape, Var x) const {
  return ag::concat_cols({fw.run(tape, x, false), bw.run(tape, x, true)});
}

void BiLstm::collect(const std::string& prefix, ParamList& out) {
  fw.collect(prefix + ".fw", out);
  bw.collect(prefix + ".bw", out);
}

Gru::Gru(int in, int hidden_size, Rng& rng)
    : w_input(xavier(in, 3 * hidden_size, rng)),
      w_hidden(xavier(hidden_size, 3 * hidden_size, rng)),
      b_input(Matrix::Zero(1, 3 * hidden_size)),
      b_hidden(Matrix::Zero(1, 3 * hidden_size)),
      hidden(hidden_size) {}

Var Gru::run(Tape& tape, Var x, bool reverse) const {
  const Var projected = ag::add_row(ag::matmul(x, tape.param(w_input)), tape.param(b_input));
  const Var wh = tape.param(w_hidden);
  const Var bh = tape.param(b_hidden);
  const Eigen::Index steps = x.rows();
  const int h = hidden;
  std::vector<Var> outputs(static_cast<std::size_t>(steps));
  Var state = tape.constant(Matrix::Zero(1, h));
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    const Var xi = ag::slice_rows(projected, t, 1);
    const Var hh = ag::add_row(ag::matmul(state, wh), bh);
    const Var r = ag::sigmoid(ag::add(ag::slice_cols(xi, 0, h), ag::slice_cols(hh, 0, h)));
    const Var z = ag::sigmoid(ag::add(ag::slice_cols(xi, h, h), ag::slice_cols(hh, h, h)));
    const Var n = ag::tanh(ag::add(ag::slice_cols(xi, 2 * h, h), ag::mul(r, ag::slice_cols(hh, 2 * h, h))));
    // h' = n + z * (h - n)
    state = ag::add(n, ag::mul(z, ag::sub(state, n)));
    outputs[static_cast<std::size_t>(t)] = state;
  }
  return ag::concat_rows(outputs);
}

void Gru::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_hidden", &w_hidden});
  out.push_back({prefix + ".b_input", &b_input});
  out.push_back({prefix + ".b_hidden", &b_hidden});
}

BiGru::BiGru(int in, int hidden, Rng& rng) : fw(in, hidden, rng), bw(in, hidden, rng) {}

Var BiGru::operator()(Tape& tape, Var x) const {
  return ag::concat_cols({fw.run(tape, x, false), bw.run(tape, x, true)});
}

void BiGru::collect(const std::string& prefix, ParamList& out) {
  fw.collect(prefix + ".fw", out);
  bw.collect(prefix + ".bw", out);
}

MultiHeadAttention::MultiHeadAttention(int width, int num_heads, Rng& rng)
    : query(width, width, rng),
      key(width, width, rng),
      value(width, width, rng),
      output(width, width, rng),
      heads(num_heads) {
  if (num_heads < 1 || width % num_heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, "attention heads must divide the model width");
  }
}

Var MultiHeadAttention::operator()(Tape& tape, Var q, Var memory, const Matrix* mask,
                                   std::vector<Var>* weights) const {
  const Var qp = query(tape, q);
  const Var kp = key(tape, memory);
  const Var vp = value(tape, memory);
  const int width = query.out_features();
  const int dim = width / heads;
  const Scalar scaling = 1.0 / std::sqrt(static_cast<Scalar>(dim));
  const Var mask_var = mask ? tape.constant(*mask) : Var();
  std::vector<Var> per_head;
  per_head.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(qp, h * dim, dim);
    const Var kh = ag::slice_cols(kp, h * dim, dim);
    const Var vh = ag::slice_cols(vp, h * dim, dim);
    Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), scaling);
    if (mask) scores = ag::add(scores, mask_var);
    const Var attn = ag::softmax_rows(scores);
    if (weights) weights->push_back(attn);
    per_head.push_back(ag::matmul(attn, vh));
  }
  return output(tape, heads == 1 ? per_head.front() : ag::concat_cols(per_head));
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

Highway::Highway(int width, Rng& rng) : transform(width, width, rng), gate(width, width, rng) {
  gate.bias.setConstant(-1.0);
}

Var Highway::operator()(Tape& tape, Var x) const {
  const Var h = ag::relu(transform(tape, x));
  const Var t = ag::sigmoid(gate(tape, x));
  // t * h + (1 - t) * x = x + t * (h - x)
  return ag::add(x, ag::mul(t, ag::sub(h, x)));
}

void Highway::collect(const std::string& prefix, ParamList& out) {
  transform.collect(prefix + ".transform", out);
  gate.collect(prefix + ".gate", out);
}

Matrix sinusoidal_positions(Eigen::Index rows, int width) {
  Matrix pe(rows, width);
  for (Eigen::Index pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < width; ++i) {
      const Scalar rate = std::pow(10000.0, -static_cast<Scalar>(2 * (i / 2)) / width);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

Matrix causal_mask(Eigen::Index size) {
  Matrix mask = Matrix::Zero(size, size);
  for (Eigen::Index r = 0; r < size; ++r) {
    for (Eigen::Index c = r + 1; c < size; ++c) mask(r, c) = -1e9;
  }
  return mask;
}

}  // namespace stylevc::nn
