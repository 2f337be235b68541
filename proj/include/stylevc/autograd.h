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

#ifndef STYLEVC_AUTOGRAD_H_
#define STYLEVC_AUTOGRAD_H_

#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "stylevc/common.h"

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to its Vars. Parameters are plain
// Matrix members of the model; Tape::param() registers one as a leaf (once
// per tape) and Tape::gradient_of() returns its accumulated gradient after
// backward(). A tape built with record = false keeps values only and is the
// inference path.
namespace stylevc::ag {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar item() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Receives the node's accumulated gradient and its forward value.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  Var param(const Matrix& parameter);

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);

  // Zero matrix of the parameter's shape when it did not take part.
  Matrix gradient_of(const Matrix& parameter) const;

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Used by op implementations.
  Var push(Matrix value, bool requires_grad, BackwardFn backward);
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& grad) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = grad;
    } else {
      node.grad += grad;
    }
  }
  Matrix& grad_buffer(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Matrix*, int> params_;
};

// Elementwise arithmetic (equal shapes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Scalar s);
Var add_scalar(Var a, Scalar s);
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// a (R x C) + row (1 x C) broadcast over rows.
Var add_row(Var a, Var row);
// a (R x C) * col (R x 1) broadcast over columns.
Var mul_col(Var a, Var col);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
// out.row(i) = a.row(index[i]); gradients scatter-add back.
Var gather_rows(Var a, const std::vector<int>& index);
// Row-major reshape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

Var sum(Var a);
Var mean(Var a);
// Mean over rows: R x C -> 1 x C.
Var mean_rows(Var a);

// out.row(t) = max over rows [t * stride, t * stride + width) clipped to the
// input; ceil(R / stride) output rows.
Var max_pool_rows(Var a, int width, int stride);

// Zero-padded "same" unfolding for 1-D convolution over rows:
// R x C -> R x (kernel * C), row t holds input rows t - (kernel - 1) / 2 ... .
Var unfold_rows(Var a, int kernel);

Var layer_norm(Var a, Var gamma, Var beta, Scalar eps = 1e-5);

// Sum over rows of -log softmax(logits)[t, targets[t]].
Var cross_entropy_sum(Var logits, const std::vector<int>& targets);

// mean((a - target)^2) over all entries.
Var mse(Var a, const Matrix& target);

}  // namespace stylevc::ag

#endif  // STYLEVC_AUTOGRAD_H_
