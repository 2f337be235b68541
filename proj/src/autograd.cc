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

#include "stylevc/autograd.h"

#include <cmath>
#include <string>

namespace stylevc::ag {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, std::string("autograd: ") + what);
}

void same_tape(Var a, Var b) { require(&a.tape() == &b.tape(), "operands live on different tapes"); }

bool needs(Var v) { return v.tape().requires_grad(v.id()); }

Matrix row_softmax(const Matrix& x) {
  Matrix y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  y.array().colwise() /= y.rowwise().sum().array();
  return y;
}

Matrix row_log_softmax(const Matrix& x) {
  const Vector max = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - max;
  const Vector lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

Scalar Var::item() const {
  require(rows() == 1 && cols() == 1, "item() on a non-scalar");
  return value()(0, 0);
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(const Matrix& parameter) {
  const auto it = params_.find(&parameter);
  if (it != params_.end()) return Var(this, it->second);
  Var v = push(parameter, true, nullptr);
  params_.emplace(&parameter, v.id());
  return v;
}

Matrix& Tape::grad_buffer(int id) {
  Node& node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  require(root.valid() && &root.tape() == this, "backward root from another tape");
  require(root.rows() == 1 && root.cols() == 1, "backward root must be a scalar");
  if (!record_) throw Error(ErrorCode::kInvalidArgument, "backward on a non-recording tape");
  for (auto& node : nodes_) node.grad.resize(0, 0);
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (int id = root.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.backward && node.grad.size() != 0) node.backward(*this, node.grad, node.value);
  }
}

Matrix Tape::gradient_of(const Matrix& parameter) const {
  const auto it = params_.find(&parameter);
  if (it == params_.end() || nodes_[it->second].grad.size() == 0) {
    return Matrix::Zero(parameter.rows(), parameter.cols());
  }
  return nodes_[it->second].grad;
}

Var add(Var a, Var b) {
  same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() + b.value(), needs(a) || needs(b),
                       [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, g);
                       });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() - b.value(), needs(a) || needs(b),
                       [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, -g);
                       });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), needs(a) || needs(b),
                       [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                         if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                         if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                       });
}

Var scale(Var a, Scalar s) {
  const int ia = a.id();
  return a.tape().push(a.value() * s, needs(a),
                       [ia, s](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(ia, g * s); });
}

Var add_scalar(Var a, Scalar s) {
  const int ia = a.id();
  return a.tape().push(a.value().array() + s, needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(ia, g); });
}

Var add_row(Var a, Var row) {
  same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape mismatch");
  const int ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().push(std::move(out), needs(a) || needs(row),
                       [ia, ir](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, g);
                         if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
                       });
}

Var mul_col(Var a, Var col) {
  same_tape(a, col);
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col shape mismatch");
  const int ia = a.id(), ic = col.id();
  Matrix out = a.value();
  out.array().colwise() *= col.value().col(0).array();
  return a.tape().push(std::move(out), needs(a) || needs(col),
                       [ia, ic](Tape& t, const Matrix& g, const Matrix&) {
                         if (t.requires_grad(ia)) {
                           Matrix ga = g;
                           ga.array().colwise() *= t.value(ic).col(0).array();
                           t.accumulate(ia, ga);
                         }
                         if (t.requires_grad(ic)) t.accumulate(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
                       });
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  require(a.cols() == b.rows(), "matmul inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() * b.value(), needs(a) || needs(b),
                       [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                         if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                         if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                       });
}

Var transpose(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().transpose(), needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(ia, g.transpose()); });
}

Var tanh(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().tanh().matrix(), needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix& y) {
                         t.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
                       });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().push(std::move(y), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate(ia, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var relu(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().cwiseMax(0.0), needs(a), [ia](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(g, 0.0));
  });
}

Var exp(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().exp().matrix(), needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix& y) { t.accumulate(ia, g.cwiseProduct(y)); });
}

Var log(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().log().matrix(), needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, g.cwiseQuotient(t.value(ia)));
                       });
}

Var square(Var a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().square().matrix(), needs(a),
                       [ia](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, 2.0 * g.cwiseProduct(t.value(ia)));
                       });
}

Var softmax_rows(Var a) {
  const int ia = a.id();
  return a.tape().push(row_softmax(a.value()), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    const Vector dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, (y.array() * (g.colwise() - dot).array()).matrix());
  });
}

Var log_softmax_rows(Var a) {
  const int ia = a.id();
  return a.tape().push(row_log_softmax(a.value()), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix p = y.array().exp().matrix();
    p.array().colwise() *= g.rowwise().sum().array();
    t.accumulate(ia, g - p);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  Tape& tape = parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool grad = false;
  for (const Var& p : parts) {
    require(&p.tape() == &tape && p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
    grad = grad || needs(p);
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return tape.push(std::move(out), grad, [layout](Tape& t, const Matrix& g, const Matrix&) {
    for (const auto& [id, off] : layout) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(off, t.value(id).cols()));
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  Tape& tape = parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool grad = false;
  for (const Var& p : parts) {
    require(&p.tape() == &tape && p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
    grad = grad || needs(p);
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.rows();
  }
  return tape.push(std::move(out), grad, [layout](Tape& t, const Matrix& g, const Matrix&) {
    for (const auto& [id, off] : layout) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleRows(off, t.value(id).rows()));
    }
  });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows out of range");
  const int ia = a.id();
  return a.tape().push(a.value().middleRows(begin, count), needs(a),
                       [ia, begin, count](Tape& t, const Matrix& g, const Matrix&) {
                         t.grad_buffer(ia).middleRows(begin, count) += g;
                       });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols out of range");
  const int ia = a.id();
  return a.tape().push(a.value().middleCols(begin, count), needs(a),
                       [ia, begin, count](Tape& t, const Matrix& g, const Matrix&) {
                         t.grad_buffer(ia).middleCols(begin, count) += g;
                       });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  const int ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, index](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& buf = t.grad_buffer(ia);
    for (std::size_t i = 0; i < index.size(); ++i) buf.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a.value().size(), "reshape size mismatch");
  const int ia = a.id();
  const Eigen::Index in_rows = a.rows(), in_cols = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.tape().push(std::move(out), needs(a), [ia, in_rows, in_cols](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, Eigen::Map<const Matrix>(g.data(), in_rows, in_cols));
  });
}

Var sum(Var a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape().push(Matrix::Constant(1, 1, a.value().sum()), needs(a),
                       [ia, r, c](Tape& t, const Matrix& g, const Matrix&) {
                         t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
                       });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<Scalar>(a.value().size()));
}

Var mean_rows(Var a) {
  require(a.rows() > 0, "mean_rows of an empty matrix");
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  return a.tape().push(a.value().colwise().mean(), needs(a), [ia, r](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, g.replicate(r, 1) / static_cast<Scalar>(r));
  });
}

Var max_pool_rows(Var a, int width, int stride) {
  require(width >= 1 && stride >= 1, "pool width and stride must be positive");
  const Eigen::Index rows = a.rows(), cols = a.cols();
  const Eigen::Index out_rows = (rows + stride - 1) / stride;
  Matrix out(out_rows, cols);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(out_rows * cols));
  const Matrix& x = a.value();
  for (Eigen::Index o = 0; o < out_rows; ++o) {
    const Eigen::Index begin = o * stride;
    const Eigen::Index end = std::min<Eigen::Index>(rows, begin + width);
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = begin;
      for (Eigen::Index r = begin + 1; r < end; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      out(o, c) = x(best, c);
      argmax[static_cast<std::size_t>(o * cols + c)] = best;
    }
  }
  const int ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, argmax, cols](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& buf = t.grad_buffer(ia);
    for (Eigen::Index o = 0; o < g.rows(); ++o) {
      for (Eigen::Index c = 0; c < cols; ++c) buf(argmax[static_cast<std::size_t>(o * cols + c)], c) += g(o, c);
    }
  });
}

Var unfold_rows(Var a, int kernel) {
  require(kernel >= 1, "kernel must be positive");
  const Eigen::Index rows = a.rows(), cols = a.cols();
  const int left = (kernel - 1) / 2;
  Matrix out = Matrix::Zero(rows, kernel * cols);
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index src = t + k - left;
      if (src >= 0 && src < rows) out.block(t, k * cols, 1, cols) = a.value().row(src);
    }
  }
  const int ia = a.id();
  return a.tape().push(std::move(out), needs(a), [ia, kernel, left, cols](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& buf = t.grad_buffer(ia);
    const Eigen::Index rows = buf.rows();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (int k = 0; k < kernel; ++k) {
        const Eigen::Index src = r + k - left;
        if (src >= 0 && src < rows) buf.row(src) += g.block(r, k * cols, 1, cols);
      }
    }
  });
}

Var layer_norm(Var a, Var gamma, Var beta, Scalar eps) {
  same_tape(a, gamma);
  same_tape(a, beta);
  require(gamma.rows() == 1 && gamma.cols() == a.cols() && beta.rows() == 1 && beta.cols() == a.cols(),
          "layer_norm parameter shape mismatch");
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Vector inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mu = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ia = a.id(), ig = gamma.id(), ib = beta.id();
  return a.tape().push(std::move(out), needs(a) || needs(gamma) || needs(beta),
                       [ia, ig, ib, xhat, inv_std](Tape& t, const Matrix& g, const Matrix&) {
                         if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                         if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                         if (!t.requires_grad(ia)) return;
                         Matrix dxhat = g;
                         dxhat.array().rowwise() *= t.value(ig).row(0).array();
                         const Vector m1 = dxhat.rowwise().mean();
                         const Vector m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                         Matrix dx = dxhat.colwise() - m1;
                         dx -= (xhat.array().colwise() * m2.array()).matrix();
                         dx.array().colwise() *= inv_std.array();
                         t.accumulate(ia, dx);
                       });
}

Var cross_entropy_sum(Var logits, const std::vector<int>& targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "one target per row required");
  const Matrix logp = row_log_softmax(logits.value());
  Scalar loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    require(targets[r] >= 0 && targets[r] < logits.cols(), "target index out of range");
    loss -= logp(static_cast<Eigen::Index>(r), targets[r]);
  }
  const int il = logits.id();
  return logits.tape().push(Matrix::Constant(1, 1, loss), needs(logits),
                            [il, logp, targets](Tape& t, const Matrix& g, const Matrix&) {
                              Matrix grad = logp.array().exp().matrix();
                              for (std::size_t r = 0; r < targets.size(); ++r) {
                                grad(static_cast<Eigen::Index>(r), targets[r]) -= 1.0;
                              }
                              t.accumulate(il, grad * g(0, 0));
                            });
}

Var mse(Var a, const Matrix& target) {
  require(a.rows() == target.rows() && a.cols() == target.cols(), "mse shape mismatch");
  require(target.size() > 0, "mse of empty matrices");
  Matrix diff = a.value() - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  const Scalar loss = diff.squaredNorm() / n;
  const int ia = a.id();
  return a.tape().push(Matrix::Constant(1, 1, loss), needs(a), [ia, diff, n](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, diff * (2.0 * g(0, 0) / n));
  });
}

}  // namespace stylevc::ag
