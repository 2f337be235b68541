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

#include "stylevc/optim.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

namespace stylevc {

Scalar TrainSchedule::learning_rate(long long step) const {
  const auto s = static_cast<Scalar>(step + 1);
  if (warmup_steps <= 0) return peak_lr;
  const auto w = static_cast<Scalar>(warmup_steps);
  return peak_lr * std::min(s / w, std::sqrt(w / s));
}

FlatConfig TrainSchedule::to_flat() const {
  FlatConfig flat;
  flat.set("steps", steps);
  flat.set("batch_size", batch_size);
  flat.set("peak_lr", peak_lr);
  flat.set("warmup_steps", warmup_steps);
  flat.set("clip_norm", clip_norm);
  flat.set("adam_beta1", adam_beta1);
  flat.set("adam_beta2", adam_beta2);
  flat.set("adam_eps", adam_eps);
  flat.set("seed", static_cast<long long>(seed));
  return flat;
}

TrainSchedule TrainSchedule::from_flat(const FlatConfig& flat) {
  TrainSchedule s;
  s.steps = flat.get_int("steps", s.steps);
  s.batch_size = static_cast<int>(flat.get_int("batch_size", s.batch_size));
  s.peak_lr = flat.get_double("peak_lr", s.peak_lr);
  s.warmup_steps = flat.get_int("warmup_steps", s.warmup_steps);
  s.clip_norm = flat.get_double("clip_norm", s.clip_norm);
  s.adam_beta1 = flat.get_double("adam_beta1", s.adam_beta1);
  s.adam_beta2 = flat.get_double("adam_beta2", s.adam_beta2);
  s.adam_eps = flat.get_double("adam_eps", s.adam_eps);
  s.seed = static_cast<std::uint64_t>(flat.get_int("seed", static_cast<long long>(s.seed)));
  if (s.steps < 0 || s.batch_size < 1 || !(s.peak_lr > 0)) {
    throw Error(ErrorCode::kInvalidConfig, "schedule needs steps >= 0, batch_size >= 1, peak_lr > 0");
  }
  return s;
}

void Adam::step(const nn::ParamList& params, const std::vector<Matrix>& grads, Scalar lr) {
  if (grads.size() != params.size()) throw Error(ErrorCode::kInvalidArgument, "gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorCode::kInvalidArgument, "parameter set changed under Adam");
  ++t_;
  const Scalar c1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar c2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    params[i].value->array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::vector<Matrix> zero_gradients(const nn::ParamList& params) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
  return grads;
}

void accumulate_gradients(const ag::Tape& tape, const nn::ParamList& params, std::vector<Matrix>& grads) {
  for (std::size_t i = 0; i < params.size(); ++i) grads[i] += tape.gradient_of(*params[i].value);
}

Scalar clip_gradients(std::vector<Matrix>& grads, Scalar max_norm) {
  Scalar sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const Scalar norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    for (auto& g : grads) g *= max_norm / norm;
  }
  return norm;
}

std::vector<StepRecord> run_training(const nn::ParamList& params, const TrainSchedule& schedule,
                                     std::size_t dataset_size, long long& step_counter,
                                     const std::function<StepLoss(ag::Tape&, std::size_t)>& loss,
                                     const std::function<std::string(std::size_t)>& describe) {
  if (dataset_size == 0) throw Error(ErrorCode::kInvalidInput, "empty training set");
  std::vector<StepRecord> log;
  log.reserve(static_cast<std::size_t>(std::max(0LL, schedule.steps)));
  Adam adam(schedule);
  nn::Rng rng(schedule.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::vector<std::size_t> order(dataset_size);
  std::size_t cursor = order.size();
  for (long long step = 0; step < schedule.steps; ++step) {
    auto grads = zero_gradients(params);
    StepRecord row;
    row.step = step_counter;
    for (int b = 0; b < schedule.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        cursor = 0;
      }
      const std::size_t index = order[cursor++];
      ag::Tape tape;
      const StepLoss l = loss(tape, index);
      const Scalar value = l.total.item();
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kDivergence,
                    "non-finite loss at step " + std::to_string(step_counter) + " on " + describe(index));
      }
      tape.backward(l.total);
      accumulate_gradients(tape, params, grads);
      row.total += value;
      row.terms.resize(l.terms.size(), 0.0);
      for (std::size_t k = 0; k < l.terms.size(); ++k) row.terms[k] += l.terms[k].item();
    }
    const Scalar inv = 1.0 / schedule.batch_size;
    for (auto& g : grads) g *= inv;
    row.total *= inv;
    for (auto& t : row.terms) t *= inv;
    clip_gradients(grads, schedule.clip_norm);
    adam.step(params, grads, schedule.learning_rate(step_counter));
    ++step_counter;
    if ((step + 1) % 100 == 0) spdlog::debug("step {} loss {:.5f}", step_counter, row.total);
    log.push_back(std::move(row));
  }
  return log;
}

void write_training_log(const std::string& path, const std::vector<std::string>& term_names,
                        const std::vector<StepRecord>& log) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "step,total";
  for (const auto& n : term_names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (const auto& r : log) {
    out << r.step;
    std::snprintf(buf, sizeof(buf), ",%.17g", r.total);
    out << buf;
    for (Scalar t : r.terms) {
      std::snprintf(buf, sizeof(buf), ",%.17g", t);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

constexpr char kArchiveMagic[8] = {'S', 'T', 'V', 'C', 'P', 'A', 'R', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kIo, path + ": truncated parameter archive");
  return value;
}

}  // namespace

void save_parameters(const std::string& path, const nn::ParamList& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(kArchiveMagic, sizeof(kArchiveMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value->cols()));
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(p.value->size() * sizeof(Scalar)));
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

void load_parameters(const std::string& path, const nn::ParamList& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kInvalidInput, path + " is not a parameter archive");
  }
  std::map<std::string, Matrix*> wanted;
  for (const auto& p : params) wanted[p.name] = p.value;
  std::map<std::string, bool> seen;
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(get<std::uint32_t>(in, path), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    Matrix value(rows, cols);
    in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(Scalar)));
    if (!in) throw Error(ErrorCode::kIo, path + ": truncated parameter archive");
    const auto it = wanted.find(name);
    if (it == wanted.end()) throw Error(ErrorCode::kInvalidInput, path + ": unexpected parameter " + name);
    if (it->second->rows() != value.rows() || it->second->cols() != value.cols()) {
      throw Error(ErrorCode::kInvalidInput, path + ": shape mismatch for " + name);
    }
    *it->second = std::move(value);
    seen[name] = true;
  }
  for (const auto& p : params) {
    if (!seen.count(p.name)) throw Error(ErrorCode::kInvalidInput, path + ": missing parameter " + p.name);
  }
}

}  // namespace stylevc
