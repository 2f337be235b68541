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

#include <filesystem>
#include <random>

#include "doctest.h"
#include "stylevc/corpus.h"
#include "stylevc/features.h"
#include "stylevc/recognizer.h"
#include "support/gradcheck.h"

using namespace stylevc;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

PhonemeInventory three_symbols() { return PhonemeInventory({"a", "b", "c"}); }

RecognizerConfig micro_config() {
  RecognizerConfig cfg;
  cfg.model_width = 8;
  cfg.ffn_width = 16;
  cfg.attention_heads = 2;
  cfg.encoder_blocks = 1;
  cfg.decoder_blocks = 1;
  cfg.frontend_channels = 4;
  cfg.n_mels = 5;
  return cfg;
}

RecognizerConfig small_config() {
  RecognizerConfig cfg;
  cfg.model_width = 32;
  cfg.ffn_width = 64;
  cfg.attention_heads = 4;
  cfg.encoder_blocks = 2;
  cfg.decoder_blocks = 1;
  cfg.frontend_channels = 16;
  return cfg;
}

std::vector<RecognizerExample> toy_examples(const ToyCorpus& corpus) {
  FeatureConfig fc;
  std::vector<RecognizerExample> out;
  for (const auto& u : corpus.utterances) {
    out.push_back({u.record.id, utterance_mvn(compute_log_mel(u.wav, fc).frames), u.record.phonemes});
  }
  return out;
}

}  // namespace

TEST_CASE("encoder output length is ceil(T / factor)") {
  const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 1);
  CHECK(encode(random_matrix(40, 5, 1), ckpt).rows() == 10);
  CHECK(encode(random_matrix(41, 5, 1), ckpt).rows() == 11);
  CHECK(encode(random_matrix(4, 5, 1), ckpt).rows() == 1);
  CHECK(encode(random_matrix(40, 5, 1), ckpt).cols() == 8);
  CHECK(encode(random_matrix(40, 5, 2), ckpt) == encode(random_matrix(40, 5, 2), ckpt));
  try {
    encode(random_matrix(3, 5, 1), ckpt);
    FAIL("expected input-too-short");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInputTooShort);
  }
}

TEST_CASE("config validation and flat round trip") {
  RecognizerConfig cfg = small_config();
  cfg.lambda = 0.25;
  const auto back = RecognizerConfig::from_flat(cfg.to_flat());
  CHECK(back.lambda == 0.25);
  CHECK(back.model_width == 32);
  cfg.subsample_factor = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.attention_heads = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(RecognizerConfig().lambda == 0.3);
  CHECK(RecognizerConfig().encoder_blocks == 12);
  CHECK(RecognizerConfig().decoder_blocks == 6);
  CHECK(RecognizerConfig().attention_heads == 8);
  CHECK(RecognizerConfig().subsample_factor == 4);
}

TEST_CASE("hybrid loss endpoints and weighting") {
  const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 2);
  const Matrix mel = random_matrix(16, 5, 3);
  const PhonemeSequence y{{4, 5, 6}};
  const auto one = hybrid_loss(mel, y, ckpt, 1.0);
  CHECK(one.total == one.ctc_term);
  const auto zero = hybrid_loss(mel, y, ckpt, 0.0);
  CHECK(zero.total == zero.att_term);
  const auto mid = hybrid_loss(mel, y, ckpt, 0.3);
  CHECK(std::abs(mid.total - (0.3 * mid.ctc_term + 0.7 * mid.att_term)) < 1e-9);
  CHECK(mid.ctc_term >= 0.0);
  CHECK(mid.att_term >= 0.0);
  CHECK(combine_hybrid(0.3, 2.0, 1.0) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("hybrid loss is monotone in the ctc term") {
  for (double lambda : {0.1, 0.3, 0.7, 1.0}) {
    double previous = combine_hybrid(lambda, 0.0, 1.5);
    for (double ctc = 0.5; ctc < 10.0; ctc += 0.5) {
      const double now = combine_hybrid(lambda, ctc, 1.5);
      CHECK(now >= previous);
      previous = now;
    }
  }
}

TEST_CASE("hybrid loss rejects CTC-infeasible pairs") {
  const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 2);
  try {
    hybrid_loss(random_matrix(8, 5, 4), PhonemeSequence{{4, 5, 6}}, ckpt, 0.3);
    FAIL("expected infeasible-alignment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleAlignment);
  }
}

TEST_CASE("hybrid loss gradient matches central differences") {
  RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 5);
  const Matrix mel = random_matrix(12, 5, 6);
  const PhonemeSequence y{{4, 6}};
  const auto report = gradcheck::check(ckpt.parameters(), [&](ag::Tape& tape) {
    return hybrid_loss(tape, mel, y, ckpt, 0.3).total;
  });
  INFO(report.worst_parameter << "[" << report.worst_index << "] " << report.analytic << " vs " << report.numeric);
  CHECK(report.entries_checked > 500);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("zero-step training returns the initialization") {
  ToyCorpusOptions opts;
  opts.num_utterances = 3;
  const auto corpus = make_toy_corpus(opts);
  TrainSchedule schedule;
  schedule.steps = 0;
  schedule.seed = 9;
  auto trained = train_recognizer(toy_examples(corpus), small_config(), corpus.inventory, schedule);
  RecognizerCheckpoint init(small_config(), corpus.inventory, 9);
  const auto a = trained.checkpoint.parameters();
  const auto b = init.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].value == *b[i].value);
  CHECK(trained.checkpoint.step == 0);
  CHECK(trained.log.empty());
}

TEST_CASE("an infeasible example fails before the first step") {
  ToyCorpusOptions opts;
  opts.num_utterances = 2;
  const auto corpus = make_toy_corpus(opts);
  auto examples = toy_examples(corpus);
  examples[1].features = examples[1].features.topRows(4);
  TrainSchedule schedule;
  schedule.steps = 5;
  try {
    train_recognizer(examples, small_config(), corpus.inventory, schedule);
    FAIL("expected infeasible-alignment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleAlignment);
    CHECK(std::string(e.what()).find(examples[1].id) != std::string::npos);
  }
}

TEST_CASE("recognize rejects an empty beam") {
  const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 2);
  try {
    recognize(random_matrix(16, 5, 1), ckpt, 0);
    FAIL("expected invalid-argument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("beam search never scores below greedy") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), seed);
    const Matrix mel = random_matrix(20, 5, seed + 100);
    const auto greedy = recognize(mel, ckpt, 1);
    const auto beam = recognize(mel, ckpt, 4);
    if (!greedy.timed_out && !beam.timed_out) {
      CHECK(joint_score(mel, beam.phonemes, ckpt) >= joint_score(mel, greedy.phonemes, ckpt) - 1e-9);
    }
    CHECK(beam.phonemes.size() <= 2 * 5);
  }
}

TEST_CASE("label ownership of a viterbi path") {
  // states: blank, a, blank, b, b, blank
  CHECK(label_counts_from_path({0, 1, 2, 3, 3, 4}, 2) == std::vector<int>{3, 3});
  CHECK(label_counts_from_path({1, 1, 1}, 1) == std::vector<int>{3});
}

TEST_CASE("forced alignment covers every mel frame") {
  const RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 7);
  CHECK(ctc_force_align(random_matrix(8, 5, 1), PhonemeSequence{{5}}, ckpt).frames == std::vector<int>{8});
  for (int frames : {8, 9, 13, 22}) {
    const auto d = ctc_force_align(random_matrix(frames, 5, frames), PhonemeSequence{{4, 6}}, ckpt);
    CHECK(d.total() == frames);
    for (int f : d.frames) CHECK(f >= 1);
  }
  try {
    ctc_force_align(random_matrix(4, 5, 1), PhonemeSequence{{4, 6}}, ckpt);
    FAIL("expected alignment error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlignment);
  }
}

TEST_CASE("checkpoint save and load round trip") {
  RecognizerCheckpoint ckpt(micro_config(), three_symbols(), 11);
  ckpt.step = 17;
  const auto dir = (std::filesystem::temp_directory_path() / "stylevc_rec_ckpt").string();
  save_recognizer(dir, ckpt);
  const auto inv = three_symbols();
  auto back = load_recognizer(dir, &inv);
  CHECK(back.step == 17);
  const Matrix mel = random_matrix(12, 5, 1);
  CHECK(encode(mel, back) == encode(mel, ckpt));
  const PhonemeInventory other({"x", "y"});
  CHECK_THROWS_AS(load_recognizer(dir, &other), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("overfitting one utterance recovers its phonemes with greedy and beam search") {
  ToyCorpusOptions opts;
  opts.num_utterances = 1;
  opts.seed = 3;
  const auto corpus = make_toy_corpus(opts);
  const auto examples = toy_examples(corpus);
  TrainSchedule schedule;
  schedule.steps = 150;
  schedule.peak_lr = 3e-3;
  schedule.warmup_steps = 20;
  auto trained = train_recognizer(examples, small_config(), corpus.inventory, schedule);
  CHECK(trained.log.back().total < 0.2 * trained.log.front().total);
  const auto greedy = recognize(examples[0].features, trained.checkpoint, 1);
  const auto beam = recognize(examples[0].features, trained.checkpoint, 4);
  CHECK(greedy.phonemes == examples[0].phonemes);
  CHECK(beam.phonemes == examples[0].phonemes);
  const auto d = ctc_force_align(examples[0].features, examples[0].phonemes, trained.checkpoint);
  CHECK(d.total() == examples[0].features.rows());
}
