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

// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance_test [criterion numbers...]

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "stylevc/conversion.h"
#include "stylevc/ctc.h"
#include "stylevc/evaluation.h"
#include "stylevc/features.h"
#include "stylevc/generator.h"
#include "stylevc/listening.h"
#include "stylevc/recognizer.h"
#include "support/gradcheck.h"
#include "support/oracles.h"
#include "support/toy_models.h"

using namespace stylevc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "stylevc_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

Verdict per_oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  int mismatches = 0;
  for (int pair = 0; pair < 200; ++pair) {
    const int alphabet = 1 + static_cast<int>(rng() % 10);
    auto draw = [&](int min_len) {
      std::vector<int> s(min_len + rng() % (13 - min_len));
      for (int& x : s) x = static_cast<int>(rng() % alphabet);
      return s;
    };
    const auto ref = draw(1);
    const auto hyp = draw(0);
    const auto got = compute_per(hyp, ref);
    const auto want = oracle::per_oracle(hyp, ref);
    const bool same = got.sub == want.preferred[0] && got.del == want.preferred[1] && got.ins == want.preferred[2] &&
                      got.ref_len == static_cast<long long>(ref.size());
    mismatches += !same;
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 10.0, format("200 pairs, %d count mismatches, %.2f s", mismatches, elapsed)};
}

Verdict decomposition_arithmetic() {
  // Raw counts whose rates match a published results row: 4.4 + 0.8 + 0.4 = 5.6.
  PerResult r;
  r.sub = 44;
  r.del = 8;
  r.ins = 4;
  r.ref_len = 1000;
  auto shown = [](double v) { return format("%.1f", v); };
  const bool display = shown(r.sub_rate()) == "4.4" && shown(r.del_rate()) == "0.8" && shown(r.ins_rate()) == "0.4" &&
                       shown(r.per()) == "5.6";
  const double gap = std::abs(r.sub_rate() + r.del_rate() + r.ins_rate() - r.per());

  // The identity also holds for counts from an actual alignment.
  std::mt19937_64 rng(2);
  double worst = gap;
  for (int i = 0; i < 100; ++i) {
    std::vector<int> ref(1 + rng() % 30), hyp(rng() % 30);
    for (int& x : ref) x = static_cast<int>(rng() % 6);
    for (int& x : hyp) x = static_cast<int>(rng() % 6);
    const auto p = compute_per(hyp, ref);
    worst = std::max(worst, std::abs(p.sub_rate() + p.del_rate() + p.ins_rate() - p.per()));
  }
  return {display && worst < 0.05,
          format("%s + %s + %s = %s, max identity gap %.2g", shown(r.sub_rate()).c_str(), shown(r.del_rate()).c_str(),
                 shown(r.ins_rate()).c_str(), shown(r.per()).c_str(), worst)};
}

Verdict ctc_brute_force() {
  std::mt19937_64 rng(3);
  const int vocab = 4, blank = 0;
  std::vector<std::vector<int>> label_sets{{}};
  for (int a = 1; a < vocab; ++a) {
    label_sets.push_back({a});
    for (int b = 1; b < vocab; ++b) label_sets.push_back({a, b});
  }
  int instances = 0;
  double worst = 0.0;
  for (int frames = 1; frames <= 4; ++frames) {
    for (const auto& labels : label_sets) {
      if (!ctc::feasible(frames, labels)) continue;
      for (int trial = 0; trial < 5; ++trial) {
        Matrix logits = random_matrix(frames, vocab, rng());
        for (Eigen::Index t = 0; t < frames; ++t) {
          const double lse = std::log(logits.row(t).array().exp().sum());
          logits.row(t).array() -= lse;
        }
        const double got = ctc::log_likelihood(logits, labels, blank);
        const double want = oracle::ctc_log_prob(logits, labels, blank);
        worst = std::max(worst, std::abs(got - want));
        ++instances;
      }
    }
  }
  return {worst <= 1e-6, format("%d instances, max |diff| %.3g", instances, worst)};
}

Verdict gradient_checks() {
  const auto start = std::chrono::steady_clock::now();
  const PhonemeInventory inv({"a", "b", "c"});
  RecognizerCheckpoint rec(toy::micro_recognizer_config(), inv, 5);
  const Matrix mel = random_matrix(12, 5, 6);
  const PhonemeSequence y{{4, 6}};
  const auto asr = gradcheck::check(rec.parameters(), [&](ag::Tape& tape) {
    return hybrid_loss(tape, mel, y, rec, 0.3).total;
  });

  GeneratorCheckpoint gen(toy::micro_generator_config(), inv, {"s0", "s1"}, 10);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (const auto& p : gen.parameters()) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) p.value->data()[i] += jitter(rng);
  }
  const Matrix target = random_matrix(7, 5, 11);
  const PhonemeSequence p{{4, 6, 5}};
  const DurationSequence d{{2, 3, 2}};
  const auto tts = gradcheck::check(gen.parameters(), [&](ag::Tape& tape) {
    return generator_loss(tape, target, p, d, 1, gen).total;
  });
  const double elapsed = seconds_since(start);
  const bool ok = asr.max_relative_error < 1e-4 && tts.max_relative_error < 1e-4 && elapsed < 300.0;
  return {ok, format("hybrid %.2e over %lld entries, generator %.2e over %lld entries, %.1f s", asr.max_relative_error,
                     asr.entries_checked, tts.max_relative_error, tts.entries_checked, elapsed)};
}

Verdict lambda_endpoints() {
  const PhonemeInventory inv({"a", "b", "c"});
  const RecognizerCheckpoint rec(toy::micro_recognizer_config(), inv, 2);
  const Matrix mel = random_matrix(16, 5, 3);
  const PhonemeSequence y{{4, 5, 6}};
  const auto one = hybrid_loss(mel, y, rec, 1.0);
  const auto zero = hybrid_loss(mel, y, rec, 0.0);
  const auto mid = hybrid_loss(mel, y, rec, 0.3);
  const bool endpoints = one.total == one.ctc_term && zero.total == zero.att_term;
  const double gap = std::abs(mid.total - (0.3 * mid.ctc_term + 0.7 * mid.att_term));
  return {endpoints && gap <= 1e-9,
          format("ctc %.6f, att %.6f, lambda=0.3 residual %.2g", one.ctc_term, zero.att_term, gap)};
}

Verdict state_expansion() {
  std::mt19937_64 rng(6);
  int failures = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const Matrix encoded = random_matrix(n, 1 + rng() % 8, rng());
    DurationSequence d;
    long long sum = 0;
    for (int i = 0; i < n; ++i) {
      d.frames.push_back(1 + static_cast<int>(rng() % 7));
      sum += d.frames.back();
    }
    const Matrix out = state_expand(encoded, d);
    bool ok = out.rows() == sum && out.cols() == encoded.cols();
    Eigen::Index row = 0;
    for (int i = 0; ok && i < n; ++i) {
      for (int k = 0; k < d.frames[i]; ++k, ++row) ok = ok && out.row(row) == encoded.row(i);
    }
    const Matrix identity = state_expand(encoded, DurationSequence{std::vector<int>(n, 1)});
    ok = ok && identity == encoded;
    failures += !ok;
  }
  return {failures == 0, format("1000 cases, %d failures", failures)};
}

// Models trained once and shared by the toy-scale criteria.
struct ToyRun {
  ToyCorpus corpus;
  AlignmentTable alignments;
  std::vector<RecognizerExample> rec_examples;
  std::vector<GeneratorUtterance> gen_data;
  RecognizerCheckpoint recognizer;
  GeneratorCheckpoint generator;
  GeneratorCheckpoint generator_init;
  double asr_seconds = 0.0;
  double tts_seconds = 0.0;
};

constexpr long long kToySteps = 2000;

ToyRun& toy_run() {
  static ToyRun run = [] {
    ToyRun r;
    ToyCorpusOptions opts;
    opts.num_utterances = 20;
    r.corpus = make_toy_corpus(opts);
    r.rec_examples = toy::recognizer_examples(r.corpus);
    r.gen_data = toy::generator_utterances(r.corpus, r.alignments);
    auto start = std::chrono::steady_clock::now();
    r.recognizer =
        train_recognizer(r.rec_examples, toy::recognizer_config(), r.corpus.inventory, toy::schedule(kToySteps))
            .checkpoint;
    r.asr_seconds = seconds_since(start);
    start = std::chrono::steady_clock::now();
    r.generator_init = train_generator(r.gen_data, r.alignments, toy::generator_config(), r.corpus.inventory,
                                       toy::schedule(0))
                           .checkpoint;
    r.generator = train_generator(r.gen_data, r.alignments, toy::generator_config(), r.corpus.inventory,
                                  toy::schedule(kToySteps))
                      .checkpoint;
    r.tts_seconds = seconds_since(start);
    return r;
  }();
  return run;
}

Verdict recognizer_overfit() {
  auto& run = toy_run();
  std::map<std::string, std::vector<std::string>> hyp, ref;
  for (const auto& ex : run.rec_examples) {
    const auto r = recognize(ex.features, run.recognizer, run.recognizer.config.beam);
    hyp[ex.id] = decode_symbols(r.phonemes, run.corpus.inventory);
    ref[ex.id] = decode_symbols(ex.phonemes, run.corpus.inventory);
  }
  const PerResult per = corpus_per(hyp, ref);

  ToyCorpusOptions single;
  single.num_utterances = 1;
  single.seed = 3;
  const auto one = make_toy_corpus(single);
  const auto examples = toy::recognizer_examples(one);
  auto s = toy::schedule(150);
  s.warmup_steps = 20;
  const auto trained = train_recognizer(examples, toy::recognizer_config(), one.inventory, s).checkpoint;
  const bool exact = recognize(examples[0].features, trained, 1).phonemes == examples[0].phonemes &&
                     recognize(examples[0].features, trained, 4).phonemes == examples[0].phonemes;
  const bool ok = per.per() <= 10.0 && exact && run.asr_seconds <= 1800.0;
  return {ok, format("training PER %.1f%% (sub %lld del %lld ins %lld of %lld) after %lld steps in %.0f s; "
                     "single-utterance recovery %s",
                     per.per(), per.sub, per.del, per.ins, per.ref_len, kToySteps, run.asr_seconds,
                     exact ? "exact" : "FAILED")};
}

double mean_recon(const ToyRun& run, const GeneratorCheckpoint& ckpt) {
  double total = 0.0;
  for (const auto& u : run.gen_data) {
    total += generator_loss(u.mel, u.phonemes, run.alignments.at(u.id), *ckpt.find_speaker(u.speaker), ckpt).recon_term;
  }
  return total / static_cast<double>(run.gen_data.size());
}

Verdict generator_overfit() {
  auto& run = toy_run();
  const double before = mean_recon(run, run.generator_init);
  const double after = mean_recon(run, run.generator);

  double abs_err = 0.0;
  long long phonemes = 0;
  for (const auto& u : run.gen_data) {
    const auto& g = run.generator;
    const RowVector style = gst_encode(u.mel, g).embedding;
    const auto d = quantize_durations(predict_rhythm(cbhg_encode(u.phonemes, g), style, *g.find_speaker(u.speaker), g));
    const auto& truth = run.alignments.at(u.id);
    for (std::size_t i = 0; i < d.size(); ++i) abs_err += std::abs(d.frames[i] - truth.frames[i]);
    phonemes += static_cast<long long>(d.size());
  }
  const double mae = abs_err / static_cast<double>(phonemes);

  ToyCorpusOptions single;
  single.num_utterances = 1;
  single.seed = 5;
  const auto one = make_toy_corpus(single);
  AlignmentTable align;
  const auto data = toy::generator_utterances(one, align);
  auto s = toy::schedule(300);
  s.warmup_steps = 30;
  const auto memorized = train_generator(data, align, toy::generator_config(), one.inventory, s).checkpoint;
  const RowVector style = gst_encode(data[0].mel, memorized).embedding;
  const Matrix expanded = state_expand(cbhg_encode(data[0].phonemes, memorized), align.at(data[0].id));
  MelSpectrogram teacher;
  teacher.frames = data[0].mel;
  const double corr = toy::correlation(decode_mel(expanded, style, 0, memorized, teacher).frames,
                                       decode_mel(expanded, style, 0, memorized).frames);

  const bool ok = after < 0.2 * before && mae <= 2.0 && corr >= 0.95;
  return {ok, format("recon %.4f -> %.4f (%.1f%% of initial) after %lld steps in %.0f s; rhythm MAE %.2f frames; "
                     "free-running vs teacher-forced r = %.3f",
                     before, after, 100.0 * after / before, kToySteps, run.tts_seconds, mae, corr)};
}

Verdict conversion_contract() {
  auto& run = toy_run();
  ConversionConfig cfg;
  cfg.synthesize_audio = false;
  int violations = 0, conversions = 0;
  const auto& utts = run.corpus.utterances;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& src = utts[i].wav;
    const auto& other = utts[(i + 7) % utts.size()].wav;
    const auto& other_src = utts[(i + 3) % utts.size()].wav;
    const auto base = convert(src, src, 0, run.recognizer, run.generator, cfg);
    const auto spk = convert(src, src, 1, run.recognizer, run.generator, cfg);
    const auto restyled = convert(src, other, 0, run.recognizer, run.generator, cfg);
    const auto resourced = convert(other_src, src, 0, run.recognizer, run.generator, cfg);
    conversions += 4;
    for (const auto* r : {&base, &spk, &restyled, &resourced}) {
      violations += r->mel.frames.rows() != quantize_durations(r->predicted_durations).total();
      violations += r->durations != quantize_durations(r->predicted_durations);
    }
    // Content comes only from the source, style only from the reference.
    violations += spk.phonemes != base.phonemes || spk.style != base.style;
    violations += restyled.phonemes != base.phonemes || restyled.style == base.style;
    violations += resourced.style != base.style;
  }
  cfg.synthesize_audio = true;
  const auto full = convert(utts[0].wav, utts[0].wav, 1, run.recognizer, run.generator, cfg);
  const bool audio = !full.wav.samples.empty() && full.mel.frames.rows() == full.durations.total();
  return {violations == 0 && audio, format("%d conversions, %d contract violations, audio %zu samples", conversions + 1,
                                           violations, full.wav.samples.size())};
}

Verdict f0_pipeline() {
  bool examples = true;
  auto contour = [](std::vector<double> v, std::vector<bool> voiced) {
    F0Contour c;
    c.values = std::move(v);
    c.voiced = std::move(voiced);
    return c;
  };
  examples &= interpolate_f0(contour({120, 130, 125}, {true, true, true})).values == std::vector<double>{120, 130, 125};
  examples &= interpolate_f0(contour({0, 150, 0}, {false, true, false})).values == std::vector<double>{150, 150, 150};
  const auto gap = interpolate_f0(contour({100, 0, 0, 200}, {true, false, false, true})).values;
  examples &= gap[0] == 100.0 && gap[3] == 200.0 && std::abs(gap[1] - 400.0 / 3.0) < 1e-9 &&
              std::abs(gap[2] - 500.0 / 3.0) < 1e-9;

  auto& run = toy_run();
  ConversionConfig cfg;
  const auto& source = run.corpus.utterances[2].wav;
  const auto converted = convert(source, source, 1, run.recognizer, run.generator, cfg);
  const auto dir = scratch("f0");
  const std::string svg = (dir / "f0.svg").string(), csv = (dir / "f0.csv").string();
  std::vector<NamedContour> lines;
  try {
    lines.push_back({"source", interpolate_f0(extract_f0(source, cfg.features))});
    lines.push_back({"converted", interpolate_f0(extract_f0(converted.wav, cfg.features))});
    plot_f0_overlay(lines, svg, csv);
  } catch (const Error& e) {
    return {false, std::string("overlay failed: ") + e.what()};
  }
  std::ifstream in(svg);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t polylines = 0;
  for (auto pos = text.find("<polyline"); pos != std::string::npos; pos = text.find("<polyline", pos + 1)) ++polylines;
  const bool axes = text.find("Time (s)") != std::string::npos && text.find("F0 (Hz)") != std::string::npos;
  const auto back = read_f0_csv(csv);
  const bool csv_ok = back.size() == 2 && back[0].contour.values.size() == lines[0].contour.values.size() &&
                      back[1].contour.values.size() == lines[1].contour.values.size();
  const auto sim = f0_similarity(lines[0].contour, lines[1].contour);
  return {examples && polylines == 2 && axes && csv_ok,
          format("examples %s; svg %zu lines, axes %s; csv %s; similarity rmse %.1f Hz r %.2f", examples ? "ok" : "FAILED",
                 polylines, axes ? "ok" : "missing", csv_ok ? "ok" : "FAILED", sim.rmse_hz, sim.correlation)};
}

TestDefinition listening_definition(const fs::path& dir, int trials) {
  TestDefinition def;
  def.name = "acceptance";
  for (int i = 0; i < trials; ++i) {
    for (const std::string sys : {"proposed", "baseline"}) {
      AudioWaveform w;
      w.sample_rate = 8000;
      w.samples.assign(200, 0.01 * (i + 1) * (sys == "proposed" ? 1 : -1));
      const std::string id = sys + "_" + std::to_string(i);
      write_wav((dir / (id + ".wav")).string(), w);
      def.audio.push_back({id, (dir / (id + ".wav")).string(), sys});
    }
    def.trials.push_back({"t" + std::to_string(i), TrialKind::kAB, "proposed_" + std::to_string(i),
                          "baseline_" + std::to_string(i), std::nullopt, "Which is more natural?"});
  }
  return def;
}

Verdict listening_protocol() {
  // Listener l prefers the proposed system on trials where (trial + l) % 10 < 6,
  // abstains on trial 9, and always answers through the served slot.
  std::set<std::string> summaries;
  int swapped_total = 0, responses_total = 0;
  for (std::uint64_t seed : {1u, 7u, 42u, 1234u, 98765u}) {
    const auto dir = scratch("listening_seed" + std::to_string(seed));
    ListeningService svc((dir / "store").string(), seed);
    const auto def = listening_definition(dir, 10);
    const auto id = svc.create_test(def);
    for (int l = 0; l < 4; ++l) {
      const std::string listener = "listener" + std::to_string(l);
      while (auto served = svc.next_trial(id, listener)) {
        const int trial = std::stoi(served->trial.trial_id.substr(1));
        Choice choice = Choice::kNP;
        if (trial != 9) {
          const std::string want = (trial + l) % 10 < 6 ? "proposed" : "baseline";
          choice = served->trial.stimulus_a.rfind(want, 0) == 0 ? Choice::kA : Choice::kB;
        }
        svc.submit_response({id, served->trial.trial_id, listener, choice, 1, ""});
      }
    }
    for (const auto& r : svc.responses(id)) swapped_total += r.swapped;
    responses_total += static_cast<int>(svc.responses(id).size());
    const auto s = svc.test_results(id);
    summaries.insert(format("%.1f/%.1f/%.1f", s.percentages.at("proposed"), s.percentages.at("baseline"),
                            s.percentages.at(kNoPreference)));
  }
  const std::string expected = "52.5/37.5/10.0";
  const bool invariant = summaries.size() == 1 && *summaries.begin() == expected;
  const bool randomized = swapped_total > 0 && swapped_total < responses_total;

  const auto dir = scratch("listening_concurrent");
  ListeningService svc((dir / "store").string(), 3);
  const auto id = svc.create_test(listening_definition(dir, 10));
  std::vector<std::pair<std::string, std::string>> work;
  for (int l = 0; l < 5; ++l) {
    const std::string listener = "c" + std::to_string(l);
    while (auto served = svc.next_trial(id, listener)) work.emplace_back(served->trial.trial_id, listener);
  }
  std::atomic<int> accepted{0}, rejected{0}, unexpected{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < 8; ++w) {
    threads.emplace_back([&, w] {
      for (const auto& [trial, listener] : work) {
        try {
          svc.submit_response({id, trial, listener, w % 2 ? Choice::kA : Choice::kB, 1, ""});
          ++accepted;
        } catch (const Error& e) {
          (e.code() == ErrorCode::kConflict ? rejected : unexpected)++;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  std::set<std::pair<std::string, std::string>> stored;
  int lines = 0;
  std::ifstream log(dir / "store" / "tests" / id / "responses.jsonl");
  for (std::string line; std::getline(log, line); ++lines) {
    const auto doc = nlohmann::json::parse(line);
    stored.emplace(doc["trial_id"], doc["listener_id"]);
  }
  const int n = static_cast<int>(work.size());
  const bool once = accepted == n && rejected == 7 * n && unexpected == 0 && lines == n &&
                    static_cast<int>(stored.size()) == n;
  return {invariant && randomized && once,
          format("5 seeds -> %zu distinct summaries (%s, expected %s), %d of %d slots swapped; "
                 "%d concurrent submissions -> %d stored, %d conflicts",
                 summaries.size(), summaries.begin()->c_str(), expected.c_str(), swapped_total, responses_total,
                 8 * n, lines, rejected.load())};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria{
      {1, "PER oracle equivalence", per_oracle_equivalence},
      {2, "PER decomposition arithmetic", decomposition_arithmetic},
      {3, "CTC brute-force equivalence", ctc_brute_force},
      {4, "gradient checks", gradient_checks},
      {5, "hybrid loss lambda endpoints", lambda_endpoints},
      {6, "state-expansion invariants", state_expansion},
      {7, "toy overfit: recognizer", recognizer_overfit},
      {8, "toy overfit: generator", generator_overfit},
      {9, "end-to-end conversion contract", conversion_contract},
      {10, "F0 pipeline", f0_pipeline},
      {11, "listening-service protocol", listening_protocol},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.number, c.name, v.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
