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

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "stylevc/corpus.h"
#include "stylevc/features.h"
#include "support/oracles.h"

using namespace stylevc;

namespace {

constexpr double kPi = std::numbers::pi;

AudioWaveform sine(double hz, double seconds, double rate = 24000, double amplitude = 0.5) {
  AudioWaveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amplitude * std::sin(2 * kPi * hz * i / rate);
  return w;
}

AudioWaveform noise(std::size_t n, std::uint64_t seed, double rate = 24000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  AudioWaveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = u(rng);
  return w;
}

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "stylevc_features_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("silence maps to the log floor everywhere") {
  AudioWaveform w;
  w.samples.assign(24000, 0.0);
  const auto mel = compute_log_mel(w, FeatureConfig());
  CHECK(mel.num_bins() == 80);
  CHECK(mel.num_frames() == 80);
  CHECK((mel.frames.array() == std::log(kLogFloor)).all());
}

TEST_CASE("a stationary sine peaks in the same mel bin on every interior frame") {
  const auto mel = compute_log_mel(sine(440, 1.0), FeatureConfig());
  Eigen::Index first = -1;
  for (Eigen::Index t = 4; t < mel.num_frames() - 4; ++t) {
    Eigen::Index arg;
    mel.frames.row(t).maxCoeff(&arg);
    if (first < 0) first = arg;
    CHECK(arg == first);
  }
}

TEST_CASE("log-mel matches a direct DFT implementation") {
  const auto w = noise(2400, 11);
  FeatureConfig cfg;
  const auto mel = compute_log_mel(w, cfg);
  const Matrix expected = oracle::dft_log_mel(w.samples, cfg.sample_rate, cfg.n_mels, cfg.frame_shift_ms,
                                              cfg.frame_length_ms, kLogFloor);
  REQUIRE(mel.frames.rows() == expected.rows());
  REQUIRE(mel.frames.cols() == expected.cols());
  CHECK((mel.frames - expected).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("framing yields ceil(samples / shift) frames and is deterministic") {
  FeatureConfig cfg;
  for (std::size_t n : {1u, 299u, 300u, 301u, 12345u}) {
    const auto w = noise(n, n);
    const auto a = compute_log_mel(w, cfg);
    CHECK(a.num_frames() == static_cast<Eigen::Index>((n + 299) / 300));
    CHECK(a.frames == compute_log_mel(w, cfg).frames);
  }
}

TEST_CASE("invalid waveforms and configs are rejected") {
  AudioWaveform empty;
  CHECK_THROWS_AS(compute_log_mel(empty, FeatureConfig()), Error);
  auto w = noise(1000, 1);
  w.samples[10] = std::nan("");
  try {
    compute_log_mel(w, FeatureConfig());
    FAIL("expected invalid-input");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidInput);
  }
  FeatureConfig bad;
  bad.frame_length_ms = 5;
  CHECK_THROWS_AS(bad.validate(), Error);
  FeatureConfig slow;
  try {
    extract_f0(sine(100, 0.2, 800), slow);
    FAIL("expected invalid-config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("utterance mvn standardizes, is idempotent and scale covariant") {
  const auto mel = compute_log_mel(noise(6000, 3), FeatureConfig());
  const Matrix z = utterance_mvn(mel.frames);
  for (Eigen::Index d = 0; d < z.cols(); ++d) {
    const double mean = z.col(d).mean();
    const double var = (z.col(d).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
  CHECK((utterance_mvn(z) - z).cwiseAbs().maxCoeff() < 1e-6);
  const Matrix shifted = (mel.frames * 3.5).array() - 2.0;
  CHECK((utterance_mvn(Matrix(shifted)) - z).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(utterance_mvn(Matrix(Matrix::Constant(5, 4, 2.5))).isZero());
}

TEST_CASE("f0 of a pure 220 Hz tone") {
  const auto f0 = extract_f0(sine(220, 1.0), FeatureConfig());
  CHECK(f0.frame_shift_ms == 12.5);
  for (std::size_t t = 4; t + 4 < f0.size(); ++t) {
    CHECK(f0.voiced[t]);
    CHECK(std::abs(f0.values[t] - 220.0) <= 3.0);
  }
}

TEST_CASE("silence is entirely unvoiced and cannot be interpolated") {
  AudioWaveform w;
  w.samples.assign(12000, 0.0);
  const auto f0 = extract_f0(w, FeatureConfig());
  for (std::size_t t = 0; t < f0.size(); ++t) {
    CHECK_FALSE(f0.voiced[t]);
    CHECK(f0.values[t] == 0.0);
  }
  try {
    interpolate_f0(f0);
    FAIL("expected no-voicing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoVoicing);
  }
}

TEST_CASE("a zeroed 100 ms gap is unvoiced between voiced flanks") {
  auto w = sine(180, 1.0);
  for (std::size_t i = 12000; i < 14400; ++i) w.samples[i] = 0.0;
  const auto f0 = extract_f0(w, FeatureConfig());
  // Frames whose 50 ms window lies inside the gap: centres in [0.525, 0.575] s.
  for (std::size_t t = 42; t <= 46; ++t) CHECK_FALSE(f0.voiced[t]);
  for (std::size_t t = 10; t < 30; ++t) CHECK(f0.voiced[t]);
  for (std::size_t t = 60; t < 75; ++t) CHECK(f0.voiced[t]);
}

TEST_CASE("interpolate_f0 examples") {
  F0Contour full;
  full.values = {120, 130, 125};
  full.voiced = {true, true, true};
  CHECK(interpolate_f0(full).values == full.values);

  F0Contour gap;
  gap.values = {100, 0, 0, 200};
  gap.voiced = {true, false, false, true};
  const auto g = interpolate_f0(gap);
  CHECK(g.values[0] == 100.0);
  CHECK(g.values[1] == doctest::Approx(133.333333).epsilon(1e-6));
  CHECK(g.values[2] == doctest::Approx(166.666667).epsilon(1e-6));
  CHECK(g.values[3] == 200.0);
  CHECK(g.fully_voiced());

  F0Contour edges;
  edges.values = {0, 150, 0};
  edges.voiced = {false, true, false};
  CHECK(interpolate_f0(edges).values == std::vector<double>{150, 150, 150});
}

TEST_CASE("interpolated contours keep voiced values and stay within the steepest voiced gap slope") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> hz(80, 300);
  std::bernoulli_distribution voiced(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    F0Contour c;
    const int n = 2 + static_cast<int>(rng() % 30);
    for (int t = 0; t < n; ++t) {
      const bool v = voiced(rng);
      c.voiced.push_back(v);
      c.values.push_back(v ? hz(rng) : 0.0);
    }
    c.voiced[rng() % n] = true;
    if (c.values[0] == 0.0 && c.voiced[0]) c.values[0] = 150.0;
    for (int t = 0; t < n; ++t) {
      if (c.voiced[t] && c.values[t] == 0.0) c.values[t] = 150.0;
    }
    const auto out = interpolate_f0(c);
    REQUIRE(out.fully_voiced());
    double max_slope = 0.0;
    int prev = -1;
    for (int t = 0; t < n; ++t) {
      if (!c.voiced[t]) continue;
      CHECK(out.values[t] == c.values[t]);
      if (prev >= 0) max_slope = std::max(max_slope, std::abs(c.values[t] - c.values[prev]) / (t - prev));
      prev = t;
    }
    for (int t = 0; t + 1 < n; ++t) CHECK(std::abs(out.values[t + 1] - out.values[t]) <= max_slope + 1e-9);
  }
}

TEST_CASE("f0 and mel frame counts agree and reconcile by truncation") {
  FeatureConfig cfg;
  for (std::size_t n : {4000u, 4321u, 24000u}) {
    const auto w = sine(200, n / 24000.0);
    auto mel = compute_log_mel(w, cfg);
    auto f0 = extract_f0(w, cfg);
    CHECK(std::abs(static_cast<long>(mel.num_frames()) - static_cast<long>(f0.size())) <= 1);
    f0.values.push_back(0.0);
    f0.voiced.push_back(false);
    reconcile_lengths(mel, f0);
    CHECK(static_cast<std::size_t>(mel.num_frames()) == f0.size());
  }
}

TEST_CASE("griffin-lim round trip keeps the spectral shape") {
  ToyCorpusOptions opts;
  opts.num_utterances = 1;
  const auto corpus = make_toy_corpus(opts);
  FeatureConfig cfg;
  const auto mel = compute_log_mel(corpus.utterances[0].wav, cfg);
  const auto wav = invert_mel(mel, cfg);
  const long expected = mel.num_frames() * cfg.shift_samples();
  CHECK(std::abs(static_cast<long>(wav.samples.size()) - expected) <= cfg.shift_samples());
  auto back = compute_log_mel(wav, cfg);
  const auto n = std::min(back.num_frames(), mel.num_frames());
  CHECK(per_bin_correlation(back.frames.topRows(n), mel.frames.topRows(n)) >= 0.9);
}

TEST_CASE("inverting a silent mel gives a near-silent waveform") {
  FeatureConfig cfg;
  MelSpectrogram mel;
  mel.frames = Matrix::Constant(40, cfg.n_mels, std::log(kLogFloor));
  const auto wav = invert_mel(mel, cfg);
  double peak = 0.0;
  for (double s : wav.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak < 1e-2);
  MelSpectrogram narrow;
  narrow.frames = Matrix::Zero(10, 20);
  try {
    invert_mel(narrow, cfg);
    FAIL("expected invalid-config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("wav and mel files round trip") {
  auto w = sine(300, 0.1, 16000, 0.4);
  const auto path = temp_path("tone.wav");
  write_wav(path, w);
  const auto back = read_wav(path);
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK(back.sample_rate == 16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32767);
  const auto up = read_wav(path, 24000);
  CHECK(up.sample_rate == 24000);
  CHECK(std::abs(static_cast<long>(up.samples.size()) - 2400) <= 1);

  const auto mel = compute_log_mel(noise(3000, 2), FeatureConfig());
  write_mel(temp_path("x.mel"), mel);
  const auto m = read_mel(temp_path("x.mel"));
  CHECK(m.frame_shift_ms == mel.frame_shift_ms);
  CHECK((m.frames - mel.frames).cwiseAbs().maxCoeff() < 1e-4);
  CHECK_THROWS_AS(read_wav(temp_path("missing.wav")), Error);
}

TEST_CASE("feature config survives a flat round trip") {
  FeatureConfig cfg;
  cfg.n_mels = 40;
  cfg.frame_shift_ms = 10;
  const auto back = FeatureConfig::from_flat(cfg.to_flat());
  CHECK(back.n_mels == 40);
  CHECK(back.frame_shift_ms == 10);
  CHECK(back.frame_length_ms == 50);
}
