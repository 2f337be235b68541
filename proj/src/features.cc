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

#include "stylevc/features.h"

#include <algorithm>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace stylevc {

namespace {

using Complex = std::complex<Scalar>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Scalar kPi = std::numbers::pi_v<Scalar>;

// Index into a reflect-padded signal of length n ("abcd" -> "dcb|abcd|cba").
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  Eigen::Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

std::vector<Scalar> hann_window(int length) {
  std::vector<Scalar> w(length);
  for (int n = 0; n < length; ++n) w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / length);
  return w;
}

void check_waveform(const AudioWaveform& wav) {
  if (wav.samples.empty()) throw Error(ErrorCode::kInvalidInput, "empty waveform");
  if (!(wav.sample_rate > 0)) throw Error(ErrorCode::kInvalidInput, "sample rate must be positive");
  for (Scalar s : wav.samples) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidInput, "waveform contains non-finite samples");
  }
}

const std::vector<Scalar>& samples_at_rate(const AudioWaveform& wav, const FeatureConfig& cfg,
                                           AudioWaveform& storage) {
  if (wav.sample_rate == cfg.sample_rate) return wav.samples;
  storage = resample(wav, cfg.sample_rate);
  return storage.samples;
}

// Windowed analysis frame `t` of a reflect-padded signal.
void load_frame(const std::vector<Scalar>& x, Eigen::Index t, const FeatureConfig& cfg,
                const std::vector<Scalar>& window, std::vector<Scalar>& frame) {
  const int shift = cfg.shift_samples();
  const int win = cfg.window_samples();
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index start = t * shift - win / 2;
  std::fill(frame.begin(), frame.end(), 0.0);
  for (int k = 0; k < win; ++k) frame[k] = x[reflect_index(start + k, n)] * window[k];
}

ComplexMatrix complex_stft(const std::vector<Scalar>& x, Eigen::Index num_frames,
                           const FeatureConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const auto window = hann_window(cfg.window_samples());
  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  std::vector<Scalar> frame(n_fft);
  std::vector<Complex> spectrum;
  ComplexMatrix out(num_frames, n_fft / 2 + 1);
  for (Eigen::Index t = 0; t < num_frames; ++t) {
    load_frame(x, t, cfg, window, frame);
    fft.fwd(spectrum, frame);
    for (int k = 0; k <= n_fft / 2; ++k) out(t, k) = spectrum[k];
  }
  return out;
}

std::vector<Scalar> inverse_stft(const ComplexMatrix& spec, std::size_t length,
                                 const FeatureConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const int shift = cfg.shift_samples();
  const int win = cfg.window_samples();
  const auto window = hann_window(win);
  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  std::vector<Scalar> out(length, 0.0);
  std::vector<Scalar> norm(length, 0.0);
  std::vector<Complex> spectrum(n_fft / 2 + 1);
  std::vector<Scalar> frame;
  const auto n = static_cast<Eigen::Index>(length);
  for (Eigen::Index t = 0; t < spec.rows(); ++t) {
    for (int k = 0; k <= n_fft / 2; ++k) spectrum[k] = spec(t, k);
    fft.inv(frame, spectrum);
    const Eigen::Index start = t * shift - win / 2;
    for (int k = 0; k < win; ++k) {
      const Eigen::Index i = start + k;
      if (i < 0 || i >= n) continue;
      out[i] += frame[k] * window[k];
      norm[i] += window[k] * window[k];
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (norm[i] > 1e-8) out[i] /= norm[i];
  }
  return out;
}

Scalar hz_to_mel(Scalar hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
Scalar mel_to_hz(Scalar mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

bool F0Contour::fully_voiced() const {
  return std::all_of(voiced.begin(), voiced.end(), [](bool v) { return v; });
}

int FeatureConfig::fft_size() const {
  int n = 1;
  while (n < window_samples()) n <<= 1;
  return n;
}

void FeatureConfig::validate() const {
  if (!(sample_rate > 0)) throw Error(ErrorCode::kInvalidConfig, "sample_rate must be positive");
  if (n_mels < 1) throw Error(ErrorCode::kInvalidConfig, "n_mels must be >= 1");
  if (shift_samples() < 1) throw Error(ErrorCode::kInvalidConfig, "frame shift below one sample");
  if (frame_length_ms < frame_shift_ms) {
    throw Error(ErrorCode::kInvalidConfig, "frame length must be >= frame shift");
  }
  if (upper_frequency() <= fmin || upper_frequency() > sample_rate / 2) {
    throw Error(ErrorCode::kInvalidConfig, "mel band edges out of range");
  }
  if (!(f0_floor > 0) || f0_ceil <= f0_floor) {
    throw Error(ErrorCode::kInvalidConfig, "f0 search band is empty");
  }
  if (griffin_lim_iterations < 0) {
    throw Error(ErrorCode::kInvalidConfig, "griffin_lim_iterations must be >= 0");
  }
}

FlatConfig FeatureConfig::to_flat() const {
  FlatConfig flat;
  flat.set("sample_rate", sample_rate);
  flat.set("n_mels", n_mels);
  flat.set("frame_shift_ms", frame_shift_ms);
  flat.set("frame_length_ms", frame_length_ms);
  flat.set("fmin", fmin);
  flat.set("fmax", fmax);
  flat.set("f0_floor", f0_floor);
  flat.set("f0_ceil", f0_ceil);
  flat.set("voicing_threshold", voicing_threshold);
  flat.set("silence_rms", silence_rms);
  flat.set("griffin_lim_iterations", griffin_lim_iterations);
  return flat;
}

FeatureConfig FeatureConfig::from_flat(const FlatConfig& flat) {
  FeatureConfig cfg;
  cfg.sample_rate = flat.get_double("sample_rate", cfg.sample_rate);
  cfg.n_mels = static_cast<int>(flat.get_int("n_mels", cfg.n_mels));
  cfg.frame_shift_ms = flat.get_double("frame_shift_ms", cfg.frame_shift_ms);
  cfg.frame_length_ms = flat.get_double("frame_length_ms", cfg.frame_length_ms);
  cfg.fmin = flat.get_double("fmin", cfg.fmin);
  cfg.fmax = flat.get_double("fmax", cfg.fmax);
  cfg.f0_floor = flat.get_double("f0_floor", cfg.f0_floor);
  cfg.f0_ceil = flat.get_double("f0_ceil", cfg.f0_ceil);
  cfg.voicing_threshold = flat.get_double("voicing_threshold", cfg.voicing_threshold);
  cfg.silence_rms = flat.get_double("silence_rms", cfg.silence_rms);
  cfg.griffin_lim_iterations =
      static_cast<int>(flat.get_int("griffin_lim_iterations", cfg.griffin_lim_iterations));
  cfg.validate();
  return cfg;
}

Eigen::Index num_frames_for(std::size_t num_samples, const FeatureConfig& cfg) {
  const auto shift = static_cast<std::size_t>(cfg.shift_samples());
  return static_cast<Eigen::Index>((num_samples + shift - 1) / shift);
}

Matrix mel_filterbank(const FeatureConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const int n_freq = n_fft / 2 + 1;
  const Scalar mel_lo = hz_to_mel(cfg.fmin);
  const Scalar mel_hi = hz_to_mel(cfg.upper_frequency());
  std::vector<Scalar> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, n_freq);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const Scalar left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_freq; ++k) {
      const Scalar f = k * cfg.sample_rate / n_fft;
      const Scalar rising = (f - left) / (center - left);
      const Scalar falling = (right - f) / (right - center);
      fb(m, k) = std::max<Scalar>(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

Matrix magnitude_stft(const std::vector<Scalar>& samples, const FeatureConfig& cfg) {
  return complex_stft(samples, num_frames_for(samples.size(), cfg), cfg).cwiseAbs();
}

MelSpectrogram compute_log_mel(const AudioWaveform& wav, const FeatureConfig& cfg) {
  cfg.validate();
  check_waveform(wav);
  AudioWaveform resampled;
  const auto& x = samples_at_rate(wav, cfg, resampled);
  const Matrix magnitude = magnitude_stft(x, cfg);
  const Matrix fb = mel_filterbank(cfg);
  MelSpectrogram mel;
  mel.frame_shift_ms = cfg.frame_shift_ms;
  mel.frame_length_ms = cfg.frame_length_ms;
  mel.frames = (magnitude * fb.transpose()).array().max(kLogFloor).log().matrix();
  return mel;
}

MelSpectrogram utterance_mvn(const MelSpectrogram& mel) {
  if (mel.num_frames() < 1) throw Error(ErrorCode::kInvalidInput, "mvn needs at least one frame");
  MelSpectrogram out = mel;
  out.frames = utterance_mvn(mel.frames);
  return out;
}

F0Contour extract_f0(const AudioWaveform& wav, const FeatureConfig& cfg) {
  cfg.validate();
  if (wav.sample_rate < 2 * cfg.f0_ceil || cfg.sample_rate < 2 * cfg.f0_ceil) {
    throw Error(ErrorCode::kInvalidConfig, "sample rate below twice the F0 ceiling");
  }
  check_waveform(wav);
  AudioWaveform resampled;
  const auto& x = samples_at_rate(wav, cfg, resampled);

  const int win = cfg.window_samples();
  const int lag_min = std::max(2, static_cast<int>(std::floor(cfg.sample_rate / cfg.f0_ceil)));
  const int lag_max = static_cast<int>(std::ceil(cfg.sample_rate / cfg.f0_floor));
  if (lag_max + 2 >= win) {
    throw Error(ErrorCode::kInvalidConfig, "analysis window too short for the F0 floor");
  }

  const Eigen::Index num_frames = num_frames_for(x.size(), cfg);
  F0Contour contour;
  contour.frame_shift_ms = cfg.frame_shift_ms;
  contour.values.assign(num_frames, 0.0);
  contour.voiced.assign(num_frames, false);

  const std::vector<Scalar> rectangular(win, 1.0);
  std::vector<Scalar> buffer(win);
  Vector frame(win);
  Vector prefix(win + 1);
  std::vector<Scalar> nccf(lag_max + 2, 0.0);

  for (Eigen::Index t = 0; t < num_frames; ++t) {
    load_frame(x, t, cfg, rectangular, buffer);
    frame = Eigen::Map<const Vector>(buffer.data(), win);
    frame.array() -= frame.mean();
    if (std::sqrt(frame.squaredNorm() / win) < cfg.silence_rms) continue;

    prefix(0) = 0;
    for (int n = 0; n < win; ++n) prefix(n + 1) = prefix(n) + frame(n) * frame(n);
    for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      const int overlap = win - lag;
      const Scalar num = frame.head(overlap).dot(frame.segment(lag, overlap));
      const Scalar e0 = prefix(overlap);
      const Scalar e1 = prefix(win) - prefix(lag);
      nccf[lag] = (e0 > 0 && e1 > 0) ? num / std::sqrt(e0 * e1) : 0.0;
    }
    Scalar best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, nccf[lag]);
    if (best < cfg.voicing_threshold) continue;

    // First local peak close to the global best avoids sub-octave picks.
    int chosen = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (nccf[lag] >= 0.85 * best && nccf[lag] >= nccf[lag - 1] && nccf[lag] >= nccf[lag + 1]) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0) continue;
    const Scalar a = nccf[chosen - 1], b = nccf[chosen], c = nccf[chosen + 1];
    const Scalar curvature = a - 2 * b + c;
    const Scalar delta = curvature < 0 ? 0.5 * (a - c) / curvature : 0.0;
    const Scalar f0 = cfg.sample_rate / (chosen + std::clamp<Scalar>(delta, -0.5, 0.5));
    if (f0 < cfg.f0_floor || f0 > cfg.f0_ceil) continue;
    contour.values[t] = f0;
    contour.voiced[t] = true;
  }
  return contour;
}

F0Contour interpolate_f0(const F0Contour& contour) {
  if (contour.values.size() != contour.voiced.size()) {
    throw Error(ErrorCode::kInvalidInput, "F0 values and voicing mask differ in length");
  }
  std::vector<std::size_t> anchors;
  for (std::size_t t = 0; t < contour.size(); ++t) {
    if (contour.voiced[t]) anchors.push_back(t);
  }
  if (anchors.empty()) throw Error(ErrorCode::kNoVoicing, "contour has no voiced frames");

  F0Contour out = contour;
  for (std::size_t t = 0; t < anchors.front(); ++t) out.values[t] = contour.values[anchors.front()];
  for (std::size_t t = anchors.back() + 1; t < contour.size(); ++t) {
    out.values[t] = contour.values[anchors.back()];
  }
  for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
    const std::size_t lo = anchors[k], hi = anchors[k + 1];
    const Scalar v0 = contour.values[lo], v1 = contour.values[hi];
    for (std::size_t t = lo + 1; t < hi; ++t) {
      const Scalar w = static_cast<Scalar>(t - lo) / static_cast<Scalar>(hi - lo);
      out.values[t] = v0 + w * (v1 - v0);
    }
  }
  std::fill(out.voiced.begin(), out.voiced.end(), true);
  return out;
}

AudioWaveform invert_mel(const MelSpectrogram& mel, const FeatureConfig& cfg) {
  cfg.validate();
  if (mel.num_bins() != cfg.n_mels) {
    throw Error(ErrorCode::kInvalidConfig,
                "mel has " + std::to_string(mel.num_bins()) + " bins, config expects " +
                    std::to_string(cfg.n_mels));
  }
  AudioWaveform wav;
  wav.sample_rate = cfg.sample_rate;
  const Eigen::Index num_frames = mel.num_frames();
  const std::size_t length = static_cast<std::size_t>(num_frames) * cfg.shift_samples();
  if (num_frames == 0) return wav;

  const Matrix fb = mel_filterbank(cfg);
  const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();  // F x M
  const Matrix magnitude =
      (mel.frames.array().exp().matrix() * pinv.transpose()).cwiseMax(0.0);  // T x F

  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<Scalar> angle(-kPi, kPi);
  ComplexMatrix spec(num_frames, magnitude.cols());
  for (Eigen::Index t = 0; t < spec.rows(); ++t) {
    for (Eigen::Index k = 0; k < spec.cols(); ++k) spec(t, k) = std::polar(magnitude(t, k), angle(rng));
  }
  std::vector<Scalar> signal = inverse_stft(spec, length, cfg);
  for (int it = 0; it < cfg.griffin_lim_iterations; ++it) {
    const ComplexMatrix estimate = complex_stft(signal, num_frames, cfg);
    for (Eigen::Index t = 0; t < spec.rows(); ++t) {
      for (Eigen::Index k = 0; k < spec.cols(); ++k) {
        const Scalar r = std::abs(estimate(t, k));
        spec(t, k) = r > 0 ? magnitude(t, k) * estimate(t, k) / r : Complex(magnitude(t, k), 0.0);
      }
    }
    signal = inverse_stft(spec, length, cfg);
  }
  wav.samples = std::move(signal);
  return wav;
}

Scalar per_bin_correlation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kInvalidInput, "correlation needs equally shaped matrices");
  }
  Scalar total = 0.0;
  int counted = 0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const Vector x = a.col(d).array() - a.col(d).mean();
    const Vector y = b.col(d).array() - b.col(d).mean();
    const Scalar sx = x.norm(), sy = y.norm();
    if (sx < 1e-9 || sy < 1e-9) continue;
    total += x.dot(y) / (sx * sy);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

void reconcile_lengths(MelSpectrogram& mel, F0Contour& f0) {
  const auto n = std::min<std::size_t>(mel.num_frames(), f0.size());
  mel.frames.conservativeResize(static_cast<Eigen::Index>(n), Eigen::NoChange);
  f0.values.resize(n);
  f0.voiced.resize(n);
}

AudioWaveform resample(const AudioWaveform& wav, Scalar target_rate) {
  if (!(target_rate > 0)) throw Error(ErrorCode::kInvalidConfig, "target rate must be positive");
  if (wav.sample_rate == target_rate || wav.samples.empty()) {
    AudioWaveform out = wav;
    out.sample_rate = target_rate;
    return out;
  }
  constexpr int kHalfTaps = 16;
  const Scalar ratio = target_rate / wav.sample_rate;
  const Scalar cutoff = std::min<Scalar>(1.0, ratio);
  const Scalar reach = kHalfTaps / cutoff;
  const auto n = static_cast<Eigen::Index>(wav.samples.size());
  AudioWaveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(std::llround(n * ratio)));
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const Scalar center = i / ratio;
    const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(center - reach)));
    const auto hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::floor(center + reach)));
    Scalar acc = 0.0;
    for (Eigen::Index k = lo; k <= hi; ++k) {
      const Scalar d = center - k;
      const Scalar arg = kPi * cutoff * d;
      const Scalar sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const Scalar taper = 0.5 + 0.5 * std::cos(kPi * d / reach);
      acc += wav.samples[k] * cutoff * sinc * taper;
    }
    out.samples[i] = acc;
  }
  return out;
}

}  // namespace stylevc
