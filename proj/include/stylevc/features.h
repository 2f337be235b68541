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

#ifndef STYLEVC_FEATURES_H_
#define STYLEVC_FEATURES_H_

#include <cmath>
#include <string>
#include <vector>

#include "stylevc/common.h"
#include "stylevc/flat_config.h"

namespace stylevc {

inline constexpr Scalar kLogFloor = 1e-10;
inline constexpr Scalar kMvnVarianceFloor = 1e-8;

struct AudioWaveform {
  std::vector<Scalar> samples;
  Scalar sample_rate = 24000;

  Scalar duration_seconds() const { return samples.size() / sample_rate; }
};

struct MelSpectrogram {
  Matrix frames;  // T x n_mels
  Scalar frame_shift_ms = 12.5;
  Scalar frame_length_ms = 50.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index num_bins() const { return frames.cols(); }
};

struct F0Contour {
  std::vector<Scalar> values;  // Hz, 0 at unvoiced frames before interpolation
  std::vector<bool> voiced;
  Scalar frame_shift_ms = 12.5;

  std::size_t size() const { return values.size(); }
  bool fully_voiced() const;
};

struct FeatureConfig {
  Scalar sample_rate = 24000;
  int n_mels = 80;
  Scalar frame_shift_ms = 12.5;
  Scalar frame_length_ms = 50.0;
  Scalar fmin = 0.0;
  Scalar fmax = 0.0;  // 0 means Nyquist
  Scalar f0_floor = 50.0;
  Scalar f0_ceil = 500.0;
  Scalar voicing_threshold = 0.3;
  Scalar silence_rms = 1e-4;
  int griffin_lim_iterations = 60;

  int shift_samples() const { return static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0)); }
  int window_samples() const { return static_cast<int>(std::lround(sample_rate * frame_length_ms / 1000.0)); }
  int fft_size() const;
  Scalar upper_frequency() const { return fmax > 0 ? fmax : sample_rate / 2; }

  void validate() const;

  FlatConfig to_flat() const;
  static FeatureConfig from_flat(const FlatConfig& flat);
};

// Number of analysis frames for a signal of `num_samples`: ceil(num_samples / shift).
Eigen::Index num_frames_for(std::size_t num_samples, const FeatureConfig& cfg);

// HTK mel-scale triangular filterbank, n_mels x (fft_size / 2 + 1).
Matrix mel_filterbank(const FeatureConfig& cfg);

// Centered, reflect-padded, Hann-windowed magnitude STFT (T x (fft_size / 2 + 1)).
Matrix magnitude_stft(const std::vector<Scalar>& samples, const FeatureConfig& cfg);

MelSpectrogram compute_log_mel(const AudioWaveform& wav, const FeatureConfig& cfg);

// Per-dimension standardization over the utterance. Constant dimensions map to zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> utterance_mvn(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  MatrixX<S> out(x.rows(), x.cols());
  const auto n = static_cast<S>(x.rows());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const S mean = x.col(d).sum() / n;
    const S var = (x.col(d).array() - mean).square().sum() / n;
    const S denom = std::sqrt(std::max(var, static_cast<S>(kMvnVarianceFloor)));
    out.col(d) = (x.col(d).array() - mean) / denom;
  }
  return out;
}

MelSpectrogram utterance_mvn(const MelSpectrogram& mel);

F0Contour extract_f0(const AudioWaveform& wav, const FeatureConfig& cfg);

F0Contour interpolate_f0(const F0Contour& contour);

// Griffin-Lim inversion; output has exactly T * shift samples.
AudioWaveform invert_mel(const MelSpectrogram& mel, const FeatureConfig& cfg);

// Mean over mel bins of the Pearson correlation along time. Bins that are
// constant in either input are skipped; returns 0 if every bin is constant.
Scalar per_bin_correlation(const Matrix& a, const Matrix& b);

// Truncates both to the shorter length.
void reconcile_lengths(MelSpectrogram& mel, F0Contour& f0);

// RIFF WAV, 16-bit PCM mono. Reading resamples to `target_rate` when it is > 0.
AudioWaveform read_wav(const std::string& path, Scalar target_rate = 0);
void write_wav(const std::string& path, const AudioWaveform& wav);

AudioWaveform resample(const AudioWaveform& wav, Scalar target_rate);

// Binary matrix file: "STVCMEL1", int32 rows, int32 cols, float64 frame shift
// (ms), float64 frame length (ms), then rows*cols float32 row-major, little endian.
void write_mel(const std::string& path, const MelSpectrogram& mel);
MelSpectrogram read_mel(const std::string& path);

}  // namespace stylevc

#endif  // STYLEVC_FEATURES_H_
