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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "stylevc/features.h"

namespace stylevc {

namespace {

constexpr char kMelMagic[8] = {'S', 'T', 'V', 'C', 'M', 'E', 'L', '1'};

template <typename T>
T read_le(const unsigned char* p) {
  T value{};
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

AudioWaveform read_wav(const std::string& path, Scalar target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::kInvalidInput, path + " is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto chunk_size = read_le<std::uint32_t>(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(chunk_size, bytes.size() - body);
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0 && available >= 16) {
      format = read_le<std::uint16_t>(&bytes[body]);
      channels = read_le<std::uint16_t>(&bytes[body + 2]);
      rate = read_le<std::uint32_t>(&bytes[body + 4]);
      bits = read_le<std::uint16_t>(&bytes[body + 14]);
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      data = &bytes[body];
      data_size = available;
    }
    pos = body + chunk_size + (chunk_size & 1U);
  }
  if (format != 1 || bits != 16) {
    throw Error(ErrorCode::kInvalidInput, path + ": only 16-bit PCM is supported");
  }
  if (channels != 1) throw Error(ErrorCode::kInvalidInput, path + ": only mono audio is supported");
  if (data == nullptr || rate == 0) throw Error(ErrorCode::kInvalidInput, path + ": missing data chunk");

  AudioWaveform wav;
  wav.sample_rate = rate;
  wav.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < wav.samples.size(); ++i) {
    wav.samples[i] = read_le<std::int16_t>(data + 2 * i) / 32768.0;
  }
  if (target_rate > 0 && target_rate != wav.sample_rate) return resample(wav, target_rate);
  return wav;
}

void write_wav(const std::string& path, const AudioWaveform& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const auto rate = static_cast<std::uint32_t>(std::lround(wav.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (Scalar s : wav.samples) {
    const Scalar clipped = std::clamp<Scalar>(s, -1.0, 32767.0 / 32768.0);
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
  }
}

void write_mel(const std::string& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(kMelMagic, sizeof(kMelMagic));
  write_le<std::int32_t>(out, static_cast<std::int32_t>(mel.num_frames()));
  write_le<std::int32_t>(out, static_cast<std::int32_t>(mel.num_bins()));
  write_le<double>(out, mel.frame_shift_ms);
  write_le<double>(out, mel.frame_length_ms);
  for (Eigen::Index t = 0; t < mel.num_frames(); ++t) {
    for (Eigen::Index d = 0; d < mel.num_bins(); ++d) write_le<float>(out, static_cast<float>(mel.frames(t, d)));
  }
}

MelSpectrogram read_mel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || std::memcmp(magic.data(), kMelMagic, sizeof(kMelMagic)) != 0) {
    throw Error(ErrorCode::kInvalidInput, path + " is not a mel matrix file");
  }
  std::int32_t rows = 0, cols = 0;
  MelSpectrogram mel;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  in.read(reinterpret_cast<char*>(&mel.frame_shift_ms), 8);
  in.read(reinterpret_cast<char*>(&mel.frame_length_ms), 8);
  if (!in || rows < 0 || cols < 0) throw Error(ErrorCode::kInvalidInput, path + ": bad header");
  mel.frames.resize(rows, cols);
  std::vector<float> buffer(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 4));
  if (!in) throw Error(ErrorCode::kInvalidInput, path + ": truncated payload");
  for (std::int32_t t = 0; t < rows; ++t) {
    for (std::int32_t d = 0; d < cols; ++d) mel.frames(t, d) = buffer[static_cast<std::size_t>(t) * cols + d];
  }
  return mel;
}

}  // namespace stylevc
