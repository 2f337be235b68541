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
#include <fstream>

#include "doctest.h"
#include "stylevc/conversion.h"
#include "stylevc/flat_config.h"
#include "support/toy_models.h"

using namespace stylevc;

namespace {

const toy::Models& models() {
  static const toy::Models m = [] {
    ToyCorpusOptions opts;
    opts.num_utterances = 6;
    opts.seed = 11;
    return toy::train_models(opts, 300, 150);
  }();
  return m;
}

ConversionConfig quick_config() {
  ConversionConfig c;
  c.synthesize_audio = false;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("output length equals the sum of the quantized rhythm predictions") {
  const auto& m = models();
  ConversionConfig cfg;
  for (const auto& u : m.corpus.utterances) {
    const auto r = convert(u.wav, u.wav, 0, m.recognizer, m.generator, cfg);
    CHECK(r.phonemes == u.record.phonemes);
    CHECK(r.durations.size() == r.phonemes.size());
    CHECK(r.durations == quantize_durations(r.predicted_durations));
    CHECK(r.mel.frames.rows() == r.durations.total());
    CHECK(r.mel.frames.cols() == cfg.features.n_mels);
    CHECK(r.style.size() == m.generator.config.style_dim);
    CHECK_FALSE(r.wav.samples.empty());
    for (int d : r.durations.frames) CHECK(d >= 1);
  }
}

TEST_CASE("speaker and reference change the voice, never the content") {
  const auto& m = models();
  const auto& source = m.corpus.utterances[0].wav;
  const auto& other = m.corpus.utterances[3].wav;
  const auto base = convert(source, source, 0, m.recognizer, m.generator, quick_config());
  const auto speaker1 = convert(source, source, 1, m.recognizer, m.generator, quick_config());
  const auto restyled = convert(source, other, 0, m.recognizer, m.generator, quick_config());
  CHECK(speaker1.phonemes == base.phonemes);
  CHECK(restyled.phonemes == base.phonemes);
  CHECK(restyled.style != base.style);
  const bool speaker_differs = speaker1.predicted_durations != base.predicted_durations ||
                               speaker1.mel.frames.rows() != base.mel.frames.rows() ||
                               speaker1.mel.frames != base.mel.frames;
  CHECK(speaker_differs);
  const auto again = convert(source, source, 0, m.recognizer, m.generator, quick_config());
  CHECK(again.mel.frames == base.mel.frames);
}

TEST_CASE("conversion rejects unknown speakers and mismatched models") {
  const auto& m = models();
  const auto& source = m.corpus.utterances[0].wav;
  CHECK(code_of([&] { convert(source, source, 2, m.recognizer, m.generator, quick_config()); }) ==
        ErrorCode::kInvalidInput);
  CHECK(code_of([&] { convert(source, source, -1, m.recognizer, m.generator, quick_config()); }) ==
        ErrorCode::kInvalidInput);
  auto other = m.generator;
  other.inventory = PhonemeInventory({"x", "y"});
  CHECK(code_of([&] { convert(source, source, 0, m.recognizer, other, quick_config()); }) == ErrorCode::kInvalidInput);
  CHECK(parse_reference_policy("fixed") == ReferencePolicy::kFixed);
  CHECK(code_of([&] { parse_reference_policy("random"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("batch conversion reports per-utterance failures") {
  const auto& m = models();
  const auto dir = std::filesystem::temp_directory_path() / "stylevc_conversion_batch";
  std::filesystem::remove_all(dir);
  write_toy_corpus(m.corpus, dir.string());
  { std::ofstream(dir / "wav" / "broken.wav") << "not a wav file"; }

  BatchRequest req;
  req.manifest_path = (dir / "manifest.tsv").string();
  req.records = load_manifest(req.manifest_path, m.corpus.inventory);
  req.records.resize(2);
  auto broken = req.records[0];
  broken.id = "broken";
  broken.audio_path = "wav/broken.wav";
  req.records.push_back(broken);
  req.target_speaker = m.generator.speakers[1];
  req.out_dir = (dir / "out").string();
  ConversionConfig cfg;
  const auto rows = batch_convert(req, m.recognizer, m.generator, cfg);
  REQUIRE(rows.size() == 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(rows[i].status == "ok");
    CHECK(rows[i].reference == rows[i].id);
    CHECK(rows[i].output_frames > 0);
    CHECK(std::filesystem::exists(dir / "out" / (rows[i].id + ".wav")));
    const auto mel = read_mel((dir / "out" / (rows[i].id + ".mel")).string());
    CHECK(mel.frames.rows() == rows[i].output_frames);

    const auto meta = FlatConfig::load((dir / "out" / (rows[i].id + ".meta")).string());
    CHECK(meta.get_string("id", "") == rows[i].id);
    CHECK(meta.get_string("speaker", "") == req.target_speaker);
    CHECK(meta.get_string("reference", "") == rows[i].id);
    CHECK(meta.get_int("frames", -1) == rows[i].output_frames);
    CHECK(meta.get_string("phonemes", "") == join_symbols(req.records[i].phonemes, m.corpus.inventory));
  }
  CHECK(rows[2].status == "failed");
  CHECK_FALSE(rows[2].message.empty());
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "broken.mel"));

  std::ifstream report(dir / "out" / "report.csv");
  std::string line;
  std::getline(report, line);
  CHECK(line == "id,status,output_frames,wall_time_s,reference,message");
  int lines = 0;
  while (std::getline(report, line)) ++lines;
  CHECK(lines == 3);

  BatchRequest fixed = req;
  fixed.records.resize(1);
  fixed.policy = ReferencePolicy::kFixed;
  fixed.fixed_reference = (dir / "wav" / (req.records[1].id + ".wav")).string();
  fixed.out_dir = (dir / "fixed").string();
  const auto fixed_rows = batch_convert(fixed, m.recognizer, m.generator, quick_config());
  CHECK(fixed_rows[0].status == "ok");
  CHECK(fixed_rows[0].reference == fixed.fixed_reference);

  BatchRequest empty = req;
  empty.records.clear();
  CHECK(code_of([&] { batch_convert(empty, m.recognizer, m.generator, cfg); }) == ErrorCode::kInvalidInput);
  BatchRequest nobody = req;
  nobody.target_speaker = "nobody";
  CHECK(code_of([&] { batch_convert(nobody, m.recognizer, m.generator, cfg); }) == ErrorCode::kInvalidInput);
  std::filesystem::remove_all(dir);
}
