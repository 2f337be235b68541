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
#include <sstream>

#include "doctest.h"
#include "stylevc/cli.h"
#include "stylevc/evaluation.h"
#include "stylevc/recognizer.h"

using namespace stylevc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "stylevc");
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::dispatch(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallModels =
    "asr.model_width = 32\nasr.ffn_width = 64\nasr.attention_heads = 4\nasr.encoder_blocks = 2\n"
    "asr.decoder_blocks = 1\nasr.frontend_channels = 16\n"
    "tts.phoneme_embedding = 32\ntts.cbhg_width = 16\ntts.cbhg_bank_size = 4\ntts.cbhg_highway_layers = 2\n"
    "tts.style_dim = 32\ntts.speaker_dim = 32\ntts.reference_channels = 16\ntts.reference_gru = 16\n"
    "tts.rhythm_hidden = 32\ntts.decoder_lstm = 64\ntts.postnet_channels = 32\ntts.postnet_layers = 3\n"
    "train.peak_lr = 0.003\ntrain.warmup_steps = 50\n";

// A toy corpus plus small trained checkpoints, built once through the CLI.
struct Workspace {
  fs::path root;
  std::string config, corpus, manifest, asr, tts;

  Workspace() {
    root = fs::temp_directory_path() / "stylevc_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    config = (root / "small.cfg").string();
    std::ofstream(config) << kSmallModels;
    corpus = (root / "corpus").string();
    manifest = corpus + "/manifest.tsv";
    asr = (root / "asr").string();
    tts = (root / "tts").string();
    REQUIRE(run({"make-toy-corpus", "--out", corpus, "--utterances", "4", "--speakers", "2"}).code == 0);
    REQUIRE(run({"train-asr", "--manifest", manifest, "--out", asr, "--steps", "300", "--config", config}).code == 0);
    REQUIRE(run({"train-tts", "--manifest", manifest, "--alignments", corpus + "/alignments.txt", "--out", tts,
                 "--steps", "60", "--config", config})
                .code == 0);
  }

  std::string wav(int i) const {
    char id[16];
    std::snprintf(id, sizeof(id), "utt%03d", i);
    return corpus + "/wav/" + id + ".wav";
  }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

}  // namespace

TEST_CASE("every subcommand documents its flags") {
  const auto flags = cli::subcommand_flags();
  CHECK(flags.size() == 11);
  for (const auto& [name, names] : flags) {
    const auto o = run({name, "--help"});
    CHECK_MESSAGE(o.code == 0, name);
    for (const auto& flag : names) CHECK_MESSAGE(o.out.find(flag) != std::string::npos, name << " " << flag);
  }
  const auto top = run({"--help"});
  CHECK(top.code == 0);
  for (const auto& [name, names] : flags) CHECK(top.out.find(name) != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"eval-per", "--no-such-flag"}).code == 2);
  CHECK(run({"train-asr", "--out", "x"}).code == 2);
  const auto o = run({"make-toy-corpus", "--out", (fs::temp_directory_path() / "stylevc_cli_bad").string(), "--set",
                      "asr.unknown_key=1"});
  CHECK(o.code == 2);
  CHECK(o.err.find("asr.unknown_key") != std::string::npos);
  CHECK(run({"make-toy-corpus", "--out", "x", "--set", "no_equals_sign"}).code == 2);
}

TEST_CASE("layered config: defaults, then file, then --set") {
  const auto defaults = cli::default_config();
  CHECK(defaults.contains("features.n_mels"));
  CHECK(defaults.contains("asr.lambda"));
  CHECK(defaults.contains("tts.style_dim"));
  CHECK(defaults.contains("train.peak_lr"));
  const auto path = (fs::temp_directory_path() / "stylevc_layered.cfg").string();
  std::ofstream(path) << "asr.beam = 7\ntrain.steps = 12\n";
  const auto cfg = cli::layered_config(path, {"train.steps=99"});
  CHECK(cfg.get_int("asr.beam", 0) == 7);
  CHECK(cfg.get_int("train.steps", 0) == 99);
  CHECK(cfg.get_string("features.n_mels", "") == defaults.get_string("features.n_mels", "?"));
  CHECK_THROWS(cli::layered_config("", {"tts.bogus=1"}));
}

TEST_CASE("eval-per on identical transcripts reports zero") {
  const auto dir = fs::temp_directory_path() / "stylevc_cli_per";
  fs::create_directories(dir);
  std::map<std::string, std::vector<std::string>> t{{"u1", {"a", "b", "c"}}, {"u2", {"c", "a"}}};
  write_transcripts((dir / "t.csv").string(), t);
  const auto o = run({"eval-per", "--hyp", (dir / "t.csv").string(), "--ref", (dir / "t.csv").string(), "--out",
                      (dir / "per.csv").string()});
  CHECK(o.code == 0);
  CHECK(o.out.rfind("PER 0.0 ", 0) == 0);
  CHECK(read_per_csv((dir / "per.csv").string()).size() == 2);
  CHECK(run({"eval-per", "--hyp", (dir / "missing.csv").string(), "--ref", (dir / "t.csv").string()}).code == 1);
}

TEST_CASE("zero-step training still writes a checkpoint") {
  const auto& w = workspace();
  const auto out = (w.root / "asr0").string();
  CHECK(run({"train-asr", "--manifest", w.manifest, "--out", out, "--steps", "0", "--config", w.config}).code == 0);
  const auto ckpt = load_recognizer(out);
  CHECK(ckpt.step == 0);
  CHECK(ckpt.config.model_width == 32);
  const auto dumped = FlatConfig::load(out + "/effective_config.txt");
  CHECK(dumped.get_string("run.command", "") == "train-asr");
  CHECK(dumped.get_int("asr.model_width", 0) == 32);
  CHECK(dumped.get_int("train.steps", -1) == 0);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto& w = workspace();
  for (int pass = 0; pass < 2; ++pass) {
    const auto n = std::to_string(pass);
    CHECK(run({"train-asr", "--manifest", w.manifest, "--out", (w.root / ("asr_seed" + n)).string(), "--steps", "10",
               "--seed", "42", "--config", w.config})
              .code == 0);
    CHECK(run({"train-tts", "--manifest", w.manifest, "--alignments", w.corpus + "/alignments.txt", "--out",
               (w.root / ("tts_seed" + n)).string(), "--steps", "10", "--seed", "42", "--config", w.config})
              .code == 0);
  }
  for (const std::string kind : {"asr_seed", "tts_seed"}) {
    const auto a = slurp(w.root / (kind + "0") / "train_log.csv");
    const auto b = slurp(w.root / (kind + "1") / "train_log.csv");
    CHECK(std::count(a.begin(), a.end(), '\n') == 11);
    CHECK(a == b);
  }
  CHECK(run({"train-asr", "--manifest", w.manifest, "--out", (w.root / "asr_seed2").string(), "--steps", "10", "--seed",
             "43", "--config", w.config})
            .code == 0);
  CHECK(slurp(w.root / "asr_seed2" / "train_log.csv") != slurp(w.root / "asr_seed0" / "train_log.csv"));
}

TEST_CASE("feature extraction, alignment and recognition scoring") {
  const auto& w = workspace();
  const auto feats = (w.root / "feats").string();
  CHECK(run({"extract-features", "--manifest", w.manifest, "--out", feats}).code == 0);
  CHECK(fs::exists(feats + "/utt000.mel"));
  CHECK(fs::exists(feats + "/utt000.f0.csv"));
  const auto align = (w.root / "align.txt").string();
  CHECK(run({"align", "--manifest", w.manifest, "--asr", w.asr, "--out", align}).code == 0);
  CHECK(fs::exists(align));
  const auto per = run({"eval-per", "--asr", w.asr, "--manifest", w.manifest, "--hyp-out", (w.root / "hyp.csv").string()});
  CHECK(per.code == 0);
  CHECK(per.out.find("utterances 4") != std::string::npos);
  CHECK(read_transcripts((w.root / "hyp.csv").string()).size() == 4);
}

TEST_CASE("convert, batch-convert and plot-f0") {
  const auto& w = workspace();
  const auto prefix = (w.root / "conv" / "one").string();
  const auto o = run({"convert", "--source", w.wav(0), "--speaker", "1", "--asr", w.asr, "--tts", w.tts, "--out", prefix});
  CHECK(o.code == 0);
  for (const char* ext : {".wav", ".mel", ".meta", ".config.txt"}) CHECK(fs::exists(prefix + ext));
  const auto meta = FlatConfig::load(prefix + ".meta");
  CHECK(meta.get_string("reference", "") == w.wav(0));
  CHECK(run({"convert", "--source", w.wav(0), "--speaker", "nobody", "--asr", w.asr, "--tts", w.tts, "--out", prefix})
            .code == 1);

  const auto batch = (w.root / "batch").string();
  CHECK(run({"batch-convert", "--manifest", w.manifest, "--speaker", "0", "--asr", w.asr, "--tts", w.tts, "--out", batch,
             "--no-audio"})
            .code == 0);
  CHECK(fs::exists(batch + "/report.csv"));
  CHECK(fs::exists(batch + "/utt003.mel"));
  CHECK_FALSE(fs::exists(batch + "/utt003.wav"));

  const auto svg = (w.root / "plot" / "f0.svg").string();
  const auto plot = run({"plot-f0", "--wav", w.wav(0), "--wav", prefix + ".wav", "--label", "source", "--label",
                         "converted", "--out", svg});
  CHECK(plot.code == 0);
  CHECK(fs::exists(svg));
  CHECK(read_f0_csv((w.root / "plot" / "f0.csv").string()).size() == 2);
}
