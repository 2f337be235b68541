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

#include "stylevc/cli.h"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "stylevc/conversion.h"
#include "stylevc/corpus.h"
#include "stylevc/dataset.h"
#include "stylevc/evaluation.h"
#include "stylevc/features.h"
#include "stylevc/generator.h"
#include "stylevc/listening.h"
#include "stylevc/recognizer.h"

namespace stylevc::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

FlatConfig with_prefix(const std::string& prefix, const FlatConfig& flat) {
  FlatConfig out;
  for (const auto& [k, v] : flat.entries()) out.set(prefix + k, v);
  return out;
}

FlatConfig section(const FlatConfig& flat, const std::string& prefix) {
  FlatConfig out;
  for (const auto& [k, v] : flat.entries()) {
    if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
  }
  return out;
}

// Options shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--seed", common.seed, "Seed for every random choice of the run (overrides train.seed)");
  sub->add_option("--config", common.config_path, "Flat 'key = value' config file layered over the defaults")
      ->check(CLI::ExistingFile);
  sub->add_option("--set", common.overrides, "Config override key=value, repeatable; wins over --config");
  sub->add_option("--log-level", common.log_level, "Log level on stderr: trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
}

struct Run {
  FlatConfig config;
  std::uint64_t seed = 1;
  FeatureConfig features;
};

Run prepare(const std::string& command, const Common& common) {
  Run run;
  std::vector<std::string> overrides = common.overrides;
  if (common.seed) overrides.push_back("train.seed=" + std::to_string(*common.seed));
  run.config = layered_config(common.config_path, overrides);
  run.seed = static_cast<std::uint64_t>(run.config.get_int("train.seed", 1));
  run.features = FeatureConfig::from_flat(section(run.config, "features."));
  run.config.set("run.command", command);
  spdlog::set_level(spdlog::level::from_str(common.log_level));
  return run;
}

void dump_config(const Run& run, const std::string& path) {
  run.config.save(path);
  spdlog::info("effective config written to {}", path);
}

RecognizerConfig recognizer_config(const Run& run) {
  FlatConfig flat = section(run.config, "asr.");
  flat.set("n_mels", run.features.n_mels);
  auto cfg = RecognizerConfig::from_flat(flat);
  cfg.validate();
  return cfg;
}

GeneratorConfig generator_config(const Run& run) {
  FlatConfig flat = section(run.config, "tts.");
  flat.set("n_mels", run.features.n_mels);
  auto cfg = GeneratorConfig::from_flat(flat);
  cfg.validate();
  return cfg;
}

TrainSchedule schedule_of(Run& run, std::optional<long long> steps) {
  TrainSchedule s = TrainSchedule::from_flat(section(run.config, "train."));
  if (steps) s.steps = *steps;
  if (s.steps < 0) throw UsageError("--steps must be non-negative");
  run.config.set("train.steps", s.steps);
  return s;
}

PhonemeInventory inventory_for(const std::string& manifest, const std::string& explicit_path) {
  const std::string path =
      explicit_path.empty() ? (fs::path(manifest).parent_path() / "inventory.txt").string() : explicit_path;
  return PhonemeInventory::load(path);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string parent_or_dot(const std::string& path) {
  const auto p = fs::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

// Accepts a speaker name from the table or a 0-based index into it.
int resolve_speaker(const GeneratorCheckpoint& gen, const std::string& speaker) {
  if (const auto idx = gen.find_speaker(speaker)) return *idx;
  try {
    std::size_t used = 0;
    const int idx = std::stoi(speaker, &used);
    if (used == speaker.size() && idx >= 0 && idx < gen.num_speakers()) return idx;
  } catch (const std::exception&) {
  }
  std::string known;
  for (const auto& s : gen.speakers) known += " " + s;
  throw Error(ErrorCode::kInvalidInput, "unknown speaker '" + speaker + "'; the table has:" + known);
}

void write_f0_csv(const std::string& path, const F0Contour& f0) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "frame,time_s,f0_hz,voiced\n";
  char buf[96];
  for (std::size_t t = 0; t < f0.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%d\n", t, t * f0.frame_shift_ms / 1000.0, f0.values[t],
                  f0.voiced[t] ? 1 : 0);
    out << buf;
  }
}

std::atomic<ListeningServer*> g_server{nullptr};

extern "C" void on_stop_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

void ensure_logger() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("stylevc");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
  });
}

struct Commands {
  Common common;
  CLI::App app{"Style-preserving voice conversion toolkit", "stylevc"};

  // make-toy-corpus
  std::string toy_out;
  int toy_utterances = 20;
  int toy_speakers = 2;
  int toy_symbols = 6;

  // shared data flags
  std::string manifest;
  std::string inventory;
  std::string alignments;
  std::string out;
  std::optional<long long> steps;
  std::string asr;
  std::string tts;
  std::string init;

  // conversion
  std::string source;
  std::string reference;
  std::string speaker;
  std::optional<int> beam;
  std::string reference_policy = "source";
  bool no_audio = false;

  // eval-per
  std::string hyp;
  std::string ref;
  std::string hyp_out;

  // plot-f0
  std::vector<std::string> wavs;
  std::vector<std::string> labels;
  std::string csv;

  // serve-tests
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> create;

  std::map<std::string, CLI::App*> subs;

  Commands() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    auto* toy = add("make-toy-corpus", "Synthesize the toy corpus: wavs, manifest, inventory and alignments");
    toy->add_option("--out", toy_out, "Output directory")->required();
    toy->add_option("--utterances", toy_utterances, "Number of utterances")->capture_default_str();
    toy->add_option("--speakers", toy_speakers, "Number of speakers")->capture_default_str();
    toy->add_option("--symbols", toy_symbols, "Number of phoneme symbols")->capture_default_str();

    auto* feat = add("extract-features", "Write <id>.mel and <id>.f0.csv for every manifest utterance");
    data_flags(feat);
    feat->add_option("--out", out, "Output directory")->required();

    auto* align = add("align", "CTC forced alignment of a manifest with a recognizer checkpoint");
    align->add_option("--manifest", manifest, "Manifest TSV: id, audio, speaker, phonemes")->required();
    align->add_option("--asr", asr, "Recognizer checkpoint directory")->required();
    align->add_option("--out", out, "Alignment file to write")->required();

    auto* train_asr = add("train-asr", "Train the phoneme recognizer");
    data_flags(train_asr);
    train_asr->add_option("--out", out, "Checkpoint directory")->required();
    train_asr->add_option("--steps", steps, "Training steps (overrides train.steps); 0 writes the initialization");
    train_asr->add_option("--init", init, "Continue from this recognizer checkpoint");

    auto* train_tts = add("train-tts", "Train the speech generator");
    data_flags(train_tts);
    train_tts->add_option("--alignments", alignments, "Alignment file for the manifest")->required();
    train_tts->add_option("--out", out, "Checkpoint directory")->required();
    train_tts->add_option("--steps", steps, "Training steps (overrides train.steps)");

    auto* adapt = add("adapt", "Fine-tune a generator checkpoint on target-speaker data");
    adapt->add_option("--tts", tts, "Generator checkpoint to adapt")->required();
    adapt->add_option("--manifest", manifest, "Target-speaker manifest")->required();
    adapt->add_option("--alignments", alignments, "Alignment file for the manifest")->required();
    adapt->add_option("--out", out, "Adapted checkpoint directory")->required();
    adapt->add_option("--steps", steps, "Adaptation steps (overrides train.steps)");

    auto* convert = add("convert", "Convert one utterance; use the source as reference for style transfer");
    convert->add_option("--source", source, "Source speech WAV")->required()->check(CLI::ExistingFile);
    convert->add_option("--reference", reference, "Style reference WAV (defaults to the source)")
        ->check(CLI::ExistingFile);
    convert->add_option("--speaker", speaker, "Target speaker name or table index")->required();
    convert->add_option("--asr", asr, "Recognizer checkpoint directory")->required();
    convert->add_option("--tts", tts, "Generator checkpoint directory")->required();
    convert->add_option("--out", out, "Output prefix; writes <out>.wav, .mel and .meta")->required();
    convert->add_option("--beam", beam, "Recognition beam width (defaults to asr.beam)");
    convert->add_flag("--no-audio", no_audio, "Skip Griffin-Lim and write only the mel and metadata");

    auto* batch = add("batch-convert", "Convert every utterance of a manifest");
    batch->add_option("--manifest", manifest, "Source manifest")->required();
    batch->add_option("--reference-policy", reference_policy, "'source' or 'fixed'")
        ->check(CLI::IsMember({"source", "fixed"}))
        ->capture_default_str();
    batch->add_option("--reference", reference, "Reference WAV for the fixed policy");
    batch->add_option("--speaker", speaker, "Target speaker name or table index")->required();
    batch->add_option("--asr", asr, "Recognizer checkpoint directory")->required();
    batch->add_option("--tts", tts, "Generator checkpoint directory")->required();
    batch->add_option("--out", out, "Output directory")->required();
    batch->add_option("--beam", beam, "Recognition beam width (defaults to asr.beam)");
    batch->add_flag("--no-audio", no_audio, "Skip Griffin-Lim and write only mels and metadata");

    auto* per = add("eval-per", "Phone error rate of hypotheses against references");
    per->add_option("--hyp", hyp, "Hypothesis transcripts CSV (id,phonemes)");
    per->add_option("--ref", ref, "Reference transcripts CSV (id,phonemes); defaults to the manifest phonemes");
    per->add_option("--asr", asr, "Recognize --manifest audio with this checkpoint instead of reading --hyp");
    per->add_option("--manifest", manifest, "Manifest whose audio is recognized with --asr");
    per->add_option("--out", out, "Per-utterance CSV (id,sub,del,ins,ref_len)");
    per->add_option("--hyp-out", hyp_out, "Write recognized hypotheses to this transcripts CSV");
    per->add_option("--beam", beam, "Recognition beam width (defaults to asr.beam)");

    auto* plot = add("plot-f0", "Overlay interpolated F0 contours of several WAVs");
    plot->add_option("--wav", wavs, "Input WAV, repeatable; the first is the comparison anchor")
        ->required()
        ->check(CLI::ExistingFile);
    plot->add_option("--label", labels, "Line label per --wav (defaults to the file stem)");
    plot->add_option("--out", out, "SVG path")->required();
    plot->add_option("--csv", csv, "CSV twin of the plot (defaults to the SVG path with .csv)");

    auto* serve = add("serve-tests", "Serve AB/ABX listening tests over HTTP");
    serve->add_option("--store", store, "Directory holding test definitions, logs and audio")->required();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port; 0 picks a free one")->capture_default_str();
    serve->add_option("--create", create, "Test definition JSON to create before serving, repeatable")
        ->check(CLI::ExistingFile);
  }

  CLI::App* add(const std::string& name, const std::string& description) {
    CLI::App* sub = app.add_subcommand(name, description);
    add_common(sub, common);
    subs[name] = sub;
    return sub;
  }

  void data_flags(CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Manifest TSV: id, audio, speaker, phonemes")->required();
    sub->add_option("--inventory", inventory, "Phoneme inventory (defaults to inventory.txt beside the manifest)");
  }

  int run(const std::string& name, std::ostream& out_stream);

  int make_toy_corpus_cmd();
  int extract_features_cmd();
  int align_cmd();
  int train_asr_cmd();
  int train_tts_cmd();
  int adapt_cmd();
  int convert_cmd(std::ostream& os);
  int batch_convert_cmd(std::ostream& os);
  int eval_per_cmd(std::ostream& os);
  int plot_f0_cmd(std::ostream& os);
  int serve_tests_cmd(std::ostream& os);
};

int Commands::run(const std::string& name, std::ostream& os) {
  if (name == "make-toy-corpus") return make_toy_corpus_cmd();
  if (name == "extract-features") return extract_features_cmd();
  if (name == "align") return align_cmd();
  if (name == "train-asr") return train_asr_cmd();
  if (name == "train-tts") return train_tts_cmd();
  if (name == "adapt") return adapt_cmd();
  if (name == "convert") return convert_cmd(os);
  if (name == "batch-convert") return batch_convert_cmd(os);
  if (name == "eval-per") return eval_per_cmd(os);
  if (name == "plot-f0") return plot_f0_cmd(os);
  if (name == "serve-tests") return serve_tests_cmd(os);
  throw UsageError("unknown subcommand " + name);
}

int Commands::make_toy_corpus_cmd() {
  Run r = prepare("make-toy-corpus", common);
  ToyCorpusOptions opts;
  opts.num_utterances = toy_utterances;
  opts.num_speakers = toy_speakers;
  opts.num_symbols = toy_symbols;
  opts.features = r.features;
  if (common.seed) opts.seed = *common.seed;
  r.config.set("run.seed", static_cast<long long>(opts.seed));
  const ToyCorpus corpus = stylevc::make_toy_corpus(opts);
  write_toy_corpus(corpus, toy_out);
  dump_config(r, toy_out + "/effective_config.txt");
  spdlog::info("wrote {} utterances to {}", corpus.utterances.size(), toy_out);
  return kExitOk;
}

int Commands::extract_features_cmd() {
  Run r = prepare("extract-features", common);
  const auto inv = inventory_for(manifest, inventory);
  const auto records = load_manifest(manifest, inv);
  ensure_dir(out);
  int failures = 0;
  for (const auto& rec : records) {
    try {
      const AudioWaveform wav = read_wav(resolve_audio_path(manifest, rec.audio_path), r.features.sample_rate);
      MelSpectrogram mel = compute_log_mel(wav, r.features);
      F0Contour f0 = extract_f0(wav, r.features);
      reconcile_lengths(mel, f0);
      write_mel(out + "/" + rec.id + ".mel", mel);
      write_f0_csv(out + "/" + rec.id + ".f0.csv", f0);
    } catch (const std::exception& e) {
      ++failures;
      spdlog::error("{}: {}", rec.id, e.what());
    }
  }
  dump_config(r, out + "/effective_config.txt");
  spdlog::info("extracted features for {} of {} utterances", records.size() - failures, records.size());
  return failures ? kExitFailure : kExitOk;
}

int Commands::align_cmd() {
  Run r = prepare("align", common);
  const RecognizerCheckpoint ckpt = load_recognizer(asr);
  const auto records = load_manifest(manifest, ckpt.inventory);
  AlignmentTable table;
  int failures = 0;
  for (const auto& rec : records) {
    try {
      const AudioWaveform wav = read_wav(resolve_audio_path(manifest, rec.audio_path), r.features.sample_rate);
      const MelSpectrogram mel = compute_log_mel(wav, r.features);
      table[rec.id] = ctc_force_align(utterance_mvn(mel.frames), rec.phonemes, ckpt);
    } catch (const std::exception& e) {
      ++failures;
      spdlog::error("{}: {}", rec.id, e.what());
    }
  }
  ensure_dir(parent_or_dot(out));
  save_alignments(out, table);
  dump_config(r, out + ".config.txt");
  spdlog::info("aligned {} of {} utterances", table.size(), records.size());
  return failures ? kExitFailure : kExitOk;
}

int Commands::train_asr_cmd() {
  Run r = prepare("train-asr", common);
  const TrainSchedule schedule = schedule_of(r, steps);
  const auto inv = inventory_for(manifest, inventory);
  const auto data = load_utterances(load_manifest(manifest, inv), manifest, r.features);
  RecognizerTraining trained;
  if (init.empty()) {
    trained = train_recognizer(recognizer_examples(data), recognizer_config(r), inv, schedule);
  } else {
    trained = continue_recognizer(load_recognizer(init, &inv), recognizer_examples(data), schedule);
  }
  ensure_dir(out);
  save_recognizer(out, trained.checkpoint);
  write_recognizer_log(out + "/train_log.csv", trained.log);
  r.config.set("run.final_step", trained.checkpoint.step);
  dump_config(r, out + "/effective_config.txt");
  spdlog::info("recognizer saved to {} at step {}", out, trained.checkpoint.step);
  return kExitOk;
}

int Commands::train_tts_cmd() {
  Run r = prepare("train-tts", common);
  const TrainSchedule schedule = schedule_of(r, steps);
  const auto inv = inventory_for(manifest, inventory);
  const auto records = load_manifest(manifest, inv);
  const auto data = load_utterances(records, manifest, r.features);
  const AlignmentTable table = load_alignments(alignments, records, frame_counts(data));
  auto trained = train_generator(generator_utterances(data), table, generator_config(r), inv, schedule);
  ensure_dir(out);
  save_generator(out, trained.checkpoint);
  write_generator_log(out + "/train_log.csv", trained.log);
  dump_config(r, out + "/effective_config.txt");
  spdlog::info("generator saved to {} at step {}", out, trained.checkpoint.step);
  return kExitOk;
}

int Commands::adapt_cmd() {
  Run r = prepare("adapt", common);
  const TrainSchedule schedule = schedule_of(r, steps);
  GeneratorCheckpoint base = load_generator(tts);
  const auto records = load_manifest(manifest, base.inventory);
  const auto data = load_utterances(records, manifest, r.features);
  const AlignmentTable table = load_alignments(alignments, records, frame_counts(data));
  auto adapted = adapt_generator(std::move(base), generator_utterances(data), table, schedule);
  ensure_dir(out);
  save_generator(out, adapted.checkpoint);
  write_generator_log(out + "/train_log.csv", adapted.log);
  dump_config(r, out + "/effective_config.txt");
  spdlog::info("adapted generator saved to {}", out);
  return kExitOk;
}

int Commands::convert_cmd(std::ostream& os) {
  Run r = prepare("convert", common);
  const RecognizerCheckpoint rec = load_recognizer(asr);
  const GeneratorCheckpoint gen = load_generator(tts, &rec.inventory);
  const int target = resolve_speaker(gen, speaker);
  ConversionConfig cfg;
  cfg.features = r.features;
  cfg.beam = beam.value_or(rec.config.beam);
  cfg.synthesize_audio = !no_audio;
  const std::string ref_path = reference.empty() ? source : reference;
  const AudioWaveform src = read_wav(source, r.features.sample_rate);
  const AudioWaveform ref_wav = ref_path == source ? src : read_wav(ref_path, r.features.sample_rate);
  const ConversionResult result = convert(src, ref_wav, target, rec, gen, cfg);
  ensure_dir(parent_or_dot(out));
  if (cfg.synthesize_audio) write_wav(out + ".wav", result.wav);
  write_mel(out + ".mel", result.mel);
  write_conversion_meta(out + ".meta", fs::path(source).stem().string(), result, gen.speakers[target], ref_path,
                        gen.inventory);
  r.config.set("run.beam", cfg.beam);
  r.config.set("run.reference", ref_path);
  dump_config(r, out + ".config.txt");
  if (result.recognition_timed_out) spdlog::warn("recognition hit the length limit; a partial hypothesis was used");
  os << "phonemes: " << join_symbols(result.phonemes, gen.inventory) << '\n';
  os << "frames: " << result.mel.frames.rows() << '\n';
  return kExitOk;
}

int Commands::batch_convert_cmd(std::ostream& os) {
  Run r = prepare("batch-convert", common);
  const RecognizerCheckpoint rec = load_recognizer(asr);
  const GeneratorCheckpoint gen = load_generator(tts, &rec.inventory);
  BatchRequest request;
  request.records = load_manifest(manifest, rec.inventory);
  request.manifest_path = manifest;
  request.policy = parse_reference_policy(reference_policy);
  request.fixed_reference = reference;
  request.target_speaker = gen.speakers[resolve_speaker(gen, speaker)];
  request.out_dir = out;
  if (request.policy == ReferencePolicy::kFixed && reference.empty()) {
    throw UsageError("--reference-policy fixed needs --reference");
  }
  ConversionConfig cfg;
  cfg.features = r.features;
  cfg.beam = beam.value_or(rec.config.beam);
  cfg.synthesize_audio = !no_audio;
  const auto rows = batch_convert(request, rec, gen, cfg);
  r.config.set("run.beam", cfg.beam);
  dump_config(r, out + "/effective_config.txt");
  long long ok = 0;
  for (const auto& row : rows) ok += row.status == "ok";
  os << "converted " << ok << " of " << rows.size() << " utterances; report: " << out << "/report.csv\n";
  return kExitOk;
}

int Commands::eval_per_cmd(std::ostream& os) {
  Run r = prepare("eval-per", common);
  std::map<std::string, std::vector<std::string>> hyps, refs;
  if (!asr.empty()) {
    if (manifest.empty()) throw UsageError("--asr needs --manifest");
    if (!hyp.empty()) throw UsageError("give either --hyp or --asr, not both");
    const RecognizerCheckpoint rec = load_recognizer(asr);
    const auto records = load_manifest(manifest, rec.inventory);
    const int width = beam.value_or(rec.config.beam);
    for (const auto& lu : load_utterances(records, manifest, r.features)) {
      hyps[lu.record.id] = decode_symbols(recognize(utterance_mvn(lu.mel.frames), rec, width).phonemes, rec.inventory);
      if (ref.empty()) refs[lu.record.id] = decode_symbols(lu.record.phonemes, rec.inventory);
    }
    if (!hyp_out.empty()) write_transcripts(hyp_out, hyps);
  } else {
    if (hyp.empty() || ref.empty()) throw UsageError("eval-per needs --hyp and --ref, or --asr with --manifest");
    hyps = read_transcripts(hyp);
  }
  if (!ref.empty()) refs = read_transcripts(ref);
  PerResult pooled;
  const auto rows = per_rows(hyps, refs, &pooled);
  if (!out.empty()) {
    ensure_dir(parent_or_dot(out));
    write_per_csv(out, rows);
    dump_config(r, out + ".config.txt");
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "PER %.1f sub %.1f del %.1f ins %.1f utterances %zu ref_len %lld\n", pooled.per(),
                pooled.sub_rate(), pooled.del_rate(), pooled.ins_rate(), rows.size(), pooled.ref_len);
  os << buf;
  return kExitOk;
}

int Commands::plot_f0_cmd(std::ostream& os) {
  Run r = prepare("plot-f0", common);
  if (!labels.empty() && labels.size() != wavs.size()) throw UsageError("give one --label per --wav");
  std::vector<NamedContour> contours;
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    const AudioWaveform wav = read_wav(wavs[i], r.features.sample_rate);
    const std::string label = labels.empty() ? fs::path(wavs[i]).stem().string() : labels[i];
    contours.push_back({label, interpolate_f0(extract_f0(wav, r.features))});
  }
  const std::string csv_path = csv.empty() ? fs::path(out).replace_extension(".csv").string() : csv;
  ensure_dir(parent_or_dot(out));
  plot_f0_overlay(contours, out, csv_path);
  dump_config(r, out + ".config.txt");
  char buf[200];
  for (std::size_t i = 1; i < contours.size(); ++i) {
    const auto s = f0_similarity(contours[0].contour, contours[i].contour);
    std::snprintf(buf, sizeof(buf), "%s vs %s: rmse_hz %.3f correlation %.4f\n", contours[0].label.c_str(),
                  contours[i].label.c_str(), s.rmse_hz, s.correlation);
    os << buf;
  }
  return kExitOk;
}

int Commands::serve_tests_cmd(std::ostream& os) {
  Run r = prepare("serve-tests", common);
  ListeningService service(store, r.seed);
  for (const auto& path : create) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kValidation, path + ": " + e.what());
    }
    os << "created test " << service.create_test(definition_from_json(doc)) << '\n';
  }
  dump_config(r, store + "/effective_config.txt");
  ListeningServer server(service);
  int bound = port;
  if (port == 0) {
    bound = server.bind_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
  }
  os << "serving listening tests on http://" << host << ':' << bound << '\n' << std::flush;
  g_server = &server;
  auto previous_int = std::signal(SIGINT, on_stop_signal);
  auto previous_term = std::signal(SIGTERM, on_stop_signal);
  const bool ok = port == 0 ? server.listen_after_bind() : server.listen(host, port);
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  g_server = nullptr;
  if (!ok && port != 0) throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

}  // namespace

FlatConfig default_config() {
  FlatConfig flat;
  FlatConfig features = FeatureConfig().to_flat();
  FlatConfig asr = RecognizerConfig().to_flat();
  FlatConfig tts = GeneratorConfig().to_flat();
  // The mel size is shared; it is only configurable under features.
  FlatConfig asr_clean, tts_clean;
  for (const auto& [k, v] : asr.entries()) {
    if (k != "n_mels") asr_clean.set(k, v);
  }
  for (const auto& [k, v] : tts.entries()) {
    if (k != "n_mels") tts_clean.set(k, v);
  }
  flat.merge(with_prefix("features.", features));
  flat.merge(with_prefix("asr.", asr_clean));
  flat.merge(with_prefix("tts.", tts_clean));
  flat.merge(with_prefix("train.", TrainSchedule().to_flat()));
  return flat;
}

FlatConfig layered_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  FlatConfig config = default_config();
  const FlatConfig defaults = config;
  auto check_known = [&defaults](const std::string& key, const std::string& origin) {
    if (!defaults.contains(key)) throw UsageError("unknown config key '" + key + "' in " + origin);
  };
  if (!config_path.empty()) {
    const FlatConfig file = FlatConfig::load(config_path);
    for (const auto& [k, v] : file.entries()) check_known(k, config_path);
    config.merge(file);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    const FlatConfig one = FlatConfig::parse(kv);
    for (const auto& [k, v] : one.entries()) {
      check_known(k, "--set");
      config.set(k, v);
    }
  }
  return config;
}

std::map<std::string, std::vector<std::string>> subcommand_flags() {
  Commands commands;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [name, sub] : commands.subs) {
    for (const CLI::Option* opt : sub->get_options()) {
      for (const auto& lname : opt->get_lnames()) out[name].push_back("--" + lname);
    }
  }
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ensure_logger();
  Commands commands;
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    commands.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return commands.app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return commands.app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    CLI::App* failing = &commands.app;
    for (auto* sub : commands.app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitUsage;
  }
  const auto parsed = commands.app.get_subcommands();
  const std::string name = parsed.empty() ? "" : parsed.front()->get_name();
  try {
    return commands.run(name, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << commands.subs.at(name)->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int dispatch(const std::vector<std::string>& args) { return dispatch(args, std::cout, std::cerr); }

}  // namespace stylevc::cli
