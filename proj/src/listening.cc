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

#include "stylevc/listening.h"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace stylevc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::kValidation, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kValidation, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_string(TrialKind kind) { return kind == TrialKind::kAB ? "AB" : "ABX"; }

TrialKind parse_trial_kind(const std::string& text) {
  if (text == "AB") return TrialKind::kAB;
  if (text == "ABX") return TrialKind::kABX;
  throw Error(ErrorCode::kValidation, "trial kind must be AB or ABX, got '" + text + "'");
}

std::string to_string(Choice choice) {
  switch (choice) {
    case Choice::kA: return "A";
    case Choice::kB: return "B";
    case Choice::kNP: return "NP";
  }
  return "NP";
}

Choice parse_choice(const std::string& text) {
  if (text == "A") return Choice::kA;
  if (text == "B") return Choice::kB;
  if (text == "NP") return Choice::kNP;
  throw Error(ErrorCode::kValidation, "choice must be A, B or NP, got '" + text + "'");
}

namespace {

json trial_json(const Trial& t) {
  json j{{"trial_id", t.trial_id},     {"kind", to_string(t.kind)}, {"stimulus_a", t.stimulus_a},
         {"stimulus_b", t.stimulus_b}, {"prompt", t.prompt}};
  if (t.reference_x) j["reference_x"] = *t.reference_x;
  return j;
}

}  // namespace

json to_json(const TestDefinition& def, bool include_systems) {
  json audio = json::array();
  for (const auto& a : def.audio) {
    json e{{"id", a.id}};
    if (include_systems) {
      e["path"] = a.path;
      e["system"] = a.system;
    }
    audio.push_back(e);
  }
  json trials = json::array();
  for (const auto& t : def.trials) trials.push_back(trial_json(t));
  return json{{"test_id", def.test_id}, {"name", def.name}, {"audio", audio}, {"trials", trials}};
}

TestDefinition definition_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kValidation, "test definition must be an object");
  TestDefinition def;
  def.test_id = doc.value("test_id", std::string());
  def.name = doc.value("name", std::string());
  const std::string default_kind = doc.value("kind", std::string("AB"));
  for (const auto& a : field<json>(doc, "audio")) {
    def.audio.push_back({field<std::string>(a, "id"), field<std::string>(a, "path"), a.value("system", std::string())});
  }
  for (const auto& t : field<json>(doc, "trials")) {
    Trial trial;
    trial.trial_id = field<std::string>(t, "trial_id");
    trial.kind = parse_trial_kind(t.value("kind", default_kind));
    trial.stimulus_a = field<std::string>(t, "stimulus_a");
    trial.stimulus_b = field<std::string>(t, "stimulus_b");
    if (t.contains("reference_x") && !t.at("reference_x").is_null()) {
      trial.reference_x = field<std::string>(t, "reference_x");
    }
    trial.prompt = t.value("prompt", std::string());
    def.trials.push_back(std::move(trial));
  }
  return def;
}

json to_json(const ServedTrial& served) {
  json j = trial_json(served.trial);
  j["test_id"] = served.test_id;
  j["index"] = served.index;
  j["total"] = served.total;
  j["done"] = false;
  return j;
}

json to_json(const Response& r) {
  return json{{"test_id", r.test_id},     {"trial_id", r.trial_id},         {"listener_id", r.listener_id},
              {"choice", to_string(r.choice)}, {"replay_count", r.replay_count}, {"timestamp", r.timestamp}};
}

Response response_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kValidation, "response must be an object");
  Response r;
  r.test_id = doc.value("test_id", std::string());
  r.trial_id = field<std::string>(doc, "trial_id");
  r.listener_id = field<std::string>(doc, "listener_id");
  r.choice = parse_choice(field<std::string>(doc, "choice"));
  r.replay_count = field<int>(doc, "replay_count");
  r.timestamp = doc.value("timestamp", std::string());
  return r;
}

json to_json(const PreferenceSummary& s) {
  json options = json::array();
  for (const auto& opt : s.options) {
    options.push_back({{"option", opt}, {"count", s.counts.at(opt)}, {"pct", s.percentages.at(opt)}});
  }
  return json{{"test_id", s.test_id}, {"trials", s.trials}, {"options", options}};
}

ListeningService::ListeningService(std::string store_dir, std::uint64_t seed)
    : store_dir_(std::move(store_dir)), seed_(seed) {
  fs::create_directories(fs::path(store_dir_) / "tests");
  fs::create_directories(fs::path(store_dir_) / "audio");
  load_existing();
}

std::string ListeningService::test_dir(const std::string& test_id) const {
  return (fs::path(store_dir_) / "tests" / test_id).string();
}

void ListeningService::append(const std::string& test_id, const std::string& file, const json& record) const {
  std::ofstream out(fs::path(test_dir(test_id)) / file, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + file + " of test " + test_id);
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write to " + file + " of test " + test_id + " failed");
}

void ListeningService::validate(const TestDefinition& def) const {
  if (def.trials.empty()) throw Error(ErrorCode::kValidation, "a test needs at least one trial");
  std::map<std::string, const AudioEntry*> audio;
  for (const auto& a : def.audio) {
    if (!safe_id(a.id)) throw Error(ErrorCode::kValidation, "audio id '" + a.id + "' is not a plain name");
    if (!audio.emplace(a.id, &a).second) throw Error(ErrorCode::kValidation, "duplicate audio id " + a.id);
    if (!fs::is_regular_file(a.path)) {
      throw Error(ErrorCode::kValidation, "audio " + a.id + ": file " + a.path + " does not exist");
    }
    const auto known = audio_files_.find(a.id);
    if (known != audio_files_.end() && read_file(known->second) != read_file(a.path)) {
      throw Error(ErrorCode::kValidation, "audio id " + a.id + " is already registered with different content");
    }
  }
  std::set<std::string> trial_ids;
  for (const auto& t : def.trials) {
    if (t.trial_id.empty()) throw Error(ErrorCode::kValidation, "trial without trial_id");
    if (!trial_ids.insert(t.trial_id).second) throw Error(ErrorCode::kValidation, "duplicate trial id " + t.trial_id);
    if (t.kind == TrialKind::kABX && !t.reference_x) {
      throw Error(ErrorCode::kValidation, "ABX trial " + t.trial_id + " has no reference_x");
    }
    if (t.kind == TrialKind::kAB && t.reference_x) {
      throw Error(ErrorCode::kValidation, "AB trial " + t.trial_id + " must not carry reference_x");
    }
    std::vector<std::string> refs{t.stimulus_a, t.stimulus_b};
    if (t.reference_x) refs.push_back(*t.reference_x);
    for (const auto& r : refs) {
      if (!audio.count(r)) throw Error(ErrorCode::kValidation, "trial " + t.trial_id + " references unknown audio " + r);
    }
    const auto& sys_a = audio.at(t.stimulus_a)->system;
    const auto& sys_b = audio.at(t.stimulus_b)->system;
    if (sys_a.empty() || sys_b.empty()) {
      throw Error(ErrorCode::kValidation, "stimuli of trial " + t.trial_id + " need a system label");
    }
    if (sys_a == sys_b) throw Error(ErrorCode::kValidation, "stimuli of trial " + t.trial_id + " come from one system");
    if (sys_a == kNoPreference || sys_b == kNoPreference) {
      throw Error(ErrorCode::kValidation, "'" + kNoPreference + "' is reserved and cannot name a system");
    }
  }
}

std::string ListeningService::create_test(TestDefinition def) {
  std::lock_guard lock(mutex_);
  if (def.test_id.empty()) {
    int n = static_cast<int>(tests_.size()) + 1;
    char buf[32];
    do {
      std::snprintf(buf, sizeof(buf), "test-%04d", n++);
    } while (tests_.count(buf));
    def.test_id = buf;
  }
  if (!safe_id(def.test_id)) throw Error(ErrorCode::kValidation, "test id '" + def.test_id + "' is not a plain name");
  if (tests_.count(def.test_id)) throw Error(ErrorCode::kConflict, "test " + def.test_id + " already exists");
  validate(def);

  // Registered audio is copied into the store so served bytes never change.
  for (auto& a : def.audio) {
    const fs::path stored = fs::path(store_dir_) / "audio" / (a.id + ".wav");
    if (!audio_files_.count(a.id)) {
      fs::copy_file(a.path, stored, fs::copy_options::overwrite_existing);
      audio_files_[a.id] = stored.string();
    }
    a.path = stored.string();
  }
  fs::create_directories(test_dir(def.test_id));
  {
    std::ofstream out(fs::path(test_dir(def.test_id)) / "definition.json");
    if (!out) throw Error(ErrorCode::kIo, "cannot persist test " + def.test_id);
    out << to_json(def, true).dump(2) << '\n';
  }
  auto state = std::make_unique<TestState>();
  state->definition = std::move(def);
  for (std::size_t i = 0; i < state->definition.trials.size(); ++i) {
    state->trial_index[state->definition.trials[i].trial_id] = static_cast<int>(i);
  }
  for (const auto& a : state->definition.audio) state->audio[a.id] = &a;
  const std::string id = state->definition.test_id;
  tests_[id] = std::move(state);
  spdlog::info("created listening test {} with {} trials", id, tests_[id]->definition.trials.size());
  return id;
}

ListeningService::TestState& ListeningService::state_of(const std::string& test_id) {
  const auto it = tests_.find(test_id);
  if (it == tests_.end()) throw Error(ErrorCode::kNotFound, "unknown test " + test_id);
  return *it->second;
}

const ListeningService::TestState& ListeningService::state_of(const std::string& test_id) const {
  const auto it = tests_.find(test_id);
  if (it == tests_.end()) throw Error(ErrorCode::kNotFound, "unknown test " + test_id);
  return *it->second;
}

TestDefinition ListeningService::get_test(const std::string& test_id) const {
  std::lock_guard lock(mutex_);
  return state_of(test_id).definition;
}

std::vector<std::string> ListeningService::test_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : tests_) ids.push_back(id);
  return ids;
}

ListeningService::Session ListeningService::make_session(const TestState& state,
                                                         const std::string& listener_id) const {
  const std::size_t n = state.definition.trials.size();
  std::mt19937_64 rng(fnv1a(listener_id, fnv1a(state.definition.test_id, seed_ ^ 0x5bd1e995ULL)));
  Session s;
  s.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.order[i] = static_cast<int>(i);
  std::shuffle(s.order.begin(), s.order.end(), rng);
  s.swapped.resize(n);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) s.swapped[i] = coin(rng);
  return s;
}

std::optional<ServedTrial> ListeningService::next_trial(const std::string& test_id, const std::string& listener_id) {
  std::lock_guard lock(mutex_);
  if (listener_id.empty()) throw Error(ErrorCode::kValidation, "listener id is empty");
  TestState& state = state_of(test_id);
  auto it = state.sessions.find(listener_id);
  if (it == state.sessions.end()) {
    Session s = make_session(state, listener_id);
    append(test_id, "served.jsonl",
           json{{"event", "join"}, {"listener_id", listener_id}, {"order", s.order}, {"swapped", s.swapped}});
    it = state.sessions.emplace(listener_id, std::move(s)).first;
  }
  Session& s = it->second;
  if (s.next >= s.order.size()) return std::nullopt;
  const int pos = s.order[s.next];
  const Trial& def = state.definition.trials[static_cast<std::size_t>(pos)];
  ServedTrial out;
  out.test_id = test_id;
  out.trial = def;
  if (s.swapped[static_cast<std::size_t>(pos)]) std::swap(out.trial.stimulus_a, out.trial.stimulus_b);
  out.index = static_cast<int>(s.next);
  out.total = static_cast<int>(s.order.size());
  append(test_id, "served.jsonl",
         json{{"event", "serve"},
              {"listener_id", listener_id},
              {"trial_id", def.trial_id},
              {"index", out.index},
              {"swapped", static_cast<bool>(s.swapped[static_cast<std::size_t>(pos)])}});
  s.answered.emplace(def.trial_id, false);
  ++s.next;
  return out;
}

void ListeningService::submit_response(Response r) {
  std::lock_guard lock(mutex_);
  TestState& state = state_of(r.test_id);
  const auto trial = state.trial_index.find(r.trial_id);
  if (trial == state.trial_index.end()) throw Error(ErrorCode::kNotFound, "unknown trial " + r.trial_id);
  const auto session = state.sessions.find(r.listener_id);
  if (session == state.sessions.end()) throw Error(ErrorCode::kNotFound, "unknown listener " + r.listener_id);
  if (r.replay_count < 1) {
    throw Error(ErrorCode::kValidation, "replay_count must be at least 1, got " + std::to_string(r.replay_count));
  }
  auto served = session->second.answered.find(r.trial_id);
  if (served == session->second.answered.end()) {
    throw Error(ErrorCode::kProtocol, "trial " + r.trial_id + " was not served to listener " + r.listener_id);
  }
  if (served->second) {
    throw Error(ErrorCode::kConflict, "listener " + r.listener_id + " already answered trial " + r.trial_id);
  }
  if (r.timestamp.empty()) r.timestamp = now_iso8601();

  const Trial& def = state.definition.trials[static_cast<std::size_t>(trial->second)];
  StoredResponse stored;
  stored.response = r;
  stored.swapped = session->second.swapped[static_cast<std::size_t>(trial->second)];
  if (r.choice == Choice::kNP) {
    stored.option = kNoPreference;
  } else {
    const bool first_slot = r.choice == Choice::kA;
    const std::string& audio_id = first_slot != stored.swapped ? def.stimulus_a : def.stimulus_b;
    stored.option = state.audio.at(audio_id)->system;
  }
  json record = to_json(r);
  record["swapped"] = stored.swapped;
  record["option"] = stored.option;
  append(r.test_id, "responses.jsonl", record);
  served->second = true;
  state.responses.push_back(std::move(stored));
}

PreferenceSummary ListeningService::test_results(const std::string& test_id) const {
  std::lock_guard lock(mutex_);
  const TestState& state = state_of(test_id);
  if (state.responses.empty()) throw Error(ErrorCode::kEmptyResult, "test " + test_id + " has no responses yet");
  std::vector<AttributedChoice> choices;
  for (const auto& r : state.responses) choices.push_back({test_id, r.option});
  std::vector<std::string> systems;
  for (const auto& t : state.definition.trials) {
    for (const auto* id : {&t.stimulus_a, &t.stimulus_b}) {
      const auto& sys = state.audio.at(*id)->system;
      if (std::find(systems.begin(), systems.end(), sys) == systems.end()) systems.push_back(sys);
    }
  }
  return aggregate_preferences(choices, systems);
}

std::vector<StoredResponse> ListeningService::responses(const std::string& test_id) const {
  std::lock_guard lock(mutex_);
  return state_of(test_id).responses;
}

std::string ListeningService::audio_bytes(const std::string& audio_id) const {
  std::string path;
  {
    std::lock_guard lock(mutex_);
    const auto it = audio_files_.find(audio_id);
    if (it == audio_files_.end()) throw Error(ErrorCode::kNotFound, "unknown audio " + audio_id);
    path = it->second;
  }
  return read_file(path);
}

void ListeningService::load_existing() {
  const fs::path root = fs::path(store_dir_) / "tests";
  for (const auto& entry : fs::directory_iterator(root)) {
    const fs::path def_path = entry.path() / "definition.json";
    if (!fs::is_regular_file(def_path)) continue;
    auto state = std::make_unique<TestState>();
    try {
      state->definition = definition_from_json(json::parse(read_file(def_path.string())));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIo, def_path.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < state->definition.trials.size(); ++i) {
      state->trial_index[state->definition.trials[i].trial_id] = static_cast<int>(i);
    }
    for (const auto& a : state->definition.audio) {
      state->audio[a.id] = &a;
      audio_files_[a.id] = a.path;
    }
    auto for_lines = [](const fs::path& path, const auto& fn) {
      std::ifstream in(path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        // A torn final line from an interrupted append is skipped.
        json doc = json::parse(line, nullptr, false);
        if (!doc.is_discarded()) fn(doc);
      }
    };
    for_lines(entry.path() / "served.jsonl", [&](const json& doc) {
      const std::string listener = doc.at("listener_id");
      if (doc.at("event") == "join") {
        Session s;
        s.order = doc.at("order").get<std::vector<int>>();
        s.swapped = doc.at("swapped").get<std::vector<bool>>();
        state->sessions[listener] = std::move(s);
      } else {
        Session& s = state->sessions.at(listener);
        s.answered.emplace(doc.at("trial_id").get<std::string>(), false);
        ++s.next;
      }
    });
    for_lines(entry.path() / "responses.jsonl", [&](const json& doc) {
      StoredResponse r;
      r.response = response_from_json(doc);
      r.swapped = doc.at("swapped");
      r.option = doc.at("option");
      state->sessions.at(r.response.listener_id).answered[r.response.trial_id] = true;
      state->responses.push_back(std::move(r));
    });
    tests_[state->definition.test_id] = std::move(state);
  }
}

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kProtocol: return 409;
    case ErrorCode::kEmptyResult: return 404;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_json(res, status_for(e.code()), json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
  } catch (const json::exception& e) {
    send_json(res, 400, json{{"error", "validation"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, json{{"error", "internal"}, {"message", e.what()}});
  }
}

}  // namespace

struct ListeningServer::Impl {
  ListeningService& service;
  httplib::Server server;

  explicit Impl(ListeningService& s) : service(s) {
    server.Post("/tests", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = service.create_test(definition_from_json(json::parse(req.body)));
        send_json(res, 201, json{{"test_id", id}});
      });
    });
    server.Get(R"(/tests/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, to_json(service.get_test(req.matches[1]), false)); });
    });
    server.Get(R"(/tests/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("listener")) throw Error(ErrorCode::kValidation, "missing listener parameter");
        const auto served = service.next_trial(req.matches[1], req.get_param_value("listener"));
        send_json(res, 200, served ? to_json(*served) : json{{"done", true}});
      });
    });
    server.Post(R"(/tests/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json doc = json::parse(req.body);
        Response r = response_from_json(doc);
        const std::string test_id = req.matches[1];
        if (!r.test_id.empty() && r.test_id != test_id) {
          throw Error(ErrorCode::kValidation, "response test_id does not match the URL");
        }
        r.test_id = test_id;
        service.submit_response(r);
        send_json(res, 201, json{{"status", "recorded"}});
      });
    });
    server.Get(R"(/tests/([^/]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, to_json(service.test_results(req.matches[1]))); });
    });
    server.Get(R"(/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.status = 200;
        res.set_content(service.audio_bytes(req.matches[1]), "audio/wav");
      });
    });
  }
};

ListeningServer::ListeningServer(ListeningService& service) : impl_(std::make_unique<Impl>(service)) {}

ListeningServer::~ListeningServer() { stop(); }

bool ListeningServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int ListeningServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool ListeningServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ListeningServer::stop() {
  if (impl_) impl_->server.stop();
}

bool ListeningServer::running() const { return impl_->server.is_running(); }

}  // namespace stylevc
