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

#ifndef STYLEVC_LISTENING_H_
#define STYLEVC_LISTENING_H_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylevc/evaluation.h"

// AB / ABX listening tests. Definitions are immutable once created; every
// served trial and every response is appended to a per-test record log so a
// restarted service resumes where it stopped.
namespace stylevc {

enum class TrialKind { kAB, kABX };
enum class Choice { kA, kB, kNP };

std::string to_string(TrialKind kind);
TrialKind parse_trial_kind(const std::string& text);
std::string to_string(Choice choice);
Choice parse_choice(const std::string& text);

struct AudioEntry {
  std::string id;
  std::string path;
  std::string system;  // hidden from listeners
};

struct Trial {
  std::string trial_id;
  TrialKind kind = TrialKind::kAB;
  std::string stimulus_a;
  std::string stimulus_b;
  std::optional<std::string> reference_x;
  std::string prompt;
};

struct TestDefinition {
  std::string test_id;  // assigned on creation when empty
  std::string name;
  std::vector<AudioEntry> audio;
  std::vector<Trial> trials;
};

// A trial as one listener sees it: slots possibly swapped, no system names.
struct ServedTrial {
  std::string test_id;
  Trial trial;
  int index = 0;  // 0-based position in this listener's order
  int total = 0;
};

struct Response {
  std::string test_id;
  std::string trial_id;
  std::string listener_id;
  Choice choice = Choice::kNP;
  int replay_count = 1;
  std::string timestamp;  // ISO 8601; filled by the service when empty
};

struct StoredResponse {
  Response response;
  bool swapped = false;  // slot A held the definition's stimulus_b
  std::string option;    // system chosen, or NP
};

nlohmann::json to_json(const TestDefinition& def, bool include_systems);
TestDefinition definition_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ServedTrial& served);
nlohmann::json to_json(const Response& response);
Response response_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PreferenceSummary& summary);

class ListeningService {
 public:
  // `store_dir` holds tests/<id>/{definition.json,served.jsonl,responses.jsonl}
  // and audio/<audio id>.wav; existing tests are reloaded.
  ListeningService(std::string store_dir, std::uint64_t seed);

  std::string create_test(TestDefinition definition);
  TestDefinition get_test(const std::string& test_id) const;
  std::vector<std::string> test_ids() const;

  // Joins the listener on first call. nullopt once every trial was served.
  std::optional<ServedTrial> next_trial(const std::string& test_id, const std::string& listener_id);

  void submit_response(Response response);

  PreferenceSummary test_results(const std::string& test_id) const;
  std::vector<StoredResponse> responses(const std::string& test_id) const;

  std::string audio_bytes(const std::string& audio_id) const;

 private:
  struct Session {
    std::vector<int> order;
    std::vector<bool> swapped;  // indexed by trial position in the definition
    std::size_t next = 0;
    std::map<std::string, bool> answered;  // trial_id -> true once answered
  };
  struct TestState {
    TestDefinition definition;
    std::map<std::string, int> trial_index;
    std::map<std::string, const AudioEntry*> audio;
    std::map<std::string, Session> sessions;
    std::vector<StoredResponse> responses;
  };

  TestState& state_of(const std::string& test_id);
  const TestState& state_of(const std::string& test_id) const;
  Session make_session(const TestState& state, const std::string& listener_id) const;
  void validate(const TestDefinition& def) const;
  void load_existing();
  void append(const std::string& test_id, const std::string& file, const nlohmann::json& record) const;
  std::string test_dir(const std::string& test_id) const;

  std::string store_dir_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<TestState>> tests_;
  std::map<std::string, std::string> audio_files_;  // audio id -> stored path
};

// Blocks serving the HTTP API until stop() is called from another thread.
class ListeningServer {
 public:
  explicit ListeningServer(ListeningService& service);
  ~ListeningServer();

  // Binds and serves; returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stylevc

#endif  // STYLEVC_LISTENING_H_
