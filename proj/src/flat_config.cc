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

#include "stylevc/flat_config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stylevc/common.h"

namespace stylevc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNoVoicing: return "no-voicing";
    case ErrorCode::kValidation: return "validation-error";
    case ErrorCode::kAlignment: return "alignment-error";
    case ErrorCode::kInfeasibleAlignment: return "infeasible-alignment";
    case ErrorCode::kInputTooShort: return "input-too-short";
    case ErrorCode::kDecodeTimeout: return "decode-timeout";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kProtocol: return "protocol-error";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kEmptyResult: return "empty-result";
    case ErrorCode::kIo: return "io-error";
  }
  return "error";
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

FlatConfig FlatConfig::parse(const std::string& text) {
  FlatConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(line_no) + " is not 'key = value': " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "empty key on line " + std::to_string(line_no));
    }
    config.entries_[key] = trim(stripped.substr(eq + 1));
  }
  return config;
}

FlatConfig FlatConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string FlatConfig::to_string() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

void FlatConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write config " + path);
  out << to_string();
}

bool FlatConfig::contains(const std::string& key) const { return entries_.count(key) > 0; }

std::optional<std::string> FlatConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  try {
    std::size_t used = 0;
    const double parsed = std::stod(*value, &used);
    if (used != value->size()) throw std::invalid_argument(*value);
    return parsed;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "key '" + key + "' is not a number: " + *value);
  }
}

long long FlatConfig::get_int(const std::string& key, long long fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  long long parsed = 0;
  const auto* end = value->data() + value->size();
  const auto [ptr, ec] = std::from_chars(value->data(), end, parsed);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kInvalidConfig, "key '" + key + "' is not an integer: " + *value);
  }
  return parsed;
}

void FlatConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void FlatConfig::set(const std::string& key, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  entries_[key] = buffer;
}

void FlatConfig::set(const std::string& key, long long value) {
  entries_[key] = std::to_string(value);
}

void FlatConfig::merge(const FlatConfig& overrides) {
  for (const auto& [key, value] : overrides.entries_) entries_[key] = value;
}

}  // namespace stylevc
