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

#ifndef STYLEVC_CLI_H_
#define STYLEVC_CLI_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stylevc/flat_config.h"

namespace stylevc::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// `args` includes the program name. Help and usage go to `out` / `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args);

// Every subcommand with the long names of its flags (globals included).
std::map<std::string, std::vector<std::string>> subcommand_flags();

// Built-in defaults for every layered config key: features.*, asr.*, tts.*
// and train.*.
FlatConfig default_config();

// defaults < config file < --set overrides; unknown keys are rejected.
FlatConfig layered_config(const std::string& config_path, const std::vector<std::string>& overrides);

}  // namespace stylevc::cli

#endif  // STYLEVC_CLI_H_
