// Copyright 2026 The wm_policy Authors
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

#ifndef WMP_EXPCLI_CLI_H_
#define WMP_EXPCLI_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace wmp::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad usage or configuration.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Runs one subcommand. Failures print a single line
// `error kind=<kind> message=<text>` to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Names accepted by `repro`.
std::vector<std::string> repro_bundles();

}  // namespace wmp::cli

#endif  // WMP_EXPCLI_CLI_H_
