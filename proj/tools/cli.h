// Copyright 2026 The fedcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line front end. Kept in a library so tests can drive it without
// spawning processes.

#ifndef FEDCAL_TOOLS_CLI_H_
#define FEDCAL_TOOLS_CLI_H_

#include <ostream>

namespace fedcal::cli {

// Parses argv, runs the selected subcommand and returns the exit code:
// 0 iff the requested artifact was produced. Human-readable output goes to
// `out`, diagnostics to `err`; machine output is only written to files.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace fedcal::cli

#endif  // FEDCAL_TOOLS_CLI_H_
