// Copyright 2026  The coughgate Authors
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

#ifndef COUGHGATE_CLI_H_
#define COUGHGATE_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace coughgate {

/// Runs one command line (args excludes the program name). Returns the exit
/// status; failures print one JSON error line to `err`:
///   {"status":"error","command":...,"type":...,"message":...}
/// Status 2 marks usage or configuration errors, 1 any other failure.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coughgate

#endif  // COUGHGATE_CLI_H_
