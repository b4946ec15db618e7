// Copyright 2026 The SI-FID Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIFID_TOOLS_CLI_H_
#define SIFID_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "sifid/error.h"

namespace sifid::cli {

// Every ErrorCode maps to its own exit code, 2 + its position in the enum.
int ExitCodeFor(ErrorCode code);

// Runs one subcommand. `args` excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sifid::cli

#endif  // SIFID_TOOLS_CLI_H_
