// Copyright 2026 The soapsim Authors
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

// The soapsim command-line driver.
//
// Exit statuses: 0 success, 1 search or simulation failure, 2 input error.

#ifndef SOAPSIM_TOOLS_CLI_H_
#define SOAPSIM_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace soapsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInputError = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace soapsim::cli

#endif  // SOAPSIM_TOOLS_CLI_H_
