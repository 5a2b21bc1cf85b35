// Copyright 2026 The safechat Authors.
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

// The safechat command line. Exit codes: 0 success, 1 usage or validation
// error, 2 I/O or backend error. Errors go to stderr as
// "safechat: error[<kind>]: <message>".

#ifndef SAFECHAT_CLI_H_
#define SAFECHAT_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace safechat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace safechat::cli

#endif  // SAFECHAT_CLI_H_
