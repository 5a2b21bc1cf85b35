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

#ifndef SAFECHAT_TEXT_H_
#define SAFECHAT_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace safechat::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Replaces every run of whitespace (including newlines) with a single space
// and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Lowercased word tokens. A token is one of
//   - a masking tag such as "[LOCATION]" (kept whole, lowercased),
//   - a run of '#' digit masks,
//   - a run of letters, digits and apostrophes (U+2019 is folded to ').
// Everything else separates tokens.
std::vector<std::string> word_tokens(std::string_view s);

// Same segmentation as word_tokens but preserving case.
std::vector<std::string> raw_tokens(std::string_view s);

bool is_mask_tag(std::string_view token);

// Truncates to at most max_chars bytes, cutting at the last whitespace inside
// the limit when one exists. The result never ends in whitespace.
std::string truncate_at_word(std::string_view s, std::size_t max_chars);

// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

}  // namespace safechat::text

#endif  // SAFECHAT_TEXT_H_
