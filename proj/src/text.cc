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

#include "safechat/text.h"

#include <cctype>

namespace safechat::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
}

std::vector<std::string> segment(std::string_view s, bool lower) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto emit = [&](std::string tok) {
    if (lower) tok = to_lower(tok);
    out.push_back(std::move(tok));
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == '[') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isupper(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && s[j] == ']' && j > i + 1) {
        emit(std::string(s.substr(i, j - i + 1)));
        i = j + 1;
        continue;
      }
      ++i;
      continue;
    }
    if (c == '#') {
      std::size_t j = i;
      while (j < s.size() && s[j] == '#') ++j;
      emit(std::string(s.substr(i, j - i)));
      i = j;
      continue;
    }
    // U+2019 RIGHT SINGLE QUOTATION MARK inside a word becomes '\''.
    if (is_word(c) ||
        (static_cast<unsigned char>(c) == 0xE2 && i + 2 < s.size() &&
         static_cast<unsigned char>(s[i + 1]) == 0x80 &&
         static_cast<unsigned char>(s[i + 2]) == 0x99)) {
      std::string tok;
      while (i < s.size()) {
        if (is_word(s[i])) {
          tok.push_back(s[i]);
          ++i;
        } else if (static_cast<unsigned char>(s[i]) == 0xE2 &&
                   i + 2 < s.size() &&
                   static_cast<unsigned char>(s[i + 1]) == 0x80 &&
                   static_cast<unsigned char>(s[i + 2]) == 0x99) {
          tok.push_back('\'');
          i += 3;
        } else {
          break;
        }
      }
      // Strip quote characters that only wrap the word.
      std::size_t b = 0, e = tok.size();
      while (b < e && tok[b] == '\'') ++b;
      while (e > b && tok[e - 1] == '\'') --e;
      if (e > b) emit(tok.substr(b, e - b));
      continue;
    }
    ++i;
  }
  return out;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending = true;
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view s) { return segment(s, true); }

std::vector<std::string> raw_tokens(std::string_view s) { return segment(s, false); }

bool is_mask_tag(std::string_view t) {
  return t.size() >= 3 && t.front() == '[' && t.back() == ']';
}

std::string truncate_at_word(std::string_view s, std::size_t max_chars) {
  s = trim(s);
  if (s.size() <= max_chars) return std::string(s);
  std::size_t cut = max_chars;
  // A cut exactly before whitespace is already a word boundary.
  if (!is_space(s[cut])) {
    std::size_t ws = cut;
    while (ws > 0 && !is_space(s[ws])) --ws;
    if (ws > 0) cut = ws;
  }
  // Never split a UTF-8 sequence when falling back to a hard cut.
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(trim(s.substr(0, cut)));
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace safechat::text
