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

// Shared builders for the unit tests.

#ifndef SAFECHAT_TESTS_TEST_UTIL_H_
#define SAFECHAT_TESTS_TEST_UTIL_H_

#include <string>
#include <utility>
#include <vector>

#include "safechat/corpus.h"

namespace safechat::testing {

inline std::string fixture(const std::string& name) {
  return std::string(SAFECHAT_FIXTURE_DIR) + "/" + name;
}

inline Utterance utt(Speaker s, std::string text, long long offset_s = 0) {
  return {s, std::move(text), Timestamp::from_civil(2019, 5, 1, 12).plus_seconds(offset_s)};
}

inline Utterance user(std::string text, long long offset_s = 0) {
  return utt(Speaker::kUser, std::move(text), offset_s);
}

inline Utterance dispatcher(std::string text, long long offset_s = 0) {
  return utt(Speaker::kDispatcher, std::move(text), offset_s);
}

// Alternating user/dispatcher conversation starting with the user.
inline Incident incident(std::string id, std::vector<std::string> texts,
                         Category category = Category::kNoiseDisturbance,
                         Timestamp created = Timestamp::from_civil(2019, 5, 1, 12)) {
  Incident inc;
  inc.incident_id = std::move(id);
  inc.org_id = "org-1";
  inc.category = TipCategory(category);
  inc.created_at = created;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    inc.utterances.push_back({i % 2 == 0 ? Speaker::kUser : Speaker::kDispatcher,
                              std::move(texts[i]), created.plus_seconds(static_cast<long long>(60 * i))});
  }
  return inc;
}

}  // namespace safechat::testing

#endif  // SAFECHAT_TESTS_TEST_UTIL_H_
