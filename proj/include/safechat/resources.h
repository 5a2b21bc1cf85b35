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

#ifndef SAFECHAT_RESOURCES_H_
#define SAFECHAT_RESOURCES_H_

#include <string_view>

// Bundled copies of resources/*.json, generated at configure time.
namespace safechat::resources {

std::string_view emotion_lexicon();
std::string_view stopwords_en();
std::string_view slot_questions();
std::string_view slot_priorities();
std::string_view extraction_rules();
std::string_view intent_rules();
std::string_view templates();
std::string_view ontology();

}  // namespace safechat::resources

#endif  // SAFECHAT_RESOURCES_H_
