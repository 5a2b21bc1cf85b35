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

#include "safechat/events.h"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/resources.h"
#include "safechat/text.h"

namespace safechat {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kSlotCount> kSlotNames = {
    "ATTACKER", "TARGET", "WEAPON", "START_TIME", "END_TIME", "PLACE", "TARGET_OBJECT",
};

constexpr std::array<std::string_view, kEntityKindCount> kEntityNames = {
    "Person",
    "Location",
    "Weapon",
    "Time",
    "Object",
    "Contact.PhoneNumber",
    "Contact.Email",
    "Description.Person-Age",
    "Description.Person-Race",
    "Description.Person-Appearance",
    "Description.Person-Clothing",
    "Description.Person-Sex",
    "Description.Person-Action",
    "Description.Person-Name",
    "Description.Person-Movement",
    "Description.Location-Description",
};

constexpr std::array<std::string_view, 7> kIntentNames = {
    "Thank",   "ConfirmSendOfficer", "NotifyOthersInCharge", "AskMeetOfficer",
    "AskToCall", "AskToVisit",       "AskForDetail",
};

std::size_t idx(SlotId s) { return static_cast<std::size_t>(s); }

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

SlotId require_slot(const json& j, const char* what) {
  if (!j.is_string()) throw ValidationError(std::string(what) + ": slot must be a string");
  auto s = parse_slot(j.get<std::string>());
  if (!s) throw ValidationError(std::string(what) + ": unknown slot " + j.dump());
  return *s;
}

std::regex compile(const std::string& pattern, const char* what) {
  try {
    return std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw ValidationError(std::string(what) + ": bad pattern " + pattern + ": " + e.what());
  }
}

void apply_question_override(SlotQuestion& q, const json& v) {
  if (v.is_string()) {
    q.question = v.get<std::string>();
  } else if (v.is_object()) {
    for (const auto& [key, value] : v.items()) {
      if (key == "question" && value.is_string()) {
        q.question = value.get<std::string>();
      } else if (key == "min_score" && value.is_number()) {
        q.min_score = value.get<double>();
      } else if (key == "max_answer_len" && value.is_number_unsigned()) {
        q.max_answer_len = value.get<std::size_t>();
      } else {
        throw ValidationError("slot questions: bad key " + key + " for " +
                              std::string(slot_name(q.slot)));
      }
    }
  } else {
    throw ValidationError("slot questions: bad value for " + std::string(slot_name(q.slot)));
  }
  if (text::trim(q.question).empty()) {
    throw ValidationError("slot questions: empty question for " + std::string(slot_name(q.slot)));
  }
  if (!(q.min_score >= 0.0 && q.min_score <= 1.0)) {
    throw ValidationError("slot questions: min_score outside [0, 1]");
  }
  if (q.max_answer_len < 1) throw ValidationError("slot questions: max_answer_len < 1");
}

}  // namespace

const std::array<SlotId, kSlotCount>& all_slots() {
  static constexpr std::array<SlotId, kSlotCount> kAll = {
      SlotId::kAttacker, SlotId::kTarget,   SlotId::kWeapon,      SlotId::kStartTime,
      SlotId::kEndTime,  SlotId::kPlace,    SlotId::kTargetObject,
  };
  return kAll;
}

std::string_view slot_name(SlotId s) { return kSlotNames[idx(s)]; }

std::optional<SlotId> parse_slot(std::string_view name) {
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    if (kSlotNames[i] == name) return all_slots()[i];
  }
  return std::nullopt;
}

const std::array<EntityKind, kEntityKindCount>& all_entity_kinds() {
  static const std::array<EntityKind, kEntityKindCount> kAll = [] {
    std::array<EntityKind, kEntityKindCount> a{};
    for (std::size_t i = 0; i < kEntityKindCount; ++i) a[i] = static_cast<EntityKind>(i);
    return a;
  }();
  return kAll;
}

std::string_view entity_kind_name(EntityKind k) { return kEntityNames[static_cast<std::size_t>(k)]; }

std::optional<EntityKind> parse_entity_kind(std::string_view name) {
  for (std::size_t i = 0; i < kEntityKindCount; ++i) {
    if (kEntityNames[i] == name) return static_cast<EntityKind>(i);
  }
  return std::nullopt;
}

EntityKind slot_entity(SlotId s) {
  switch (s) {
    case SlotId::kAttacker:
    case SlotId::kTarget: return EntityKind::kPerson;
    case SlotId::kWeapon: return EntityKind::kWeapon;
    case SlotId::kStartTime:
    case SlotId::kEndTime: return EntityKind::kTime;
    case SlotId::kPlace: return EntityKind::kLocation;
    case SlotId::kTargetObject: return EntityKind::kObject;
  }
  return EntityKind::kObject;
}

// ---------------------------------------------------------------------------
// Slot questions

std::vector<SlotQuestion> build_slot_questions(std::string_view overrides_json) {
  static const std::vector<SlotQuestion> kDefaults = [] {
    const json j = parse_json(resources::slot_questions(), "slot questions");
    std::vector<SlotQuestion> out;
    for (SlotId s : all_slots()) {
      SlotQuestion q;
      q.slot = s;
      apply_question_override(q, j.at(std::string(slot_name(s))));
      out.push_back(std::move(q));
    }
    return out;
  }();
  std::vector<SlotQuestion> out = kDefaults;
  if (text::trim(overrides_json).empty()) return out;
  const json j = parse_json(overrides_json, "slot questions");
  if (!j.is_object()) throw ValidationError("slot questions: overrides must be an object");
  for (const auto& [key, value] : j.items()) {
    auto s = parse_slot(key);
    if (!s) throw ValidationError("slot questions: unknown slot " + key);
    apply_question_override(out[idx(*s)], value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialogue state

std::size_t DialogueState::answer_count() const {
  std::size_t n = 0;
  for (const auto& a : answers_) n += a.size();
  return n;
}

DialogueState state_from_parts(std::array<std::vector<SlotAnswer>, kSlotCount> answers,
                               std::optional<std::size_t> last_processed) {
  DialogueState s;
  s.answers_ = std::move(answers);
  s.last_processed_ = last_processed;
  return s;
}

std::size_t answer_length(std::string_view span) { return text::word_tokens(span).size(); }

PatternQaBackend PatternQaBackend::from_json(std::string_view json_text) {
  const json j = parse_json(json_text, "extraction rules");
  if (!j.is_array()) throw ValidationError("extraction rules: expected an array");
  PatternQaBackend b;
  for (const auto& r : j) {
    if (!r.is_object() || !r.contains("slot") || !r.contains("pattern") ||
        !r.contains("score")) {
      throw ValidationError("extraction rules: each rule needs slot, score and pattern");
    }
    const double score = r["score"].get<double>();
    if (!(score >= 0.0 && score <= 1.0)) throw ValidationError("extraction rules: bad score");
    const std::string pattern = r["pattern"].get<std::string>();
    std::regex re = compile(pattern, "extraction rules");
    if (re.mark_count() < 1) {
      throw ValidationError("extraction rules: pattern needs a capture group: " + pattern);
    }
    b.rules_.push_back({require_slot(r["slot"], "extraction rules"), score, std::move(re)});
  }
  return b;
}

const PatternQaBackend& PatternQaBackend::bundled() {
  static const PatternQaBackend kBundled = from_json(resources::extraction_rules());
  return kBundled;
}

std::vector<std::pair<std::string, double>> PatternQaBackend::extract(
    SlotId slot, std::string_view text_in) const {
  constexpr std::size_t kMaxCached = 1 << 16;
  std::pair<SlotId, std::string> key{slot, std::string(text_in)};
  {
    std::lock_guard lock(cache_->mu);
    if (auto it = cache_->entries.find(key); it != cache_->entries.end()) return it->second;
  }
  std::vector<std::pair<std::string, double>> out;
  const std::string& t = key.second;
  for (const auto& rule : rules_) {
    if (rule.slot != slot) continue;
    for (auto it = std::sregex_iterator(t.begin(), t.end(), rule.pattern);
         it != std::sregex_iterator(); ++it) {
      const auto& group = (*it)[1];
      if (!group.matched) continue;
      std::string span = text::collapse_whitespace(group.str());
      if (span.empty()) continue;
      const bool dup = std::any_of(out.begin(), out.end(),
                                   [&](const auto& p) { return p.first == span; });
      if (!dup) out.emplace_back(std::move(span), rule.score);
    }
  }
  std::lock_guard lock(cache_->mu);
  if (cache_->entries.size() >= kMaxCached) cache_->entries.clear();
  cache_->entries.emplace(std::move(key), out);
  return out;
}

std::vector<QaSpan> PatternQaBackend::answer(const SlotQuestion& question,
                                             std::span<const Utterance> history) const {
  std::vector<QaSpan> out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].speaker != Speaker::kUser) continue;
    for (auto& [span, score] : extract(question.slot, history[i].text)) {
      out.push_back({std::move(span), score, i});
    }
  }
  return out;
}

DialogueState update_state(const DialogueState& state, std::span<const Utterance> history,
                           std::span<const SlotQuestion> questions, const QaBackend& backend) {
  if (history.empty()) return state;
  const std::size_t last = history.size() - 1;
  if (state.last_processed() && last <= *state.last_processed()) {
    throw ValidationError("history does not extend past the last processed utterance");
  }
  std::array<std::vector<SlotAnswer>, kSlotCount> answers;
  for (SlotId s : all_slots()) answers[idx(s)] = state.answers(s);

  for (const SlotQuestion& q : questions) {
    std::vector<QaSpan> spans = backend.answer(q, history);
    std::stable_sort(spans.begin(), spans.end(), [](const QaSpan& a, const QaSpan& b) {
      return a.utterance_index < b.utterance_index;
    });
    auto& list = answers[idx(q.slot)];
    for (QaSpan& span : spans) {
      if (span.utterance_index > last) continue;
      if (!(span.score >= q.min_score)) continue;
      if (span.text.empty() || answer_length(span.text) > q.max_answer_len) continue;
      const bool seen = std::any_of(list.begin(), list.end(), [&](const SlotAnswer& a) {
        return a.text == span.text && a.utterance_index == span.utterance_index;
      });
      if (!seen) list.push_back({std::move(span.text), span.utterance_index, span.score});
    }
  }
  return state_from_parts(std::move(answers), last);
}

DialogueState replay_state(std::span<const Utterance> conversation,
                           std::span<const SlotQuestion> questions, const QaBackend& backend) {
  DialogueState state;
  for (std::size_t n = 1; n <= conversation.size(); ++n) {
    state = update_state(state, conversation.first(n), questions, backend);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Dispatcher intents

DispatcherIntent DispatcherIntent::of(Kind kind) {
  if (kind == Kind::kAskForDetail) throw ValidationError("AskForDetail needs a slot");
  return DispatcherIntent(kind, std::nullopt);
}

DispatcherIntent DispatcherIntent::ask_for_detail(SlotId slot) {
  return DispatcherIntent(Kind::kAskForDetail, slot);
}

std::string DispatcherIntent::name() const {
  std::string n(kIntentNames[static_cast<std::size_t>(kind_)]);
  if (slot_) n += "(" + std::string(slot_name(*slot_)) + ")";
  return n;
}

std::optional<DispatcherIntent> DispatcherIntent::parse(std::string_view name) {
  constexpr std::string_view kDetail = "AskForDetail(";
  if (name.starts_with(kDetail) && name.ends_with(")")) {
    name.remove_prefix(kDetail.size());
    name.remove_suffix(1);
    if (auto s = parse_slot(name)) return ask_for_detail(*s);
    return std::nullopt;
  }
  for (std::size_t i = 0; i + 1 < kIntentNames.size(); ++i) {
    if (kIntentNames[i] == name) return of(static_cast<Kind>(i));
  }
  return std::nullopt;
}

IntentRules IntentRules::from_json(std::string_view json_text) {
  const json j = parse_json(json_text, "intent rules");
  if (!j.is_array()) throw ValidationError("intent rules: expected an array");
  IntentRules rules;
  for (const auto& r : j) {
    const std::string name = r.value("intent", "");
    std::optional<DispatcherIntent> intent;
    if (name == "AskForDetail") {
      if (!r.contains("slot")) throw ValidationError("intent rules: AskForDetail needs a slot");
      intent = DispatcherIntent::ask_for_detail(require_slot(r["slot"], "intent rules"));
    } else {
      intent = DispatcherIntent::parse(name);
    }
    if (!intent) throw ValidationError("intent rules: unknown intent " + name);
    Rule rule{*intent, r.value("question", false), {}};
    for (const auto& p : r.at("patterns")) {
      rule.patterns.push_back(compile(p.get<std::string>(), "intent rules"));
    }
    rules.rules_.push_back(std::move(rule));
  }
  return rules;
}

const IntentRules& IntentRules::bundled() {
  static const IntentRules kBundled = from_json(resources::intent_rules());
  return kBundled;
}

std::optional<DispatcherIntent> IntentRules::classify(std::string_view text_in) const {
  const std::string t(text_in);
  const bool is_question = t.find('?') != std::string::npos;
  for (const auto& rule : rules_) {
    if (rule.question && !is_question) continue;
    for (const auto& re : rule.patterns) {
      if (std::regex_search(t, re)) return rule.intent;
    }
  }
  return std::nullopt;
}

std::optional<DispatcherIntent> classify_intent(std::string_view dispatcher_text,
                                                const IntentRules& rules) {
  if (text::trim(dispatcher_text).empty()) throw ValidationError("empty dispatcher text");
  return rules.classify(dispatcher_text);
}

// ---------------------------------------------------------------------------
// Next question

SlotPriorities SlotPriorities::from_json(std::string_view json_text) {
  const json j = parse_json(json_text, "slot priorities");
  auto read_order = [](const json& list) {
    std::vector<SlotId> order;
    std::set<SlotId> seen;
    for (const auto& v : list) {
      SlotId s = require_slot(v, "slot priorities");
      if (!seen.insert(s).second) throw ValidationError("slot priorities: duplicate slot");
      order.push_back(s);
    }
    // Slots a table leaves out keep their place after the listed ones.
    for (SlotId s : all_slots()) {
      if (!seen.contains(s)) order.push_back(s);
    }
    return order;
  };
  SlotPriorities p;
  p.default_ = read_order(j.at("default"));
  if (j.contains("categories")) {
    for (const auto& [name, list] : j["categories"].items()) {
      p.by_category_.emplace_back(category_key(name), read_order(list));
    }
  }
  return p;
}

const SlotPriorities& SlotPriorities::bundled() {
  static const SlotPriorities kBundled = from_json(resources::slot_priorities());
  return kBundled;
}

const std::vector<SlotId>& SlotPriorities::order(const TipCategory& category) const {
  const std::string key = category_key(category.name());
  for (const auto& [name, order] : by_category_) {
    if (name == key) return order;
  }
  return default_;
}

std::optional<NextQuestion> next_question(const DialogueState& state,
                                          const TipCategory& category,
                                          std::span<const SlotQuestion> questions,
                                          const SlotPriorities& priorities) {
  for (SlotId s : priorities.order(category)) {
    if (state.filled(s)) continue;
    for (const auto& q : questions) {
      if (q.slot == s) return NextQuestion{s, q.question};
    }
  }
  return std::nullopt;
}

}  // namespace safechat
