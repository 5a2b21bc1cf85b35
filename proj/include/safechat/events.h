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

// Incident event ontology, slot-question argument extraction over a growing
// dialogue history, and dispatcher intent rules.

#ifndef SAFECHAT_EVENTS_H_
#define SAFECHAT_EVENTS_H_

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safechat/corpus.h"

namespace safechat {

enum class SlotId { kAttacker, kTarget, kWeapon, kStartTime, kEndTime, kPlace, kTargetObject };

inline constexpr std::size_t kSlotCount = 7;
const std::array<SlotId, kSlotCount>& all_slots();
std::string_view slot_name(SlotId s);  // "ATTACKER", "TARGET_OBJECT", ...
std::optional<SlotId> parse_slot(std::string_view name);

enum class EntityKind {
  kPerson,
  kLocation,
  kWeapon,
  kTime,
  kObject,
  kContactPhoneNumber,
  kContactEmail,
  kDescriptionPersonAge,
  kDescriptionPersonRace,
  kDescriptionPersonAppearance,
  kDescriptionPersonClothing,
  kDescriptionPersonSex,
  kDescriptionPersonAction,
  kDescriptionPersonName,
  kDescriptionPersonMovement,
  kDescriptionLocationDescription,
};

inline constexpr std::size_t kEntityKindCount = 16;
const std::array<EntityKind, kEntityKindCount>& all_entity_kinds();
// "Person", "Contact.PhoneNumber", "Description.Person-Age", ...
std::string_view entity_kind_name(EntityKind k);
std::optional<EntityKind> parse_entity_kind(std::string_view name);
// Entity type expected to fill each argument slot.
EntityKind slot_entity(SlotId s);

// ---------------------------------------------------------------------------
// Slot questions

struct SlotQuestion {
  SlotId slot = SlotId::kPlace;
  std::string question;
  double min_score = 0.5;
  std::size_t max_answer_len = 12;  // tokens

  bool operator==(const SlotQuestion&) const = default;
};

// One question per slot in SlotId order: the bundled defaults merged with
// `overrides_json`, an object keyed by slot name whose values are either a
// question string or an object with any of question, min_score and
// max_answer_len. Throws ValidationError for unknown slots or bad values.
std::vector<SlotQuestion> build_slot_questions(std::string_view overrides_json = {});

// ---------------------------------------------------------------------------
// Dialogue state

struct SlotAnswer {
  std::string text;
  std::size_t utterance_index = 0;  // index into the conversation
  double score = 0.0;

  bool operator==(const SlotAnswer&) const = default;
};

class DialogueState {
 public:
  const std::vector<SlotAnswer>& answers(SlotId s) const {
    return answers_[static_cast<std::size_t>(s)];
  }
  bool filled(SlotId s) const { return !answers(s).empty(); }
  std::size_t answer_count() const;
  // Index of the last utterance folded into the state.
  std::optional<std::size_t> last_processed() const { return last_processed_; }

  bool operator==(const DialogueState&) const = default;

 private:
  friend DialogueState state_from_parts(std::array<std::vector<SlotAnswer>, kSlotCount>,
                                        std::optional<std::size_t>);
  std::array<std::vector<SlotAnswer>, kSlotCount> answers_;
  std::optional<std::size_t> last_processed_;
};

DialogueState state_from_parts(std::array<std::vector<SlotAnswer>, kSlotCount> answers,
                               std::optional<std::size_t> last_processed);

// ---------------------------------------------------------------------------
// Question answering contract

struct QaSpan {
  std::string text;
  double score = 0.0;
  std::size_t utterance_index = 0;
};

// Poses a slot question against a dialogue history and returns candidate
// spans. Implementations must be safe to call concurrently.
class QaBackend {
 public:
  virtual ~QaBackend() = default;
  virtual std::vector<QaSpan> answer(const SlotQuestion& question,
                                     std::span<const Utterance> history) const = 0;
};

// Regex baseline over user utterances. Rules are tried in table order; each
// match contributes capture group 1 with the rule's score. Matching ignores
// case and the span keeps the original text.
class PatternQaBackend : public QaBackend {
 public:
  static const PatternQaBackend& bundled();
  // [{"slot": "PLACE", "score": 0.9, "pattern": "..."}, ...]
  static PatternQaBackend from_json(std::string_view json_text);

  std::vector<QaSpan> answer(const SlotQuestion& question,
                             std::span<const Utterance> history) const override;
  // All spans the rules for `slot` find in one text.
  std::vector<std::pair<std::string, double>> extract(SlotId slot,
                                                      std::string_view text) const;

 private:
  struct Rule {
    SlotId slot;
    double score;
    std::regex pattern;
  };
  // Memo of extract() results; histories are re-scanned on every update.
  struct Cache {
    std::mutex mu;
    std::map<std::pair<SlotId, std::string>, std::vector<std::pair<std::string, double>>, std::less<>> entries;
  };
  std::vector<Rule> rules_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// Token count used by the max_answer_len gate.
std::size_t answer_length(std::string_view span);

// Folds history[0..n) into `state`, n = history.size(). Every question is
// posed against the whole history; spans passing both gates and not already
// stored for that slot are appended in utterance order. Existing answers are
// never modified. An empty history returns `state` unchanged. Throws
// ValidationError when n - 1 <= last_processed; backend errors propagate and
// leave the caller's state untouched.
DialogueState update_state(const DialogueState& state, std::span<const Utterance> history,
                           std::span<const SlotQuestion> questions, const QaBackend& backend);

// Runs update_state once per utterance prefix.
DialogueState replay_state(std::span<const Utterance> conversation,
                           std::span<const SlotQuestion> questions, const QaBackend& backend);

// ---------------------------------------------------------------------------
// Dispatcher intents

class DispatcherIntent {
 public:
  enum class Kind {
    kThank,
    kConfirmSendOfficer,
    kNotifyOthersInCharge,
    kAskMeetOfficer,
    kAskToCall,
    kAskToVisit,
    kAskForDetail,
  };

  // Precondition: kind != kAskForDetail.
  static DispatcherIntent of(Kind kind);
  static DispatcherIntent ask_for_detail(SlotId slot);

  Kind kind() const { return kind_; }
  // Present exactly for kAskForDetail.
  std::optional<SlotId> slot() const { return slot_; }
  // "Thank", "AskForDetail(PLACE)", ...
  std::string name() const;
  static std::optional<DispatcherIntent> parse(std::string_view name);

  bool operator==(const DispatcherIntent&) const = default;

 private:
  DispatcherIntent(Kind kind, std::optional<SlotId> slot) : kind_(kind), slot_(slot) {}
  Kind kind_;
  std::optional<SlotId> slot_;
};

// Ordered pattern table; the first rule with a matching pattern decides.
// Rules marked "question" only apply to texts containing '?'.
class IntentRules {
 public:
  static const IntentRules& bundled();
  static IntentRules from_json(std::string_view json_text);

  std::optional<DispatcherIntent> classify(std::string_view text) const;

 private:
  struct Rule {
    DispatcherIntent intent;
    bool question;
    std::vector<std::regex> patterns;
  };
  std::vector<Rule> rules_;
};

// Throws ValidationError for empty text.
std::optional<DispatcherIntent> classify_intent(std::string_view dispatcher_text,
                                                const IntentRules& rules = IntentRules::bundled());

// ---------------------------------------------------------------------------
// Next question

class SlotPriorities {
 public:
  static const SlotPriorities& bundled();
  // {"default": [...], "categories": {"Theft/Lost Item": [...], ...}}
  static SlotPriorities from_json(std::string_view json_text);

  const std::vector<SlotId>& order(const TipCategory& category) const;

 private:
  std::vector<SlotId> default_;
  std::vector<std::pair<std::string, std::vector<SlotId>>> by_category_;  // category_key
};

struct NextQuestion {
  SlotId slot;
  std::string question;

  bool operator==(const NextQuestion&) const = default;
};

// First unfilled slot in the category's priority order.
std::optional<NextQuestion> next_question(const DialogueState& state,
                                          const TipCategory& category,
                                          std::span<const SlotQuestion> questions,
                                          const SlotPriorities& priorities =
                                              SlotPriorities::bundled());

}  // namespace safechat

#endif  // SAFECHAT_EVENTS_H_
