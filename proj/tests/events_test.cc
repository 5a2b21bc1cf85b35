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


#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/events.h"
#include "test_util.h"

namespace safechat {
namespace {

using nlohmann::json;
using testing::user;

std::vector<Utterance> history_of(const json& rows) {
  std::vector<Utterance> out;
  long long t = 0;
  for (const auto& r : rows) out.push_back(testing::utt(*parse_speaker(r[0].get<std::string>()), r[1], t += 30));
  return out;
}

json load_fixture() {
  std::ifstream in(testing::fixture("extraction_30.json"));
  return json::parse(in);
}

TEST(Ontology, SlotsAndEntities) {
  EXPECT_EQ(all_slots().size(), 7u);
  for (auto s : all_slots()) EXPECT_EQ(parse_slot(slot_name(s)), s);
  EXPECT_EQ(slot_name(SlotId::kTargetObject), "TARGET_OBJECT");
  for (auto k : all_entity_kinds()) EXPECT_EQ(parse_entity_kind(entity_kind_name(k)), k);
  EXPECT_EQ(slot_entity(SlotId::kPlace), EntityKind::kLocation);
  EXPECT_EQ(slot_entity(SlotId::kWeapon), EntityKind::kWeapon);
}

TEST(SlotQuestions, DefaultsAndOverrides) {
  const auto q = build_slot_questions();
  ASSERT_EQ(q.size(), 7u);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(q[i].slot, all_slots()[i]);
    EXPECT_FALSE(q[i].question.empty());
    EXPECT_DOUBLE_EQ(q[i].min_score, 0.5);
    EXPECT_EQ(q[i].max_answer_len, 12u);
  }
  EXPECT_EQ(q[static_cast<int>(SlotId::kTargetObject)].question, "What object was stolen?");
  const auto o = build_slot_questions(R"({"TARGET_OBJECT": "Which item is missing?"})");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i].slot == SlotId::kTargetObject) {
      EXPECT_EQ(o[i].question, "Which item is missing?");
    } else {
      EXPECT_EQ(o[i], q[i]);
    }
  }
  const auto g = build_slot_questions(R"({"PLACE": {"min_score": 0.85, "max_answer_len": 3}})");
  EXPECT_DOUBLE_EQ(g[static_cast<int>(SlotId::kPlace)].min_score, 0.85);
  EXPECT_EQ(g[static_cast<int>(SlotId::kPlace)].max_answer_len, 3u);
  EXPECT_THROW(build_slot_questions(R"({"VICTIM": "Who?"})"), ValidationError);
  EXPECT_THROW(build_slot_questions(R"({"PLACE": {"min_score": 1.5}})"), ValidationError);
  EXPECT_THROW(build_slot_questions(R"({"PLACE": {"max_answer_len": 0}})"), ValidationError);
  EXPECT_THROW(build_slot_questions(R"({"PLACE": ""})"), ValidationError);
}

TEST(UpdateState, Examples) {
  const auto q = build_slot_questions();
  const auto& qa = PatternQaBackend::bundled();
  EXPECT_EQ(update_state({}, {}, q, qa), DialogueState{});
  const std::vector<Utterance> h = {user("Someone stole my bike at [LOCATION]")};
  const auto s = update_state({}, h, q, qa);
  ASSERT_EQ(s.answers(SlotId::kTargetObject).size(), 1u);
  EXPECT_EQ(s.answers(SlotId::kTargetObject)[0].text, "my bike");
  ASSERT_EQ(s.answers(SlotId::kPlace).size(), 1u);
  EXPECT_EQ(s.answers(SlotId::kPlace)[0].text, "[LOCATION]");
  EXPECT_EQ(s.last_processed(), 0u);
  EXPECT_THROW(update_state(s, h, q, qa), ValidationError);
}

TEST(UpdateState, LengthGateRejects) {
  auto q = build_slot_questions(R"({"TARGET_OBJECT": {"max_answer_len": 1}})");
  const std::vector<Utterance> h = {user("Someone stole my bike")};
  const auto s = update_state({}, h, q, PatternQaBackend::bundled());
  EXPECT_FALSE(s.filled(SlotId::kTargetObject));
  EXPECT_TRUE(s.filled(SlotId::kAttacker));
}

class ThrowingQa : public QaBackend {
 public:
  std::vector<QaSpan> answer(const SlotQuestion&, std::span<const Utterance>) const override {
    throw BackendError("qa offline", true);
  }
};

TEST(UpdateState, BackendFailureLeavesStateUntouched) {
  const auto q = build_slot_questions();
  const std::vector<Utterance> h = {user("Someone stole my bike"), user("at [LOCATION]")};
  const auto s = update_state({}, std::span(h).first(1), q, PatternQaBackend::bundled());
  const auto copy = s;
  EXPECT_THROW(update_state(s, h, q, ThrowingQa{}), BackendError);
  EXPECT_EQ(s, copy);
}

TEST(Extraction, ThirtyUtteranceFixtureExactMatch) {
  const auto fx = load_fixture();
  const auto h = history_of(fx["utterances"]);
  ASSERT_EQ(h.size(), 30u);
  const auto state = replay_state(h, build_slot_questions(), PatternQaBackend::bundled());
  for (auto slot : all_slots()) {
    std::vector<std::pair<std::string, std::size_t>> got, want;
    for (const auto& a : state.answers(slot)) got.emplace_back(a.text, a.utterance_index);
    for (const auto& e : fx["expected"][std::string(slot_name(slot))])
      want.emplace_back(e[0].get<std::string>(), e[1].get<std::size_t>());
    EXPECT_EQ(got, want) << slot_name(slot);
  }
  EXPECT_EQ(state.last_processed(), 29u);
}

TEST(Intent, FixtureLabels) {
  const auto fx = load_fixture();
  const auto h = history_of(fx["utterances"]);
  for (const auto& [index, label] : fx["intents"].items()) {
    const auto got = classify_intent(h[std::stoul(index)].text);
    if (label.is_null()) {
      EXPECT_FALSE(got) << index << ": " << got->name();
    } else {
      ASSERT_TRUE(got) << index;
      EXPECT_EQ(got->name(), label.get<std::string>()) << index;
    }
  }
}

TEST(Intent, Examples) {
  EXPECT_EQ(classify_intent("Thank you for contacting [ORG].")->kind(), DispatcherIntent::Kind::kThank);
  const auto room = classify_intent("Do you know the room number?");
  ASSERT_TRUE(room);
  EXPECT_EQ(room->kind(), DispatcherIntent::Kind::kAskForDetail);
  EXPECT_EQ(room->slot(), SlotId::kPlace);
  EXPECT_FALSE(classify_intent("xyzzy"));
  EXPECT_THROW(classify_intent(" "), ValidationError);
  EXPECT_EQ(classify_intent("We have sent officers to your location.")->name(), "ConfirmSendOfficer");
  EXPECT_EQ(classify_intent("Please call us at ###-###-####.")->name(), "AskToCall");
  EXPECT_EQ(classify_intent("Can you meet the officer in the lobby?")->name(), "AskMeetOfficer");
  EXPECT_EQ(classify_intent("Please stop by the office tomorrow.")->name(), "AskToVisit");
  // The location cue only counts in a question.
  EXPECT_FALSE(classify_intent("The location is noted."));
}

TEST(Intent, NamesRoundTrip) {
  for (auto s : all_slots()) {
    const auto i = DispatcherIntent::ask_for_detail(s);
    EXPECT_EQ(DispatcherIntent::parse(i.name()), i);
  }
  EXPECT_EQ(DispatcherIntent::parse("Thank"), DispatcherIntent::of(DispatcherIntent::Kind::kThank));
  EXPECT_FALSE(DispatcherIntent::parse("AskForDetail"));
  EXPECT_FALSE(DispatcherIntent::parse("AskForDetail(VICTIM)"));
  EXPECT_THROW(DispatcherIntent::of(DispatcherIntent::Kind::kAskForDetail), ValidationError);
}

DialogueState filled_with(std::initializer_list<SlotId> slots) {
  std::array<std::vector<SlotAnswer>, kSlotCount> answers;
  for (auto s : slots) answers[static_cast<std::size_t>(s)].push_back({"x", 0, 1.0});
  return state_from_parts(answers, 0);
}

TEST(NextQuestion, Examples) {
  const auto q = build_slot_questions();
  const TipCategory noise(Category::kNoiseDisturbance);
  const auto first = next_question({}, noise, q);
  ASSERT_TRUE(first);
  EXPECT_EQ(first->slot, SlotId::kPlace);
  EXPECT_EQ(first->question, q[static_cast<int>(SlotId::kPlace)].question);
  EXPECT_EQ(next_question(filled_with({SlotId::kPlace}), noise, q)->slot, SlotId::kStartTime);
  EXPECT_FALSE(next_question(filled_with({SlotId::kAttacker, SlotId::kTarget, SlotId::kWeapon, SlotId::kStartTime,
                                          SlotId::kEndTime, SlotId::kPlace, SlotId::kTargetObject}),
                             noise, q));
  EXPECT_EQ(next_question(filled_with({SlotId::kPlace}), TipCategory(Category::kTheftLostItem), q)->slot,
            SlotId::kTargetObject);
}

TEST(SlotPriorities, MissingSlotsAppended) {
  const auto p = SlotPriorities::from_json(R"({"default": ["WEAPON"], "categories": {}})");
  const auto& order = p.order(TipCategory(Category::kHazard));
  ASSERT_EQ(order.size(), 7u);
  EXPECT_EQ(order[0], SlotId::kWeapon);
  EXPECT_THROW(SlotPriorities::from_json(R"({"default": ["WEAPON", "WEAPON"]})"), ValidationError);
}

// Random conversation drawn from sentences that exercise every rule.
std::vector<Utterance> random_history(std::mt19937_64& rng) {
  static const std::vector<std::string> pool = {
      "someone stole my bike at [LOCATION]", "a tall man followed me near the parking lot",
      "it happened at 10 pm last night", "he had a knife", "my laptop was stolen from room 112",
      "they threatened me until 2 am", "Some students keyed my car in the garage", "ok", "thanks",
      "[PERSON] hit my friend at [TIME]", "between 3 pm and 4 pm", "the ## building", "no idea",
      "two guys in the hallway"};
  std::vector<Utterance> h(1 + rng() % 25);
  long long t = 0;
  for (auto& u : h)
    u = testing::utt(rng() % 3 ? Speaker::kUser : Speaker::kDispatcher, pool[rng() % pool.size()], t += 10);
  return h;
}

TEST(StateProperties, MonotoneGatedAndReplayable) {
  std::mt19937_64 rng(21);
  const auto& qa = PatternQaBackend::bundled();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto h = random_history(rng);
    auto q = build_slot_questions();
    for (auto& x : q) {
      x.min_score = (rng() % 6) * 0.1 + 0.4;
      x.max_answer_len = 1 + rng() % 4;
    }
    DialogueState s;
    std::array<std::size_t, kSlotCount> prev{};
    for (std::size_t i = 1; i <= h.size(); ++i) {
      const auto next = update_state(s, std::span(h).first(i), q, qa);
      for (auto slot : all_slots()) {
        const auto k = static_cast<std::size_t>(slot);
        ASSERT_GE(next.answers(slot).size(), prev[k]);
        for (std::size_t j = 0; j < prev[k]; ++j) ASSERT_EQ(next.answers(slot)[j], s.answers(slot)[j]);
        prev[k] = next.answers(slot).size();
        for (const auto& a : next.answers(slot)) {
          ASSERT_GE(a.score, q[k].min_score);
          ASSERT_LE(answer_length(a.text), q[k].max_answer_len);
          ASSERT_LT(a.utterance_index, i);
        }
      }
      s = next;
    }
    ASSERT_EQ(replay_state(h, q, qa), s);
    ASSERT_EQ(replay_state(h, q, qa), replay_state(h, q, qa));
  }
}

TEST(PatternQa, UserTurnsOnlyAndCaseInsensitive) {
  const auto spans = PatternQaBackend::bundled().answer(
      build_slot_questions()[static_cast<int>(SlotId::kPlace)],
      std::vector<Utterance>{testing::dispatcher("Are you at [LOCATION]?"), user("NEAR THE LIBRARY")});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].text, "THE LIBRARY");
  EXPECT_EQ(spans[0].utterance_index, 1u);
}

}  // namespace
}  // namespace safechat
