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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "safechat/emotion.h"
#include "safechat/error.h"
#include "test_util.h"

namespace safechat {
namespace {

using E = Emotion;

// Direct evaluation of sum s_i e^(i+k) / sum e^(i+k), i = 1..N.
double polarity_oracle(const std::vector<E>& labels, const SentimentMapping& m, int k = 0) {
  long double num = 0, den = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    const long double w = std::exp(static_cast<long double>(static_cast<int>(i) + k));
    num += m.sign(labels[i - 1]) * w;
    den += w;
  }
  return static_cast<double>(num / den);
}

const std::set<E> kNegative = {E::kAnger,         E::kAnnoyance, E::kDisappointment, E::kDisapproval,
                               E::kDisgust,       E::kEmbarrassment, E::kFear,       E::kGrief,
                               E::kNervousness,   E::kRemorse,   E::kSadness};
const std::set<E> kSupport = {E::kCaring, E::kLove, E::kSadness, E::kRemorse, E::kGrief};

TEST(Emotion, NamesRoundTrip) {
  EXPECT_EQ(all_emotions().size(), 28u);
  for (auto e : all_emotions()) EXPECT_EQ(parse_emotion(emotion_name(e)), e);
  EXPECT_EQ(emotion_name(E::kGratitude), "gratitude");
  EXPECT_FALSE(parse_emotion("hunger"));
}

TEST(SentimentMapping, StandardNegativeSetIsExact) {
  const auto m = SentimentMapping::standard();
  for (auto e : all_emotions()) {
    EXPECT_EQ(m.sign(e), kNegative.count(e) ? -1 : 0) << emotion_name(e);
    EXPECT_EQ(m.sentiment(e) == Sentiment::kNegative, kNegative.count(e) == 1);
  }
  EXPECT_EQ(polarity_sign(E::kFear, m), -1);
  EXPECT_EQ(polarity_sign(E::kGratitude, m), 0);
  EXPECT_EQ(polarity_sign(E::kNeutral, m), 0);
  EXPECT_EQ(m.sentiment(E::kGratitude), Sentiment::kPositive);
  EXPECT_EQ(m.sentiment(E::kNeutral), Sentiment::kNeutral);
  for (auto e : {E::kConfusion, E::kCuriosity, E::kRealization, E::kSurprise}) {
    EXPECT_EQ(m.sign(e), 0);
    EXPECT_EQ(m.sentiment(e), Sentiment::kNeutral);
  }
  EXPECT_EQ(SentimentMapping::standard(true).sign(E::kConfusion), -1);
}

TEST(SentimentMapping, FromJson) {
  const auto m = SentimentMapping::from_json(R"({"negative": ["fear"], "positive": ["joy"]})");
  EXPECT_EQ(m.sign(E::kFear), -1);
  EXPECT_EQ(m.sign(E::kAnger), 0);
  EXPECT_EQ(m.sentiment(E::kJoy), Sentiment::kPositive);
  EXPECT_EQ(m.sentiment(E::kGratitude), Sentiment::kNeutral);
  EXPECT_THROW(SentimentMapping::from_json(R"({"negative": ["hunger"]})"), ValidationError);
}

TEST(Polarity, Examples) {
  const auto m = SentimentMapping::standard();
  EXPECT_EQ(polarity_score(std::vector<E>{E::kNeutral}, m).value, 0.0);
  EXPECT_EQ(polarity_score(std::vector<E>{E::kSadness}, m).value, -1.0);
  EXPECT_THROW(polarity_score(std::vector<E>{}, m), ValidationError);
}

TEST(Polarity, WorkedExample) {
  const auto m = SentimentMapping::standard(true);
  const std::vector<E> labels = {E::kFear, E::kConfusion, E::kNeutral, E::kCuriosity, E::kGratitude};
  std::vector<int> signs;
  for (auto e : labels) signs.push_back(polarity_sign(e, m));
  EXPECT_EQ(signs, (std::vector<int>{-1, -1, 0, 0, 0}));
  const double e = std::exp(1.0);
  const double hand = -(e + e * e) / (e + e * e + std::pow(e, 3) + std::pow(e, 4) + std::pow(e, 5));
  const auto s = polarity_score(labels, m);
  EXPECT_NEAR(s.value, hand, 1e-12);
  EXPECT_NEAR(s.value, -0.04334, 1e-4);
  EXPECT_EQ(s.n_user_utterances, 5u);
}

std::vector<E> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<E> out(n);
  for (auto& e : out) e = all_emotions()[rng() % kEmotionCount];
  return out;
}

TEST(PolarityProperties, OracleBoundsAndShift) {
  std::mt19937_64 rng(1);
  const auto m = SentimentMapping::standard();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto labels = random_labels(rng, 1 + rng() % 50);
    const double v = polarity_score(labels, m).value;
    EXPECT_NEAR(v, polarity_oracle(labels, m), 1e-9);
    EXPECT_NEAR(polarity_oracle(labels, m, 0), polarity_oracle(labels, m, -static_cast<int>(labels.size())),
                1e-12);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 0.0);
    const bool any = std::any_of(labels.begin(), labels.end(), [&](E e) { return m.sign(e) < 0; });
    const bool all = std::all_of(labels.begin(), labels.end(), [&](E e) { return m.sign(e) < 0; });
    EXPECT_EQ(v == 0.0, !any);
    EXPECT_EQ(v == -1.0, all);
  }
}

TEST(PolarityProperties, LaterNegativeNeverIncreases) {
  std::mt19937_64 rng(2);
  const auto m = SentimentMapping::standard();
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto labels = random_labels(rng, 2 + rng() % 30);
    const std::size_t i = rng() % (labels.size() - 1);
    const std::size_t j = i + 1 + rng() % (labels.size() - i - 1);
    if (m.sign(labels[i]) != -1 || m.sign(labels[j]) != 0) continue;
    const double before = polarity_score(labels, m).value;
    std::swap(labels[i], labels[j]);
    EXPECT_LE(polarity_score(labels, m).value, before + 1e-15);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Polarity, LongSequenceDoesNotOverflow) {
  std::vector<E> labels(5000, E::kNeutral);
  labels.back() = E::kFear;
  const double v = polarity_score(labels, SentimentMapping::standard()).value;
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -(1 - std::exp(-1.0)), 1e-12);
}

TEST(Support, ExhaustiveStandardSet) {
  for (auto e : all_emotions()) {
    const auto f = detect_emotional_support(e);
    EXPECT_EQ(f.is_support, kSupport.count(e) == 1) << emotion_name(e);
    EXPECT_EQ(f.triggering_label, e);
  }
}

TEST(Support, CustomSetChangesOnlyMembership) {
  const std::vector<E> labels = {E::kGratitude, E::kCaring};
  const SupportSet custom(labels);
  for (auto e : all_emotions()) {
    const bool expected = e == E::kGratitude || e == E::kCaring;
    EXPECT_EQ(detect_emotional_support(e, custom).is_support, expected);
  }
}

TEST(Lexicon, Examples) {
  const auto& lex = LexiconClassifier::bundled();
  EXPECT_EQ(classify_emotion("thank you so much", lex).emotion, E::kGratitude);
  EXPECT_EQ(classify_emotion("asdf qwerty", lex).emotion, E::kNeutral);
  EXPECT_DOUBLE_EQ(classify_emotion("asdf qwerty", lex).confidence, 0.5);
  EXPECT_THROW(classify_emotion("", lex), ValidationError);
  EXPECT_THROW(classify_emotion("   ", lex), ValidationError);
  EXPECT_EQ(lex.classify("I'm so sorry to hear that").emotion, E::kSadness);
  EXPECT_EQ(lex.classify("Are you safe right now?").emotion, E::kCaring);
  EXPECT_EQ(lex.classify("I'm scared").emotion, E::kFear);
  // Token runs, not substrings.
  EXPECT_EQ(lex.classify("thanksgiving dinner").emotion, E::kNeutral);
}

TEST(Lexicon, FileOrderIsPriority) {
  const auto a = LexiconClassifier::from_json(R"({"joy": ["happy"], "sadness": ["sad"]})");
  const auto b = LexiconClassifier::from_json(R"({"sadness": ["sad"], "joy": ["happy"]})");
  EXPECT_EQ(a.classify("happy and sad").emotion, E::kJoy);
  EXPECT_EQ(b.classify("happy and sad").emotion, E::kSadness);
  EXPECT_THROW(LexiconClassifier::from_json(R"({"hunger": ["food"]})"), ValidationError);
}

// Records the peak number of concurrent calls.
class CountingClassifier : public EmotionClassifier {
 public:
  std::vector<EmotionLabel> classify_batch(std::span<const std::string> texts) const override {
    const int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active_;
    ++calls_;
    return LexiconClassifier::bundled().classify_batch(texts);
  }
  mutable std::atomic<int> active_{0}, peak_{0}, calls_{0};
};

TEST(ClassifyAll, BoundedParallelismKeepsOrder) {
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back(i % 2 ? "thanks" : "I'm scared");
  CountingClassifier c;
  const auto labels = classify_all(texts, c, {7, 3});
  ASSERT_EQ(labels.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i)
    EXPECT_EQ(labels[i].emotion, i % 2 ? E::kGratitude : E::kFear);
  EXPECT_LE(c.peak_.load(), 3);
  EXPECT_EQ(c.calls_.load(), 15);
}

class FailingClassifier : public EmotionClassifier {
 public:
  std::vector<EmotionLabel> classify_batch(std::span<const std::string>) const override {
    throw BackendError("down", true);
  }
};

TEST(ClassifyAll, BackendFailureIsNotNeutral) {
  const std::vector<std::string> texts = {"a", "b"};
  EXPECT_THROW(classify_all(texts, FailingClassifier{}), BackendError);
}

TEST(StageSentiment, Examples) {
  const auto m = SentimentMapping::standard();
  const std::vector<LabeledConversation> one = {
      {{Speaker::kUser, E::kFear}, {Speaker::kUser, E::kNeutral}, {Speaker::kUser, E::kGratitude}}};
  const auto t = stage_sentiment(one, m);
  for (int s = 0; s < 3; ++s) {
    ASSERT_TRUE(t.rows[s]);
    EXPECT_EQ(t.rows[s]->negative, s == 0 ? 1.0 : 0.0);
    EXPECT_EQ(t.rows[s]->neutral, s == 1 ? 1.0 : 0.0);
    EXPECT_EQ(t.rows[s]->positive, s == 2 ? 1.0 : 0.0);
  }
  const std::vector<LabeledConversation> neutral = {
      {{Speaker::kUser, E::kNeutral}, {Speaker::kDispatcher, E::kCaring}, {Speaker::kUser, E::kNeutral}},
      {{Speaker::kUser, E::kNeutral}, {Speaker::kUser, E::kNeutral}, {Speaker::kUser, E::kNeutral}}};
  const auto n = stage_sentiment(neutral, m);
  for (const auto& row : n.rows) {
    ASSERT_TRUE(row);
    EXPECT_EQ(row->neutral, 1.0);
  }
  // Stage 1 holds only a dispatcher turn.
  const std::vector<LabeledConversation> gap = {
      {{Speaker::kUser, E::kFear}, {Speaker::kDispatcher, E::kCaring}, {Speaker::kUser, E::kFear}}};
  const auto g = stage_sentiment(gap, m);
  EXPECT_TRUE(g.rows[0]);
  EXPECT_FALSE(g.rows[1]);
  EXPECT_TRUE(g.rows[2]);
  const std::vector<LabeledConversation> none = {{{Speaker::kDispatcher, E::kCaring}}};
  EXPECT_THROW(stage_sentiment(none, m), ValidationError);
}

TEST(StageSentimentProperties, RowsSumToOne) {
  std::mt19937_64 rng(3);
  const auto m = SentimentMapping::standard();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledConversation> convs(1 + rng() % 10);
    for (auto& c : convs) {
      c.emplace_back(Speaker::kUser, all_emotions()[rng() % kEmotionCount]);
      for (std::size_t k = rng() % 15; k > 0; --k)
        c.emplace_back(rng() % 2 ? Speaker::kUser : Speaker::kDispatcher, all_emotions()[rng() % kEmotionCount]);
    }
    const auto t = stage_sentiment(convs, m);
    for (const auto& row : t.rows) {
      if (!row) continue;
      EXPECT_NEAR(row->negative + row->neutral + row->positive, 1.0, 1e-9);
    }
  }
}

TEST(IncidentPolarity, UsesUserTurnsOnly) {
  const auto inc = testing::incident("p", {"I'm scared", "Are you safe?", "ok thanks"});
  const auto labels = annotate_corpus(Corpus({inc}), LexiconClassifier::bundled());
  ASSERT_EQ(labels[0].size(), 3u);
  const auto p = incident_polarity(inc, labels[0], SentimentMapping::standard());
  EXPECT_EQ(p.n_user_utterances, 2u);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p.value, -e / (e + e * e), 1e-12);
}

}  // namespace
}  // namespace safechat
