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

// Per-utterance emotion labels over the 28-class GoEmotions taxonomy,
// conversation polarity, emotional-support detection and stage sentiment.

#ifndef SAFECHAT_EMOTION_H_
#define SAFECHAT_EMOTION_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safechat/corpus.h"

namespace safechat {

enum class Emotion : std::uint8_t {
  kAdmiration,
  kAmusement,
  kAnger,
  kAnnoyance,
  kApproval,
  kCaring,
  kConfusion,
  kCuriosity,
  kDesire,
  kDisappointment,
  kDisapproval,
  kDisgust,
  kEmbarrassment,
  kExcitement,
  kFear,
  kGratitude,
  kGrief,
  kJoy,
  kLove,
  kNervousness,
  kOptimism,
  kPride,
  kRealization,
  kRelief,
  kRemorse,
  kSadness,
  kSurprise,
  kNeutral,
};

inline constexpr std::size_t kEmotionCount = 28;
const std::array<Emotion, kEmotionCount>& all_emotions();
std::string_view emotion_name(Emotion e);  // lowercase GoEmotions name
std::optional<Emotion> parse_emotion(std::string_view name);

struct EmotionLabel {
  Emotion emotion = Emotion::kNeutral;
  double confidence = 1.0;  // [0, 1]

  bool operator==(const EmotionLabel&) const = default;
};

enum class Sentiment { kNegative, kNeutral, kPositive };
std::string_view sentiment_name(Sentiment s);

// Sign table used by the polarity score (-1 negative, 0 otherwise) and the
// 3-way grouping used in stage analysis. Every label is mapped.
//
// The standard table marks exactly anger, annoyance, disappointment,
// disapproval, disgust, embarrassment, fear, grief, nervousness, remorse and
// sadness as negative. The ambiguous labels (confusion, curiosity,
// realization, surprise) are sign 0 / neutral; `confusion_negative` moves
// confusion to the negative side.
class SentimentMapping {
 public:
  static SentimentMapping standard(bool confusion_negative = false);
  // {"negative": [...], "positive": [...], "confusion_negative": bool}; labels
  // not listed are neutral.
  static SentimentMapping from_json(std::string_view json_text);

  int sign(Emotion e) const { return signs_[static_cast<std::size_t>(e)]; }
  Sentiment sentiment(Emotion e) const {
    return sentiments_[static_cast<std::size_t>(e)];
  }

 private:
  std::array<int, kEmotionCount> signs_{};
  std::array<Sentiment, kEmotionCount> sentiments_{};
};

int polarity_sign(Emotion label, const SentimentMapping& mapping);

struct PolarityScore {
  double value = 0.0;  // [-1, 0]
  std::size_t n_user_utterances = 0;
};

// Late-weighted mean of the user utterance signs, weight e^i for the i-th
// (1-based) user utterance. Evaluated with weights e^(i-N), which leaves the
// ratio unchanged and cannot overflow. Throws ValidationError on empty input.
PolarityScore polarity_score(std::span<const Emotion> user_labels,
                             const SentimentMapping& mapping);

// ---------------------------------------------------------------------------
// Emotional support

struct SupportFlag {
  bool is_support = false;
  Emotion triggering_label = Emotion::kNeutral;

  bool operator==(const SupportFlag&) const = default;
};

// Labels that count as emotional support in a dispatcher utterance. The
// standard set is caring, love, sadness, remorse and grief.
class SupportSet {
 public:
  static SupportSet standard();
  explicit SupportSet(std::span<const Emotion> labels);
  bool contains(Emotion e) const { return member_[static_cast<std::size_t>(e)]; }

 private:
  SupportSet() = default;
  std::array<bool, kEmotionCount> member_{};
};

SupportFlag detect_emotional_support(Emotion dispatcher_label,
                                     const SupportSet& set = SupportSet::standard());

// ---------------------------------------------------------------------------
// Classifier contract

// Implementations must be safe to call concurrently.
class EmotionClassifier {
 public:
  virtual ~EmotionClassifier() = default;
  // One top-1 label per input, in order. Transport problems surface as
  // BackendError; a failure never degrades to a neutral label.
  virtual std::vector<EmotionLabel> classify_batch(
      std::span<const std::string> texts) const = 0;
};

// Throws ValidationError for empty (all-whitespace) text.
EmotionLabel classify_emotion(std::string_view text, const EmotionClassifier& backend);

// Deterministic keyword baseline. Entries are tried in table order and the
// first entry with a phrase occurring as a contiguous token run wins; texts
// without a hit are neutral. Confidence is 1.0 for hits and 0.5 for the
// neutral default.
class LexiconClassifier : public EmotionClassifier {
 public:
  static const LexiconClassifier& bundled();
  // Ordered object {"label": ["phrase", ...], ...}.
  static LexiconClassifier from_json(std::string_view json_text);

  EmotionLabel classify(std::string_view text) const;
  std::vector<EmotionLabel> classify_batch(
      std::span<const std::string> texts) const override;

 private:
  struct Entry {
    Emotion label;
    std::vector<std::vector<std::string>> phrases;
  };
  std::vector<Entry> entries_;
};

struct ClassifyOptions {
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
};

// Classifies with at most `max_in_flight` concurrent batches. Output order
// follows input order.
std::vector<EmotionLabel> classify_all(std::span<const std::string> texts,
                                       const EmotionClassifier& backend,
                                       const ClassifyOptions& options = {});

// Labels for every utterance, aligned with corpus.incidents()[k].utterances.
using CorpusLabels = std::vector<std::vector<EmotionLabel>>;
CorpusLabels annotate_corpus(const Corpus& corpus, const EmotionClassifier& backend,
                             const ClassifyOptions& options = {});

std::vector<Emotion> user_emotions(const Incident& incident,
                                   std::span<const EmotionLabel> labels);
// Throws ValidationError when the incident has no user utterance.
PolarityScore incident_polarity(const Incident& incident,
                                std::span<const EmotionLabel> labels,
                                const SentimentMapping& mapping);

// ---------------------------------------------------------------------------
// Stage sentiment

struct SentimentRow {
  double negative = 0.0;
  double neutral = 0.0;
  double positive = 0.0;
  std::size_t n = 0;
};

// One row per stage; a stage with no user utterance is absent.
struct StageSentimentTable {
  std::array<std::optional<SentimentRow>, 3> rows;
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [stage][sentiment]
};

// A conversation as (speaker, label) pairs in order.
using LabeledConversation = std::vector<std::pair<Speaker, Emotion>>;

// Stages come from the position of each utterance in the whole conversation;
// only user utterances are tallied. Throws ValidationError when no
// conversation has a user utterance.
StageSentimentTable stage_sentiment(std::span<const LabeledConversation> conversations,
                                    const SentimentMapping& mapping);
StageSentimentTable stage_sentiment_ratios(const Corpus& corpus,
                                           const EmotionClassifier& backend,
                                           const SentimentMapping& mapping);
StageSentimentTable stage_sentiment_ratios(const Corpus& corpus,
                                           const CorpusLabels& labels,
                                           const SentimentMapping& mapping);

LabeledConversation labeled_conversation(const Incident& incident,
                                         std::span<const EmotionLabel> labels);

// Per-conversation share of positive user utterances in one stage, for
// conversations that have a user utterance in both `from` and `to`.
struct StagePairs {
  std::vector<double> from;
  std::vector<double> to;
};
StagePairs stage_positive_ratios(std::span<const LabeledConversation> conversations,
                                 const SentimentMapping& mapping, Stage from, Stage to);

}  // namespace safechat

#endif  // SAFECHAT_EMOTION_H_
