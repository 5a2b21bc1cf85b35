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

#include "safechat/emotion.h"

#include <algorithm>
#include <cmath>
#include <future>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/resources.h"
#include "safechat/text.h"

namespace safechat {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kNames = {
    "admiration", "amusement",  "anger",          "annoyance",   "approval",
    "caring",     "confusion",  "curiosity",      "desire",      "disappointment",
    "disapproval", "disgust",   "embarrassment",  "excitement",  "fear",
    "gratitude",  "grief",      "joy",            "love",        "nervousness",
    "optimism",   "pride",      "realization",    "relief",      "remorse",
    "sadness",    "surprise",   "neutral"};

constexpr Emotion kStandardNegative[] = {
    Emotion::kAnger,         Emotion::kAnnoyance, Emotion::kDisappointment,
    Emotion::kDisapproval,   Emotion::kDisgust,   Emotion::kEmbarrassment,
    Emotion::kFear,          Emotion::kGrief,     Emotion::kNervousness,
    Emotion::kRemorse,       Emotion::kSadness};

constexpr Emotion kStandardPositive[] = {
    Emotion::kAdmiration, Emotion::kAmusement, Emotion::kApproval,
    Emotion::kCaring,     Emotion::kDesire,    Emotion::kExcitement,
    Emotion::kGratitude,  Emotion::kJoy,       Emotion::kLove,
    Emotion::kOptimism,   Emotion::kPride,     Emotion::kRelief};

std::size_t idx(Emotion e) { return static_cast<std::size_t>(e); }

}  // namespace

const std::array<Emotion, kEmotionCount>& all_emotions() {
  static const auto kAll = [] {
    std::array<Emotion, kEmotionCount> a{};
    for (std::size_t i = 0; i < kEmotionCount; ++i) a[i] = static_cast<Emotion>(i);
    return a;
  }();
  return kAll;
}

std::string_view emotion_name(Emotion e) { return kNames[idx(e)]; }

std::optional<Emotion> parse_emotion(std::string_view name) {
  std::string lower = text::to_lower(text::trim(name));
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (kNames[i] == lower) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

std::string_view sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::kNegative: return "negative";
    case Sentiment::kNeutral: return "neutral";
    case Sentiment::kPositive: return "positive";
  }
  return "?";
}

// ---------------------------------------------------------------------------

SentimentMapping SentimentMapping::standard(bool confusion_negative) {
  SentimentMapping m;
  m.sentiments_.fill(Sentiment::kNeutral);
  for (Emotion e : kStandardNegative) {
    m.signs_[idx(e)] = -1;
    m.sentiments_[idx(e)] = Sentiment::kNegative;
  }
  for (Emotion e : kStandardPositive) m.sentiments_[idx(e)] = Sentiment::kPositive;
  if (confusion_negative) {
    m.signs_[idx(Emotion::kConfusion)] = -1;
    m.sentiments_[idx(Emotion::kConfusion)] = Sentiment::kNegative;
  }
  return m;
}

SentimentMapping SentimentMapping::from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("sentiment mapping: ") + e.what());
  }
  SentimentMapping m;
  m.sentiments_.fill(Sentiment::kNeutral);
  auto apply = [&](const char* key, Sentiment s, int sign) {
    if (!j.contains(key)) return;
    for (const auto& name : j[key]) {
      auto e = parse_emotion(name.get<std::string>());
      if (!e) throw ValidationError("sentiment mapping: unknown label " + name.dump());
      m.sentiments_[idx(*e)] = s;
      m.signs_[idx(*e)] = sign;
    }
  };
  apply("negative", Sentiment::kNegative, -1);
  apply("positive", Sentiment::kPositive, 0);
  if (j.value("confusion_negative", false)) {
    m.signs_[idx(Emotion::kConfusion)] = -1;
    m.sentiments_[idx(Emotion::kConfusion)] = Sentiment::kNegative;
  }
  return m;
}

int polarity_sign(Emotion label, const SentimentMapping& mapping) {
  return mapping.sign(label);
}

PolarityScore polarity_score(std::span<const Emotion> labels,
                             const SentimentMapping& mapping) {
  if (labels.empty()) throw ValidationError("no user utterances");
  const double n = static_cast<double>(labels.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    double w = std::exp(static_cast<double>(k + 1) - n);
    num += mapping.sign(labels[k]) * w;
    den += w;
  }
  // num == -den exactly when every sign is -1, so the bounds are attained.
  return PolarityScore{std::clamp(num / den, -1.0, 0.0), labels.size()};
}

// ---------------------------------------------------------------------------

SupportSet SupportSet::standard() {
  static constexpr Emotion kDefault[] = {Emotion::kCaring, Emotion::kLove,
                                         Emotion::kSadness, Emotion::kRemorse,
                                         Emotion::kGrief};
  return SupportSet(kDefault);
}

SupportSet::SupportSet(std::span<const Emotion> labels) {
  for (Emotion e : labels) member_[idx(e)] = true;
}

SupportFlag detect_emotional_support(Emotion label, const SupportSet& set) {
  return SupportFlag{set.contains(label), label};
}

// ---------------------------------------------------------------------------

EmotionLabel classify_emotion(std::string_view t, const EmotionClassifier& backend) {
  if (text::trim(t).empty()) throw ValidationError("classify_emotion: empty text");
  std::string owned(t);
  auto out = backend.classify_batch(std::span<const std::string>(&owned, 1));
  if (out.size() != 1) throw BackendError("classifier returned wrong label count", false);
  return out.front();
}

LexiconClassifier LexiconClassifier::from_json(std::string_view json_text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("emotion lexicon: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("emotion lexicon: expected object");
  LexiconClassifier c;
  for (const auto& [name, phrases] : j.items()) {
    auto e = parse_emotion(name);
    if (!e) throw ValidationError("emotion lexicon: unknown label " + name);
    Entry entry{*e, {}};
    for (const auto& p : phrases) {
      auto toks = text::word_tokens(p.get<std::string>());
      if (!toks.empty()) entry.phrases.push_back(std::move(toks));
    }
    c.entries_.push_back(std::move(entry));
  }
  return c;
}

const LexiconClassifier& LexiconClassifier::bundled() {
  static const LexiconClassifier kBundled = from_json(resources::emotion_lexicon());
  return kBundled;
}

EmotionLabel LexiconClassifier::classify(std::string_view t) const {
  auto toks = text::word_tokens(t);
  for (const auto& entry : entries_) {
    for (const auto& phrase : entry.phrases) {
      if (std::search(toks.begin(), toks.end(), phrase.begin(), phrase.end()) !=
          toks.end()) {
        return EmotionLabel{entry.label, 1.0};
      }
    }
  }
  return EmotionLabel{Emotion::kNeutral, 0.5};
}

std::vector<EmotionLabel> LexiconClassifier::classify_batch(
    std::span<const std::string> texts) const {
  std::vector<EmotionLabel> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(classify(t));
  return out;
}

std::vector<EmotionLabel> classify_all(std::span<const std::string> texts,
                                       const EmotionClassifier& backend,
                                       const ClassifyOptions& options) {
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t lanes = std::max<std::size_t>(1, options.max_in_flight);
  std::vector<EmotionLabel> out(texts.size());
  std::size_t n_batches = (texts.size() + batch - 1) / batch;
  auto run = [&](std::size_t b) {
    auto slice = texts.subspan(b * batch, std::min(batch, texts.size() - b * batch));
    auto labels = backend.classify_batch(slice);
    if (labels.size() != slice.size()) {
      throw BackendError("classifier returned wrong label count", false);
    }
    std::copy(labels.begin(), labels.end(), out.begin() + static_cast<long>(b * batch));
  };
  if (lanes == 1 || n_batches <= 1) {
    for (std::size_t b = 0; b < n_batches; ++b) run(b);
    return out;
  }
  for (std::size_t start = 0; start < n_batches; start += lanes) {
    std::vector<std::future<void>> wave;
    for (std::size_t b = start; b < std::min(n_batches, start + lanes); ++b) {
      wave.push_back(std::async(std::launch::async, run, b));
    }
    for (auto& f : wave) f.get();
  }
  return out;
}

CorpusLabels annotate_corpus(const Corpus& corpus, const EmotionClassifier& backend,
                             const ClassifyOptions& options) {
  std::vector<std::string> texts;
  texts.reserve(corpus.utterance_count());
  for (const auto& inc : corpus.incidents()) {
    for (const auto& u : inc.utterances) texts.push_back(u.text);
  }
  auto flat = classify_all(texts, backend, options);
  CorpusLabels out;
  out.reserve(corpus.incident_count());
  std::size_t k = 0;
  for (const auto& inc : corpus.incidents()) {
    out.emplace_back(flat.begin() + static_cast<long>(k),
                     flat.begin() + static_cast<long>(k + inc.utterances.size()));
    k += inc.utterances.size();
  }
  return out;
}

std::vector<Emotion> user_emotions(const Incident& incident,
                                   std::span<const EmotionLabel> labels) {
  std::vector<Emotion> out;
  for (std::size_t i = 0; i < incident.utterances.size() && i < labels.size(); ++i) {
    if (incident.utterances[i].speaker == Speaker::kUser) out.push_back(labels[i].emotion);
  }
  return out;
}

PolarityScore incident_polarity(const Incident& incident,
                                std::span<const EmotionLabel> labels,
                                const SentimentMapping& mapping) {
  auto users = user_emotions(incident, labels);
  return polarity_score(users, mapping);
}

// ---------------------------------------------------------------------------

LabeledConversation labeled_conversation(const Incident& incident,
                                         std::span<const EmotionLabel> labels) {
  LabeledConversation conv;
  for (std::size_t i = 0; i < incident.utterances.size() && i < labels.size(); ++i) {
    conv.emplace_back(incident.utterances[i].speaker, labels[i].emotion);
  }
  return conv;
}

StageSentimentTable stage_sentiment(std::span<const LabeledConversation> conversations,
                                    const SentimentMapping& mapping) {
  StageSentimentTable table;
  std::size_t total = 0;
  for (const auto& conv : conversations) {
    if (conv.empty()) continue;
    auto stages = split_stages(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) {
      if (conv[i].first != Speaker::kUser) continue;
      auto s = static_cast<std::size_t>(mapping.sentiment(conv[i].second));
      ++table.counts[static_cast<std::size_t>(stages[i])][s];
      ++total;
    }
  }
  if (total == 0) throw ValidationError("stage sentiment: no user utterances");
  for (std::size_t st = 0; st < 3; ++st) {
    const auto& c = table.counts[st];
    std::size_t n = c[0] + c[1] + c[2];
    if (n == 0) continue;
    double dn = static_cast<double>(n);
    table.rows[st] = SentimentRow{static_cast<double>(c[0]) / dn,
                                  static_cast<double>(c[1]) / dn,
                                  static_cast<double>(c[2]) / dn, n};
  }
  return table;
}

StageSentimentTable stage_sentiment_ratios(const Corpus& corpus,
                                           const CorpusLabels& labels,
                                           const SentimentMapping& mapping) {
  std::vector<LabeledConversation> convs;
  convs.reserve(corpus.incident_count());
  for (std::size_t k = 0; k < corpus.incident_count(); ++k) {
    convs.push_back(labeled_conversation(corpus.incidents()[k], labels.at(k)));
  }
  return stage_sentiment(convs, mapping);
}

StageSentimentTable stage_sentiment_ratios(const Corpus& corpus,
                                           const EmotionClassifier& backend,
                                           const SentimentMapping& mapping) {
  if (corpus.empty()) throw ValidationError("stage sentiment: empty corpus");
  return stage_sentiment_ratios(corpus, annotate_corpus(corpus, backend), mapping);
}

StagePairs stage_positive_ratios(std::span<const LabeledConversation> conversations,
                                 const SentimentMapping& mapping, Stage from, Stage to) {
  StagePairs out;
  for (const auto& conv : conversations) {
    if (conv.empty()) continue;
    auto stages = split_stages(conv.size());
    std::array<std::size_t, 3> n{}, pos{};
    for (std::size_t i = 0; i < conv.size(); ++i) {
      if (conv[i].first != Speaker::kUser) continue;
      auto st = static_cast<std::size_t>(stages[i]);
      ++n[st];
      if (mapping.sentiment(conv[i].second) == Sentiment::kPositive) ++pos[st];
    }
    auto a = static_cast<std::size_t>(from), b = static_cast<std::size_t>(to);
    if (n[a] == 0 || n[b] == 0) continue;
    out.from.push_back(static_cast<double>(pos[a]) / static_cast<double>(n[a]));
    out.to.push_back(static_cast<double>(pos[b]) / static_cast<double>(n[b]));
  }
  return out;
}

}  // namespace safechat
