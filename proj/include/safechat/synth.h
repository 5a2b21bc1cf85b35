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

// Seeded synthetic tip corpora with planted effects, for desk-scale runs of
// the full pipeline. Output is a pure function of the config: the generator
// uses its own distribution helpers on top of mt19937_64 so results do not
// depend on the standard library implementation.

#ifndef SAFECHAT_SYNTH_H_
#define SAFECHAT_SYNTH_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "safechat/analysis.h"
#include "safechat/corpus.h"
#include "safechat/emotion.h"

namespace safechat::synth {

struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t incidents = 600;
  std::size_t orgs = 40;
  std::size_t min_utterances = 4;
  std::size_t max_utterances = 12;
  double anonymous_rate = 0.3;
  // Per user turn after the opener.
  double negative_rate = 0.2;
  double mental_health_negative_rate = 0.75;
  // Positive share grows linearly from the first to the last stage.
  double positive_rate_initiation = 0.05;
  double positive_rate_elaboration = 0.35;
  // P(incident receives support) = logistic(intercept + slope * years in use).
  double support_intercept = 0.6;
  double support_years_slope = -0.5;
  // Floor weight for categories with small reported counts.
  double rare_category_weight = 80.0;
};

struct SynthCorpus {
  Corpus corpus;
  analysis::OrgTable orgs;
};

SynthCorpus generate(const SynthConfig& config);

// Sentence banks, each sentence paired with the label the bundled lexicon
// assigns to it.
struct BankSentence {
  std::string_view text;
  Emotion label;
};

enum class Bank {
  kUserNegative,
  kMentalHealthNegative,
  kUserNeutral,
  kUserPositive,
  kDispatcherSupport,
  kDispatcherNeutral,
};
std::span<const BankSentence> bank(Bank b);
// Category openers (all neutral under the lexicon).
std::span<const BankSentence> openers(Category c);

// Portable RNG helpers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                                   // [0, 1)
  std::uint64_t below(std::uint64_t n);               // [0, n), unbiased
  bool bernoulli(double p);
  std::size_t weighted(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace safechat::synth

#endif  // SAFECHAT_SYNTH_H_
