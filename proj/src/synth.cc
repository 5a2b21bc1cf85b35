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

#include "safechat/synth.h"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "safechat/error.h"

namespace safechat::synth {
namespace {

using E = Emotion;

constexpr BankSentence kUserNegative[] = {
    {"I'm really scared right now.", E::kFear},
    {"I feel unsafe walking back to my dorm.", E::kFear},
    {"The music is so loud and I can't sleep.", E::kAnnoyance},
    {"This is ridiculous, it happens every weekend.", E::kAnnoyance},
    {"I'm so angry about this.", E::kAnger},
    {"I'm worried something bad will happen.", E::kNervousness},
    {"It reeks of smoke in the hallway.", E::kDisgust},
    {"I feel so sad and hopeless.", E::kSadness},
    {"I'm really nervous to go outside.", E::kNervousness},
    {"Honestly I'm disappointed nobody came last time.", E::kDisappointment},
};

constexpr BankSentence kMentalHealthNegative[] = {
    {"I feel so sad and hopeless.", E::kSadness},
    {"My friend has been crying all night.", E::kSadness},
    {"I'm worried she might hurt herself.", E::kNervousness},
    {"I'm scared for him.", E::kFear},
    {"He says he feels lonely and depressed.", E::kSadness},
};

constexpr BankSentence kUserNeutral[] = {
    {"There is a person standing by the entrance.", E::kNeutral},
    {"It started a few minutes ago.", E::kNeutral},
    {"He is wearing a black hoodie.", E::kNeutral},
    {"It is near the parking lot by the library.", E::kNeutral},
    {"I can see them from my window.", E::kNeutral},
    {"Yes, that is correct.", E::kNeutral},
    {"They went toward the north side.", E::kNeutral},
    {"It is on the third floor.", E::kNeutral},
    {"No, nobody is hurt.", E::kNeutral},
};

constexpr BankSentence kUserPositive[] = {
    {"Thank you so much.", E::kGratitude},
    {"Thanks, I appreciate it.", E::kGratitude},
    {"Okay, I feel relieved now.", E::kRelief},
    {"That sounds good.", E::kApproval},
    {"Hopefully they get here soon.", E::kOptimism},
};

constexpr BankSentence kDispatcherSupport[] = {
    {"Are you safe right now?", E::kCaring},
    {"Don't worry, we will help you.", E::kCaring},
    {"I'm so sorry to hear that.", E::kSadness},
    {"Please stay safe until officers arrive.", E::kCaring},
    {"You are not alone, we are here for you.", E::kCaring},
    {"Take care of yourself tonight.", E::kCaring},
};

constexpr BankSentence kDispatcherNeutral[] = {
    {"Can you tell me where this is happening?", E::kNeutral},
    {"Officers have been dispatched to your location.", E::kNeutral},
    {"What does the person look like?", E::kNeutral},
    {"Can you describe what you saw?", E::kNeutral},
    {"What time did this start?", E::kNeutral},
    {"Thank you for the information.", E::kGratitude},
    {"Is anyone injured?", E::kNeutral},
    {"Okay, we are sending someone now.", E::kNeutral},
};

constexpr BankSentence kOpenNoise[] = {
    {"Loud music coming from room ### in [LOCATION].", E::kNeutral},
    {"There is a party on the second floor of my building.", E::kNeutral}};
constexpr BankSentence kOpenSuspicious[] = {
    {"A man is looking into cars in the parking lot.", E::kNeutral},
    {"Someone is walking around the building checking doors.", E::kNeutral}};
constexpr BankSentence kOpenEmergency[] = {
    {"I need help at [LOCATION] right now.", E::kNeutral},
    {"Please send someone to the library entrance.", E::kNeutral}};
constexpr BankSentence kOpenDrugs[] = {
    {"People are smoking weed in the stairwell.", E::kNeutral},
    {"Some students are drinking in the quad.", E::kNeutral}};
constexpr BankSentence kOpenFacilities[] = {
    {"The elevator in the main building is broken.", E::kNeutral},
    {"There is water leaking in the hallway.", E::kNeutral}};
constexpr BankSentence kOpenHarassment[] = {
    {"A man followed me from the parking lot.", E::kNeutral},
    {"[PERSON] harassed me outside the gym.", E::kNeutral}};
constexpr BankSentence kOpenAccident[] = {
    {"A car hit a bike near the main street.", E::kNeutral},
    {"Someone is parked in the fire lane.", E::kNeutral}};
constexpr BankSentence kOpenTheft[] = {
    {"Someone stole my bike outside the library.", E::kNeutral},
    {"My laptop was stolen from the study room.", E::kNeutral}};
constexpr BankSentence kOpenMentalHealth[] = {
    {"My roommate has not left the room in days.", E::kNeutral},
    {"I need to talk to someone about my friend.", E::kNeutral}};
constexpr BankSentence kOpenVandalism[] = {
    {"Someone keyed my car in the garage.", E::kNeutral},
    {"There is graffiti on the side of the building.", E::kNeutral}};
constexpr BankSentence kOpenGeneric[] = {
    {"I need to report something at [LOCATION].", E::kNeutral},
    {"Something is going on near the dorm.", E::kNeutral}};

// Reported counts for the common categories; the rest share a floor weight.
constexpr std::array<double, kCategoryCount> kCategoryCounts = {
    2282, 1700, 1133, 1031, 593, 455, 348, 269, 171, 90, 0, 0, 0, 0, 0, 0, 0, 0};

// Local-hour weights: quiet mornings, busy late evenings.
constexpr std::array<double, 24> kHourWeights = {6, 5, 4, 3, 2, 2, 2, 2, 3, 3, 4, 4,
                                                 4, 4, 4, 4, 5, 5, 5, 6, 7, 8, 8, 7};

constexpr std::array<int, 4> kOffsets = {-300, -360, -420, -480};

template <std::size_t N>
std::span<const BankSentence> as_span(const BankSentence (&a)[N]) {
  return {a, N};
}

std::string_view pick(Rng& rng, std::span<const BankSentence> b) {
  return b[rng.below(b.size())].text;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr long long kDaySeconds = 86400;

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("empty range");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % n;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::weighted(std::span<const double> weights) {
  double total = 0;
  for (double w : weights) total += w;
  if (!(total > 0)) throw ValidationError("weights must have a positive sum");
  double u = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::span<const BankSentence> bank(Bank b) {
  switch (b) {
    case Bank::kUserNegative: return as_span(kUserNegative);
    case Bank::kMentalHealthNegative: return as_span(kMentalHealthNegative);
    case Bank::kUserNeutral: return as_span(kUserNeutral);
    case Bank::kUserPositive: return as_span(kUserPositive);
    case Bank::kDispatcherSupport: return as_span(kDispatcherSupport);
    case Bank::kDispatcherNeutral: return as_span(kDispatcherNeutral);
  }
  return {};
}

std::span<const BankSentence> openers(Category c) {
  switch (c) {
    case Category::kNoiseDisturbance: return as_span(kOpenNoise);
    case Category::kSuspiciousActivity: return as_span(kOpenSuspicious);
    case Category::kEmergencyMessage: return as_span(kOpenEmergency);
    case Category::kDrugsAlcohol: return as_span(kOpenDrugs);
    case Category::kFacilitiesMaintenance: return as_span(kOpenFacilities);
    case Category::kHarassmentAbuse: return as_span(kOpenHarassment);
    case Category::kAccidentTrafficParking: return as_span(kOpenAccident);
    case Category::kTheftLostItem: return as_span(kOpenTheft);
    case Category::kMentalHealth: return as_span(kOpenMentalHealth);
    case Category::kVandalismDamage: return as_span(kOpenVandalism);
    default: return as_span(kOpenGeneric);
  }
}

SynthCorpus generate(const SynthConfig& cfg) {
  if (cfg.incidents == 0 || cfg.orgs == 0) throw ValidationError("incidents and orgs must be positive");
  if (cfg.min_utterances < 3 || cfg.max_utterances < cfg.min_utterances)
    throw ValidationError("utterance bounds must satisfy 3 <= min <= max");
  Rng rng(cfg.seed);

  const Timestamp window_start = Timestamp::from_civil(2018, 1, 1);
  const long long window_days = 729;  // through 2019-12-30, local
  const Timestamp adopt_start = Timestamp::from_civil(2012, 1, 1);
  const long long adopt_days = 6 * 365;

  SynthCorpus out;
  std::vector<std::string> org_ids;
  std::vector<int> org_offsets;
  char buf[32];
  for (std::size_t o = 0; o < cfg.orgs; ++o) {
    std::snprintf(buf, sizeof buf, "org-%03zu", o + 1);
    org_ids.emplace_back(buf);
    org_offsets.push_back(kOffsets[rng.below(kOffsets.size())]);
    auto adopted = adopt_start.plus_seconds(static_cast<long long>(rng.below(adopt_days)) * kDaySeconds);
    out.orgs.emplace(buf, adopted);
  }

  std::array<double, kCategoryCount> cat_weights{};
  for (std::size_t c = 0; c < kCategoryCount; ++c)
    cat_weights[c] = std::max(kCategoryCounts[c], cfg.rare_category_weight);

  std::vector<Incident> incidents;
  incidents.reserve(cfg.incidents);
  for (std::size_t i = 0; i < cfg.incidents; ++i) {
    Incident inc;
    std::snprintf(buf, sizeof buf, "syn-%06zu", i + 1);
    inc.incident_id = buf;
    const std::size_t org = rng.below(cfg.orgs);
    inc.org_id = org_ids[org];
    const Category cat = all_categories()[rng.weighted(cat_weights)];
    inc.category = TipCategory(cat);
    inc.anonymous = rng.bernoulli(cfg.anonymous_rate);

    const int offset = org_offsets[org];
    const long long day = static_cast<long long>(rng.below(window_days));
    const int hour = static_cast<int>(rng.weighted(kHourWeights));
    const long long in_hour = static_cast<long long>(rng.below(3600));
    const long long local_secs = day * kDaySeconds + hour * 3600LL + in_hour;
    inc.created_at = Timestamp(window_start.plus_seconds(local_secs - offset * 60LL).utc(), offset);

    const Timestamp adopted = out.orgs.at(inc.org_id);
    const double years =
        std::chrono::duration<double>(inc.created_at.utc() - adopted.utc()).count() /
        (365.25 * kDaySeconds);
    const bool supportive =
        rng.bernoulli(logistic(cfg.support_intercept + cfg.support_years_slope * years));
    const double p_neg = cat == Category::kMentalHealth ? cfg.mental_health_negative_rate
                                                        : cfg.negative_rate;
    auto neg_bank = cat == Category::kMentalHealth ? bank(Bank::kMentalHealthNegative)
                                                   : bank(Bank::kUserNegative);

    const std::size_t n =
        cfg.min_utterances + rng.below(cfg.max_utterances - cfg.min_utterances + 1);
    std::vector<Speaker> speakers{Speaker::kUser, Speaker::kDispatcher};
    while (speakers.size() < n) {
      const bool prev_user = speakers.back() == Speaker::kUser;
      const bool switch_side = rng.bernoulli(prev_user ? 0.8 : 0.85);
      speakers.push_back(switch_side == prev_user ? Speaker::kDispatcher : Speaker::kUser);
    }
    std::vector<std::size_t> dispatcher_idx;
    for (std::size_t u = 0; u < n; ++u)
      if (speakers[u] == Speaker::kDispatcher) dispatcher_idx.push_back(u);
    const std::size_t support_at =
        supportive ? dispatcher_idx[rng.below(dispatcher_idx.size())] : n;

    const auto stages = split_stages(n);
    Timestamp ts = inc.created_at;
    for (std::size_t u = 0; u < n; ++u) {
      Utterance utt;
      utt.speaker = speakers[u];
      if (u == 0) {
        utt.text = std::string(pick(rng, openers(cat)));
      } else if (utt.speaker == Speaker::kUser) {
        const double p_pos = cfg.positive_rate_initiation +
                             (cfg.positive_rate_elaboration - cfg.positive_rate_initiation) *
                                 stages[u] / 2.0;
        const double r = rng.uniform();
        if (r < p_neg) utt.text = std::string(pick(rng, neg_bank));
        else if (r < p_neg + (1.0 - p_neg) * p_pos) utt.text = std::string(pick(rng, bank(Bank::kUserPositive)));
        else utt.text = std::string(pick(rng, bank(Bank::kUserNeutral)));
      } else {
        utt.text = std::string(pick(rng, u == support_at ? bank(Bank::kDispatcherSupport)
                                                         : bank(Bank::kDispatcherNeutral)));
      }
      if (u > 0) ts = ts.plus_seconds(20 + static_cast<long long>(rng.below(240)));
      utt.ts = ts;
      inc.utterances.push_back(std::move(utt));
    }
    incidents.push_back(std::move(inc));
  }
  out.corpus = Corpus(std::move(incidents), Provenance{"synth:" + std::to_string(cfg.seed), {}});
  return out;
}

}  // namespace safechat::synth
