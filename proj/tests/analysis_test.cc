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

#include <cmath>
#include <set>
#include <sstream>

#include "safechat/analysis.h"
#include "safechat/error.h"
#include "safechat/synth.h"
#include "replication.h"
#include "test_util.h"

namespace safechat {
namespace {

std::string dump(const Corpus& c) {
  std::ostringstream os;
  write_corpus(c, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic corpora

TEST(Synth, SameSeedIsByteIdentical) {
  synth::SynthConfig cfg;
  cfg.seed = 9;
  cfg.incidents = 200;
  const auto a = synth::generate(cfg), b = synth::generate(cfg);
  EXPECT_EQ(dump(a.corpus), dump(b.corpus));
  EXPECT_EQ(a.orgs, b.orgs);
  cfg.seed = 10;
  EXPECT_NE(dump(synth::generate(cfg).corpus), dump(a.corpus));
}

TEST(Synth, RngFollowsStandardEngine) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
  synth::Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next();
  EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Synth, RngHelpersStayInRange) {
  synth::Rng rng(1);
  std::array<int, 7> hist{};
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++hist[k];
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  const std::vector<double> w = {0.0, 3.0, 1.0};
  std::array<int, 3> picks{};
  for (int i = 0; i < 40000; ++i) ++picks[rng.weighted(w)];
  EXPECT_EQ(picks[0], 0);
  EXPECT_NEAR(picks[1] / 40000.0, 0.75, 0.02);
}

TEST(Synth, BankSentencesCarryTheirLexiconLabel) {
  const auto& lex = LexiconClassifier::bundled();
  for (auto b : {synth::Bank::kUserNegative, synth::Bank::kMentalHealthNegative,
                 synth::Bank::kUserNeutral, synth::Bank::kUserPositive,
                 synth::Bank::kDispatcherSupport, synth::Bank::kDispatcherNeutral}) {
    ASSERT_FALSE(synth::bank(b).empty());
    for (const auto& s : synth::bank(b)) {
      EXPECT_EQ(lex.classify(s.text).emotion, s.label) << s.text;
    }
  }
  for (Category c : all_categories()) {
    for (const auto& s : synth::openers(c)) {
      EXPECT_EQ(lex.classify(s.text).emotion, Emotion::kNeutral) << s.text;
    }
  }
  const auto mapping = SentimentMapping::standard();
  for (const auto& s : synth::bank(synth::Bank::kUserNegative)) {
    EXPECT_EQ(mapping.sign(s.label), -1) << s.text;
  }
  for (const auto& s : synth::bank(synth::Bank::kDispatcherSupport)) {
    EXPECT_TRUE(detect_emotional_support(s.label).is_support) << s.text;
  }
  for (const auto& s : synth::bank(synth::Bank::kDispatcherNeutral)) {
    EXPECT_FALSE(detect_emotional_support(s.label).is_support) << s.text;
  }
}

TEST(Synth, PassesIngestUntouched) {
  synth::SynthConfig cfg;
  cfg.incidents = 300;
  const auto s = synth::generate(cfg);
  const auto cleaned = clean_corpus(s.corpus, CleaningConfig{});
  EXPECT_EQ(cleaned.report.kept, 300u);
  EXPECT_EQ(cleaned.report.removed_total(), 0u);
  std::istringstream in(dump(s.corpus));
  EXPECT_EQ(parse_corpus(in), s.corpus);
  std::set<std::string> orgs;
  for (const auto& inc : s.corpus.incidents()) {
    orgs.insert(inc.org_id);
    EXPECT_EQ(inc.utterances.front().speaker, Speaker::kUser);
    EXPECT_GE(inc.utterances.size(), cfg.min_utterances);
    EXPECT_LE(inc.utterances.size(), cfg.max_utterances);
    EXPECT_TRUE(s.orgs.count(inc.org_id));
  }
  EXPECT_LE(orgs.size(), cfg.orgs);
}

TEST(Synth, RejectsBadConfig) {
  synth::SynthConfig cfg;
  cfg.incidents = 0;
  EXPECT_THROW(synth::generate(cfg), ValidationError);
  cfg.incidents = 10;
  cfg.min_utterances = 2;
  EXPECT_THROW(synth::generate(cfg), ValidationError);
}

// ---------------------------------------------------------------------------
// Features

TEST(Features, HandBuiltIncidents) {
  const Timestamp t0 = Timestamp::from_civil(2019, 5, 1, 21, 14);
  const Timestamp t1 = Timestamp::from_civil(2019, 5, 2, 5, 0);
  const Corpus corpus({testing::incident("a", {"help", "I'm so sorry", "scared"},
                                          Category::kMentalHealth, t0),
                       testing::incident("b", {"noise", "ok"}, Category::kNoiseDisturbance, t1),
                       [&] {
                         Incident inc = testing::incident("c", {"x", "y"}, Category::kHazard, t1);
                         inc.org_id = "org-2";
                         inc.utterances = {testing::dispatcher("hello")};
                         return inc;
                       }()});
  CorpusLabels labels = {
      {{Emotion::kNeutral, 1}, {Emotion::kCaring, 1}, {Emotion::kFear, 1}},
      {{Emotion::kAnger, 1}, {Emotion::kNeutral, 1}},
      {{Emotion::kNeutral, 1}}};
  analysis::OrgTable orgs = {{"org-1", Timestamp::from_civil(2017, 5, 1, 21, 14)}};
  const auto f = analysis::incident_features(corpus, labels, SentimentMapping::standard(),
                                             SupportSet::standard(), &orgs);
  ASSERT_EQ(f.size(), 3u);
  // e^2 / (e + e^2) of the two user turns is negative.
  const double e = std::exp(1.0);
  ASSERT_TRUE(f[0].polarity.has_value());
  EXPECT_NEAR(*f[0].polarity, -e * e / (e + e * e), 1e-12);
  EXPECT_TRUE(f[0].support);
  EXPECT_EQ(f[0].time_of_day, "8 p.m. - 12 a.m.");
  EXPECT_EQ(f[0].hour, 21);
  EXPECT_DOUBLE_EQ(f[0].chat_length, 3.0);
  EXPECT_NEAR(f[0].years_in_use, 730.0 / 365.25, 1e-9);
  EXPECT_DOUBLE_EQ(f[0].tips_per_year, 2.0);  // corpus spans under one year
  EXPECT_DOUBLE_EQ(*f[1].polarity, -1.0);
  EXPECT_FALSE(f[1].support);
  EXPECT_EQ(f[1].time_of_day, "4 a.m. - 8 a.m.");
  // org-2 has no adoption date: first seen in the corpus.
  EXPECT_DOUBLE_EQ(f[2].years_in_use, 0.0);
  EXPECT_FALSE(f[2].polarity.has_value());

  const auto records = analysis::to_records(f);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(std::get<double>(records[1].at("negativity")), 1.0);
  EXPECT_EQ(std::get<std::string>(records[0].at("org_id")), "org-1");

  labels.pop_back();
  EXPECT_THROW(analysis::incident_features(corpus, labels, SentimentMapping::standard()),
               ValidationError);
}

TEST(Features, OrgTableRoundTrip) {
  const analysis::OrgTable orgs = {{"org-1", Timestamp::from_civil(2015, 2, 3)},
                                   {"org-2", Timestamp::from_civil(2016, 7, 9, 8)}};
  std::ostringstream os;
  analysis::write_orgs(orgs, os);
  std::istringstream in(os.str());
  EXPECT_EQ(analysis::parse_orgs(in), orgs);
  std::istringstream dup(os.str() + os.str());
  EXPECT_THROW(analysis::parse_orgs(dup), ParseError);
  std::istringstream bad("{\"org_id\":\"x\",\"adopted_at\":\"yesterday\"}\n");
  EXPECT_THROW(analysis::parse_orgs(bad), ParseError);
}

TEST(Models, SpecsNestAsDocumented) {
  auto names = [](const stats::DesignSpec& s) {
    std::vector<std::string> out;
    for (const auto& c : s.covariates) out.push_back(c.field);
    return out;
  };
  using V = std::vector<std::string>;
  EXPECT_EQ(names(analysis::negativity_spec(1)),
            (V{"category", "anonymous", "time_of_day", "chat_length"}));
  EXPECT_EQ(names(analysis::negativity_spec(3)),
            (V{"category", "anonymous", "time_of_day", "chat_length", "years_in_use",
               "tips_per_year"}));
  EXPECT_EQ(names(analysis::support_spec(2)),
            (V{"category", "anonymous", "time_of_day", "years_in_use", "tips_per_year"}));
  EXPECT_EQ(names(analysis::support_spec(3)).back(), "polarity");
  EXPECT_EQ(analysis::support_spec(1).cluster_field, "org_id");
  EXPECT_THROW(analysis::negativity_spec(4), ValidationError);
}

TEST(Models, PlantedEffectsRecoveredForSeed42) {
  const auto r = testing::run_replication(42);
  EXPECT_EQ(r.kept, r.input);
  EXPECT_GT(r.mental_health_negativity.coefficient, 0.0);
  EXPECT_LT(r.mental_health_negativity.p_value, 0.05);
  EXPECT_LT(r.years_support.coefficient, 0.0);
  EXPECT_LT(r.years_support.p_value, 0.05);
}

TEST(Models, NullEffectsAreNotPlanted) {
  // With both planted effects switched off the signs should not be recovered
  // systematically.
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    synth::SynthConfig cfg;
    cfg.seed = seed;
    cfg.mental_health_negative_rate = cfg.negative_rate;
    cfg.support_years_slope = 0.0;
    const auto s = synth::generate(cfg);
    const auto labels = annotate_corpus(s.corpus, LexiconClassifier::bundled());
    const auto f = analysis::incident_features(s.corpus, labels, SentimentMapping::standard(),
                                               SupportSet::standard(), &s.orgs);
    const auto rec = analysis::to_records(f);
    testing::ReplicationRun r;
    r.mental_health_negativity =
        testing::term_effect(analysis::fit_negativity(rec, 3), "category[Mental Health]");
    r.years_support = testing::term_effect(analysis::fit_support(rec, 3), "years_in_use");
    recovered += testing::recovered(r);
  }
  EXPECT_LE(recovered, 2);
}

TEST(Models, InTextTestsRun) {
  synth::SynthConfig cfg;
  cfg.seed = 3;
  const auto s = synth::generate(cfg);
  const auto labels = annotate_corpus(s.corpus, LexiconClassifier::bundled());
  const auto mapping = SentimentMapping::standard();
  const auto f = analysis::incident_features(s.corpus, labels, mapping, SupportSet::standard(), &s.orgs);
  const auto tests = analysis::in_text_tests(s.corpus, labels, mapping, f);
  std::vector<std::string> names;
  for (const auto& t : tests) names.push_back(t.name);
  EXPECT_EQ(names, (std::vector<std::string>{"negativity_by_category", "stage_by_sentiment",
                                             "positive_share_initiation_vs_elaboration",
                                             "category_by_time_of_day"}));
  // Positive share is planted to grow from the first to the last stage.
  EXPECT_LT(tests[2].result.statistic, 0.0);
  EXPECT_LT(tests[2].result.p_value, 0.05);
  EXPECT_LT(tests[0].result.p_value, 0.05);
  const std::string csv = analysis::tests_csv(tests);
  EXPECT_TRUE(csv.starts_with("test,kind,statistic,df1,df2,p_value\n"));
}

}  // namespace
}  // namespace safechat
