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

#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "safechat/error.h"
#include "safechat/eval.h"
#include "stats_oracle.h"
#include "test_util.h"

namespace safechat::eval {
namespace {

// ---------------------------------------------------------------------------
// ROUGE

TEST(Rouge, WorkedExample) {
  const auto s = rouge_l("the cat sat", "the cat ate");
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  EXPECT_FALSE(s.empty_input);
}

TEST(Rouge, IdentityAndDisjoint) {
  EXPECT_DOUBLE_EQ(rouge_l("Officers are on the way", "officers are on the way").f1, 1.0);
  EXPECT_DOUBLE_EQ(rouge_l("alpha beta", "gamma delta").f1, 0.0);
}

TEST(Rouge, EmptySideIsFlagged) {
  const auto s = rouge_l("", "the cat");
  EXPECT_TRUE(s.empty_input);
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_TRUE(rouge_l("the cat", "  ?! ").empty_input);
}

TEST(Rouge, UnequalLengths) {
  // LCS("a b c d", "a c") = 2.
  const auto s = rouge_l("a b c d", "a c");
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
}

TEST(Rouge, NGramVariants) {
  const auto r1 = rouge_n("the the cat", "the cat", 1);
  EXPECT_DOUBLE_EQ(r1.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r1.recall, 1.0);
  const auto r2 = rouge_n("the cat sat", "the cat ate", 2);
  EXPECT_DOUBLE_EQ(r2.precision, 0.5);
  EXPECT_THROW(rouge_n("a", "a", 3), ValidationError);
}

// Exponential-time LCS over all subsequences of the shorter side.
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << a.size()); ++mask) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j, ++len;
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

TEST(Rouge, RandomPairProperties) {
  std::mt19937_64 rng(29);
  const std::vector<std::string> vocab = {"the", "Cat", "sat", "on", "mat", "dog", "RAN", "a"};
  auto sentence = [&](std::size_t max_len) {
    std::vector<std::string> w;
    const std::size_t n = 1 + rng() % max_len;
    for (std::size_t i = 0; i < n; ++i) w.push_back(vocab[rng() % vocab.size()]);
    return w;
  };
  auto join = [](const std::vector<std::string>& w) {
    std::string s;
    for (const auto& x : w) s += x + " ";
    return s;
  };
  auto lower = [](std::vector<std::string> w) {
    for (auto& x : w)
      for (auto& c : x) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return w;
  };
  auto upper = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = sentence(10), b = sentence(10);
    const auto s = rouge_l(join(a), join(b));
    EXPECT_GE(s.precision, 0.0);
    EXPECT_LE(s.precision, 1.0);
    EXPECT_GE(s.recall, 0.0);
    EXPECT_LE(s.recall, 1.0);
    EXPECT_GE(s.f1, 0.0);
    EXPECT_LE(s.f1, 1.0);
    const double lcs = static_cast<double>(brute_lcs(lower(a), lower(b)));
    EXPECT_DOUBLE_EQ(s.precision, lcs / static_cast<double>(a.size()));
    EXPECT_DOUBLE_EQ(s.recall, lcs / static_cast<double>(b.size()));
    // Swapping sides swaps precision and recall and keeps F1.
    const auto t = rouge_l(join(b), join(a));
    EXPECT_DOUBLE_EQ(t.precision, s.recall);
    EXPECT_DOUBLE_EQ(t.f1, s.f1);
    EXPECT_DOUBLE_EQ(rouge_l(join(a), join(a)).f1, 1.0);
    EXPECT_DOUBLE_EQ(rouge_l(upper(join(a)), join(b)).f1, s.f1);
    // Extending the reference only changes precision through the LCS.
    const auto ext = rouge_l(join(a), join(b) + " zebra");
    EXPECT_DOUBLE_EQ(ext.precision, s.precision);
  }
}

// ---------------------------------------------------------------------------
// Embedding similarity

// Independent trigram vectors: sparse bucket counts from a separate FNV-1a.
std::map<std::size_t, double> oracle_vector(const std::string& token, std::size_t dim) {
  const std::string padded = "<" + token + ">";
  std::map<std::size_t, double> v;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t k = i; k < i + 3; ++k) {
      h ^= static_cast<unsigned char>(padded[k]);
      h *= 0x100000001b3ull;
    }
    v[h % dim] += 1.0;
  }
  return v;
}

double oracle_cosine(const std::string& a, const std::string& b, std::size_t dim) {
  const auto va = oracle_vector(a, dim), vb = oracle_vector(b, dim);
  long double dot = 0, na = 0, nb = 0;
  for (const auto& [k, x] : va) {
    na += x * x;
    if (vb.count(k)) dot += x * vb.at(k);
  }
  for (const auto& [_, x] : vb) nb += x * x;
  return static_cast<double>(dot / std::sqrt(na * nb));
}

TEST(Embed, TwoTokenPairMatchesBruteForce) {
  const std::vector<std::string> c = {"stolen", "bike"}, r = {"bicycle", "stole"};
  const std::size_t dim = 512;
  double p = 0, rc = 0;
  for (const auto& x : c) {
    double best = -1;
    for (const auto& y : r) best = std::max(best, oracle_cosine(x, y, dim));
    p += best / 2;
  }
  for (const auto& y : r) {
    double best = -1;
    for (const auto& x : c) best = std::max(best, oracle_cosine(y, x, dim));
    rc += best / 2;
  }
  const auto s = embed_similarity("Stolen bike", "bicycle stole");
  EXPECT_NEAR(s.precision, p, 1e-9);
  EXPECT_NEAR(s.recall, rc, 1e-9);
  EXPECT_NEAR(s.f1, 2 * p * rc / (p + rc), 1e-9);
  EXPECT_GT(s.f1, 0.0);
  EXPECT_LT(s.f1, 1.0);
}

TEST(Embed, UnitNormAndDeterministic) {
  const auto& e = HashedTrigramEmbedder::standard();
  for (const std::string t : {"a", "dispatcher", "[location]", "###"}) {
    const auto v = e.embed_token(t);
    double n = 0;
    for (double x : v) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(v, e.embed_token(t));
  }
  EXPECT_THROW(HashedTrigramEmbedder(0), ValidationError);
}

TEST(Embed, IdentitySymmetryBounds) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> vocab = {"help", "helping", "car", "cart", "stolen", "stole", "x"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string a, b;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) a += vocab[rng() % vocab.size()] + " ";
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) b += vocab[rng() % vocab.size()] + " ";
    const auto ab = embed_similarity(a, b), ba = embed_similarity(b, a);
    EXPECT_NEAR(ab.f1, ba.f1, 1e-12);
    EXPECT_GE(ab.f1, 0.0);
    EXPECT_LE(ab.f1, 1.0);
    EXPECT_NEAR(embed_similarity(a, a).f1, 1.0, 1e-12);
  }
  EXPECT_TRUE(embed_similarity("", "x").empty_input);
}

// ---------------------------------------------------------------------------
// Support rates

SupportFlag flag(bool on) { return {on, on ? Emotion::kCaring : Emotion::kNeutral}; }

TEST(Support, Rate) {
  const std::vector<SupportFlag> half = {flag(true), flag(false), flag(true), flag(false)};
  EXPECT_DOUBLE_EQ(support_rate(half), 0.5);
  const std::vector<SupportFlag> none = {flag(false), flag(false)};
  EXPECT_DOUBLE_EQ(support_rate(none), 0.0);
  EXPECT_THROW(support_rate(std::span<const SupportFlag>{}), ValidationError);
}

TEST(Support, IdenticalSystemsHaveNoPValue) {
  std::vector<SupportPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({"Noise Disturbance", i % 24, i % 3 == 0, i % 3 == 0});
  const auto t = compare_support(pairs, GroupBy::kCategory);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(t.rows[0].human_rate, t.rows[0].model_rate);
  EXPECT_FALSE(t.rows[0].p_value.has_value());
  EXPECT_FALSE(t.total.p_value.has_value());
}

TEST(Support, AlwaysVersusNever) {
  std::vector<SupportPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back({"Hazard", 3, false, true});
  const auto t = compare_support(pairs, GroupBy::kCategory);
  EXPECT_DOUBLE_EQ(t.total.human_rate, 0.0);
  EXPECT_DOUBLE_EQ(t.total.model_rate, 1.0);
}

TEST(Support, PairedTestMatchesOracleAndMinN) {
  std::vector<SupportPair> pairs;
  const std::vector<int> h = {1, 0, 0, 1, 0, 0, 1, 0}, m = {1, 1, 0, 1, 1, 0, 1, 1};
  for (std::size_t i = 0; i < h.size(); ++i) pairs.push_back({"A", 1, h[i] == 1, m[i] == 1});
  pairs.push_back({"B", 2, true, false});
  const auto t = compare_support(pairs, GroupBy::kCategory, 5);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].group, "A");
  const std::vector<double> hd(h.begin(), h.end()), md(m.begin(), m.end());
  const auto o = stats::oracle::paired(hd, md);
  ASSERT_TRUE(t.rows[0].p_value.has_value());
  EXPECT_NEAR(*t.rows[0].t_statistic, o.statistic, 1e-9);
  EXPECT_NEAR(*t.rows[0].p_value, o.p_value, 1e-9);
  EXPECT_EQ(t.rows[1].n, 1u);
  EXPECT_FALSE(t.rows[1].p_value.has_value());
  EXPECT_EQ(t.total.n, 9u);
}

TEST(Support, RatesEqualRecount) {
  std::mt19937_64 rng(37);
  const std::vector<std::string> cats = {"Hazard", "Noise Disturbance", "Mental Health"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SupportPair> pairs;
    for (std::size_t i = 0, n = 1 + rng() % 60; i < n; ++i) {
      pairs.push_back({cats[rng() % 3], static_cast<int>(rng() % 24), rng() % 4 == 0, rng() % 3 == 0});
    }
    for (GroupBy g : {GroupBy::kCategory, GroupBy::kHour}) {
      const auto t = compare_support(pairs, g);
      std::size_t total = 0;
      for (const auto& row : t.rows) {
        std::size_t n = 0, hk = 0, mk = 0;
        for (const auto& p : pairs) {
          const std::string key = g == GroupBy::kCategory ? p.category : hour_label(p.hour);
          if (key != row.group) continue;
          ++n;
          hk += p.human;
          mk += p.model;
        }
        EXPECT_EQ(row.n, n);
        EXPECT_DOUBLE_EQ(row.human_rate, static_cast<double>(hk) / static_cast<double>(n));
        EXPECT_DOUBLE_EQ(row.model_rate, static_cast<double>(mk) / static_cast<double>(n));
        total += n;
      }
      EXPECT_EQ(total, pairs.size());
      EXPECT_EQ(t.total.n, pairs.size());
    }
  }
}

TEST(Support, TableRendersOverallRates) {
  // 74 / 2500 = 2.96% and 112 / 2500 = 4.48%.
  std::vector<SupportPair> pairs;
  for (int i = 0; i < 2500; ++i) pairs.push_back({"Total fixture", 0, i < 74, i >= 1000 && i < 1112});
  const auto table = compare_support(pairs, GroupBy::kCategory);
  const std::string out = render_support_table(table);
  std::istringstream lines(out);
  std::string line, last;
  while (std::getline(lines, line)) last = line;
  EXPECT_TRUE(last.starts_with("Total")) << out;
  EXPECT_NE(last.find("| 2.96"), std::string::npos) << out;
  EXPECT_NE(last.find("| 4.48"), std::string::npos) << out;
  EXPECT_TRUE(out.starts_with("category")) << out;
  const std::string csv = support_table_csv(table);
  EXPECT_TRUE(csv.starts_with("category,n,human_rate,model_rate,t,p_value\n"));
  EXPECT_NE(csv.find("Total,2500,0.0296,0.0448,"), std::string::npos) << csv;
}

class KeywordClassifier : public EmotionClassifier {
 public:
  std::vector<EmotionLabel> classify_batch(std::span<const std::string> texts) const override {
    std::vector<EmotionLabel> out;
    for (const auto& t : texts) {
      out.push_back({t.find("sorry") != std::string::npos ? Emotion::kCaring : Emotion::kNeutral, 1});
    }
    return out;
  }
};

TEST(Support, FromCorpusAndModelOutputs) {
  const Corpus corpus({testing::incident("a", {"help", "ok", "more", "sorry to hear"}),
                       testing::incident("b", {"noise", "which room?"}, Category::kHazard)});
  std::vector<ModelOutput> model = {
      {"a", 1, "I'm so sorry"}, {"a", 3, "stay safe"}, {"b", 1, "sorry about that"}};
  const auto table = compare_support(corpus, model, GroupBy::kCategory, KeywordClassifier{});
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].group, "Hazard");
  EXPECT_DOUBLE_EQ(table.rows[0].human_rate, 0.0);
  EXPECT_DOUBLE_EQ(table.rows[0].model_rate, 1.0);
  EXPECT_DOUBLE_EQ(table.rows[1].human_rate, 0.5);
  EXPECT_DOUBLE_EQ(table.rows[1].model_rate, 0.5);

  const auto hour = compare_support(corpus, model, GroupBy::kHour, KeywordClassifier{});
  ASSERT_EQ(hour.rows.size(), 1u);
  EXPECT_EQ(hour.rows[0].group, hour_label(corpus.incidents()[0].created_at.local_hour()));

  model.pop_back();
  EXPECT_THROW(compare_support(corpus, model, GroupBy::kCategory, KeywordClassifier{}),
               ValidationError);
  model.push_back({"b", 0, "user turn"});
  EXPECT_THROW(align_outputs(corpus, model), ValidationError);
  model.back() = {"a", 1, "dup"};
  EXPECT_THROW(align_outputs(corpus, model), ValidationError);
}

TEST(ModelOutputs, JsonlRoundTrip) {
  const std::vector<ModelOutput> outputs = {{"a", 1, "line \"one\"\nnext"}, {"b", 7, ""}};
  std::ostringstream os;
  write_model_outputs(outputs, os);
  std::istringstream in(os.str());
  EXPECT_EQ(parse_model_outputs(in), outputs);
  std::istringstream bad("{\"incident_id\":\"a\",\"turn_index\":-1,\"text\":\"x\"}\n");
  EXPECT_THROW(parse_model_outputs(bad), ParseError);
}

// ---------------------------------------------------------------------------
// Temporal consistency

TEST(Temporal, IdenticalProfilesGiveZero) {
  const std::vector<double> h = {0.1, 0.3, 0.2, 0.5};
  const auto r = temporal_consistency(h, h);
  EXPECT_NEAR(r.levene.statistic, 0.0, 1e-12);
}

TEST(Temporal, ConstantModelIsLessDispersed) {
  std::vector<double> human, model;
  for (int i = 0; i < 24; ++i) {
    human.push_back(i % 2 == 0 ? 0.0 : 0.2);
    model.push_back(0.05);
  }
  const auto r = temporal_consistency(human, model);
  EXPECT_LT(r.model.sd, r.human.sd);
  EXPECT_LT(r.model.mean_abs_deviation, r.human.mean_abs_deviation);
  EXPECT_EQ(r.human.hours, 24u);
}

TEST(Temporal, MatchesBruteForceLevene) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> h, m;
    for (std::size_t i = 0, n = 2 + rng() % 22; i < n; ++i) h.push_back(u(rng));
    for (std::size_t i = 0, n = 2 + rng() % 22; i < n; ++i) m.push_back(u(rng) * 0.3);
    const auto r = temporal_consistency(h, m);
    const auto o = stats::oracle::levene({h, m});
    EXPECT_NEAR(r.levene.statistic, o.statistic, 1e-9);
    EXPECT_NEAR(r.levene.p_value, o.p_value, 1e-9);
  }
  EXPECT_THROW(temporal_consistency(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}),
               ValidationError);
}

TEST(Temporal, HourlyRatesFromPairs) {
  const std::vector<SupportPair> pairs = {
      {"A", 0, true, false}, {"A", 0, false, false}, {"A", 5, true, true}};
  const auto [h, m] = hourly_rates(pairs);
  EXPECT_DOUBLE_EQ(*h[0], 0.5);
  EXPECT_DOUBLE_EQ(*m[0], 0.0);
  EXPECT_DOUBLE_EQ(*h[5], 1.0);
  EXPECT_FALSE(h[1].has_value());
  const std::vector<SupportPair> bad = {{"A", 24, true, true}};
  EXPECT_THROW(hourly_rates(bad), ValidationError);
}

// ---------------------------------------------------------------------------
// Similarity tables

TEST(Similarity, ByCategoryAveragesAndTotals) {
  const Corpus corpus({testing::incident("a", {"help", "the cat sat"}),
                       testing::incident("b", {"noise", "officers are coming"}, Category::kHazard)});
  const std::vector<ModelOutput> model = {{"a", 1, "the cat ate"}, {"b", 1, "officers are coming"}};
  const auto aligned = align_outputs(corpus, model);
  const auto rows = similarity_by_category(aligned);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].group, "Hazard");
  EXPECT_DOUBLE_EQ(rows[0].rouge_l_f1, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].rouge_l_f1, 2.0 / 3.0);
  EXPECT_EQ(rows[2].group, "Total");
  EXPECT_DOUBLE_EQ(rows[2].rouge_l_f1, (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_EQ(rows[2].n, 2u);
  EXPECT_TRUE(similarity_table_csv(rows).starts_with("category,n,rouge_l_f1,embed_sim_f1\n"));
}

}  // namespace
}  // namespace safechat::eval
