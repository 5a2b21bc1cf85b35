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

// Response similarity metrics, human-vs-model support rate tables and the
// hourly consistency comparison.

#ifndef SAFECHAT_EVAL_H_
#define SAFECHAT_EVAL_H_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safechat/corpus.h"
#include "safechat/emotion.h"
#include "safechat/stats.h"

namespace safechat::eval {

enum class Metric { kRougeL, kRouge1, kRouge2, kEmbedSim };
std::string_view metric_name(Metric m);

struct SimilarityScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Metric metric = Metric::kRougeL;
  bool empty_input = false;  // one side had no tokens
};

// Harmonic mean, 0 when both are 0.
double f1_score(double precision, double recall);

// Longest common subsequence over lowercase word tokens.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
SimilarityScore rouge_l(std::string_view candidate, std::string_view reference);
// Clipped n-gram overlap, n = 1 or 2.
SimilarityScore rouge_n(std::string_view candidate, std::string_view reference, int n);

// Maps tokens to unit-norm vectors. Implementations must be deterministic
// and safe to call concurrently.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> tokens) const = 0;
};

// Character trigrams of "<token>" hashed (FNV-1a) into `dim` buckets, counted
// and L2-normalized.
class HashedTrigramEmbedder : public TokenEmbedder {
 public:
  explicit HashedTrigramEmbedder(std::size_t dim = 512);
  static const HashedTrigramEmbedder& standard();

  std::vector<double> embed_token(std::string_view token) const;
  std::vector<std::vector<double>> embed(std::span<const std::string> tokens) const override;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

// Greedy matching: precision averages, over candidate tokens, the best cosine
// against any reference token; recall is the mirror image.
SimilarityScore embed_similarity(std::string_view candidate, std::string_view reference,
                                 const TokenEmbedder& embedder = HashedTrigramEmbedder::standard());

// ---------------------------------------------------------------------------
// Support rates

// Flagged share. Throws ValidationError on empty input.
double support_rate(std::span<const SupportFlag> flags);

enum class GroupBy { kCategory, kHour };
std::string_view group_by_name(GroupBy g);
std::optional<GroupBy> parse_group_by(std::string_view name);

// Label for a local hour: "00".."23".
std::string hour_label(int hour);

// One human dispatcher turn and the model's reply for the same turn.
struct SupportPair {
  std::string category;
  int hour = 0;  // incident-local hour of created_at
  bool human = false;
  bool model = false;
};

struct SupportRateRow {
  std::string group;
  std::size_t n = 0;
  double human_rate = 0.0;
  double model_rate = 0.0;
  std::optional<double> t_statistic;
  std::optional<double> p_value;  // absent below min_n or when degenerate
};

struct SupportRateTable {
  GroupBy group_by = GroupBy::kCategory;
  std::vector<SupportRateRow> rows;  // observed groups, sorted by label
  SupportRateRow total;              // group "Total"
};

// Rates per group with paired t-tests on the per-turn indicators.
SupportRateTable compare_support(std::span<const SupportPair> pairs, GroupBy group_by,
                                 std::size_t min_n = 5);

// Model output keyed to a human dispatcher turn: utterance index within the
// incident.
struct ModelOutput {
  std::string incident_id;
  std::size_t turn_index = 0;
  std::string text;

  bool operator==(const ModelOutput&) const = default;
};

// {"incident_id": "...", "turn_index": 3, "text": "..."} per line.
std::vector<ModelOutput> parse_model_outputs(std::istream& in);
std::vector<ModelOutput> load_model_outputs(const std::string& path);
void write_model_outputs(std::span<const ModelOutput> outputs, std::ostream& out);

struct AlignedTurn {
  const Incident* incident = nullptr;
  std::size_t turn_index = 0;
  const std::string* human_text = nullptr;
  const std::string* model_text = nullptr;
};

// Pairs every dispatcher utterance with exactly one model output. Throws
// ValidationError on a missing, duplicate or non-dispatcher entry.
std::vector<AlignedTurn> align_outputs(const Corpus& corpus, std::span<const ModelOutput> model);

std::vector<SupportPair> support_pairs(std::span<const AlignedTurn> aligned,
                                       const EmotionClassifier& classifier,
                                       const SupportSet& support = SupportSet::standard());

SupportRateTable compare_support(const Corpus& human, std::span<const ModelOutput> model,
                                 GroupBy group_by, const EmotionClassifier& classifier,
                                 const SupportSet& support = SupportSet::standard(),
                                 std::size_t min_n = 5);

std::string support_table_csv(const SupportRateTable& table);
// Fixed-width rendering with rates as percentages to two decimals.
std::string render_support_table(const SupportRateTable& table);

// ---------------------------------------------------------------------------
// Temporal consistency

struct Dispersion {
  std::size_t hours = 0;
  double mean = 0.0;
  double sd = 0.0;
  double mean_abs_deviation = 0.0;
};

Dispersion dispersion(std::span<const double> rates);

struct TemporalConsistency {
  stats::TestResult levene;
  Dispersion human;
  Dispersion model;
};

// Hourly rates of each system over the hours where it was observed.
using HourlyRates = std::array<std::optional<double>, 24>;
std::pair<HourlyRates, HourlyRates> hourly_rates(std::span<const SupportPair> pairs);

// Levene test between the two systems' hourly rate profiles.
TemporalConsistency temporal_consistency(std::span<const double> human_rates,
                                         std::span<const double> model_rates);
TemporalConsistency temporal_consistency(const HourlyRates& human, const HourlyRates& model);

// ---------------------------------------------------------------------------
// Similarity tables

struct SimilarityRow {
  std::string group;
  std::size_t n = 0;
  double rouge_l_f1 = 0.0;
  double embed_f1 = 0.0;
};

// Mean F1 per category plus a trailing "Total" row.
std::vector<SimilarityRow> similarity_by_category(std::span<const AlignedTurn> aligned,
                                                  const TokenEmbedder& embedder =
                                                      HashedTrigramEmbedder::standard());
std::string similarity_table_csv(std::span<const SimilarityRow> rows);

}  // namespace safechat::eval

#endif  // SAFECHAT_EVAL_H_
