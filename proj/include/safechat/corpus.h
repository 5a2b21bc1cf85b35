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

// Chat-log data model, the newline-delimited JSON corpus format and the
// cleaning pipeline applied before any analysis.

#ifndef SAFECHAT_CORPUS_H_
#define SAFECHAT_CORPUS_H_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "safechat/timestamp.h"

namespace safechat {

enum class Speaker { kUser, kDispatcher };

std::string_view speaker_name(Speaker s);  // "user" | "dispatcher"
std::optional<Speaker> parse_speaker(std::string_view s);

struct Utterance {
  Speaker speaker = Speaker::kUser;
  // Masking tags ([LOCATION], [PERSON], ...) and '#' digit masks are kept
  // verbatim.
  std::string text;
  Timestamp ts;

  bool operator==(const Utterance&) const = default;
};

// The analyzed tip categories.
enum class Category {
  kNoiseDisturbance,
  kSuspiciousActivity,
  kEmergencyMessage,
  kDrugsAlcohol,
  kFacilitiesMaintenance,
  kHarassmentAbuse,
  kAccidentTrafficParking,
  kTheftLostItem,
  kMentalHealth,
  kVandalismDamage,
  kMisconduct,
  kHazard,
  kInjuryMedical,
  kSupportServices,
  kSuspiciousUnattendedPackage,
  kThreatVerbalAbuse,
  kUnauthorizedVisitor,
  kContactMallCorporatePropertySecurity,
};

inline constexpr std::size_t kCategoryCount = 18;
const std::array<Category, kCategoryCount>& all_categories();
std::string_view category_name(Category c);

// A Category or, for any other name, Excluded(name). Parsing never remaps an
// unknown name onto an analyzed category; matching ignores case and the
// spacing around '/' ("Theft / Lost Item" == "Theft/Lost Item").
class TipCategory {
 public:
  explicit TipCategory(Category c) : category_(c) {}
  static TipCategory excluded(std::string name);
  static TipCategory parse(std::string_view name);

  bool is_excluded() const { return !category_.has_value(); }
  // Precondition: !is_excluded().
  Category category() const { return *category_; }
  // Canonical name for analyzed categories, the raw name otherwise.
  std::string name() const;

  bool operator==(const TipCategory&) const = default;

 private:
  TipCategory() = default;
  std::optional<Category> category_;
  std::string excluded_name_;
};

// Normalized comparison key used for category names and blacklists.
std::string category_key(std::string_view name);

struct Incident {
  std::string incident_id;
  std::string org_id;
  TipCategory category{Category::kSuspiciousActivity};
  bool anonymous = false;
  Timestamp created_at;
  std::vector<Utterance> utterances;  // non-decreasing by ts

  std::size_t count(Speaker s) const;
  bool operator==(const Incident&) const = default;
};

struct Provenance {
  std::string source;
  Timestamp ingested_at;
};

// Immutable collection of incidents with counters derived at construction.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Incident> incidents, Provenance provenance = {});

  const std::vector<Incident>& incidents() const { return incidents_; }
  const Provenance& provenance() const { return provenance_; }
  std::size_t incident_count() const { return incidents_.size(); }
  std::size_t utterance_count() const { return utterances_; }
  std::size_t user_utterance_count() const { return users_; }
  std::size_t dispatcher_utterance_count() const { return dispatchers_; }
  bool empty() const { return incidents_.empty(); }

  // Incidents compare equal; provenance is metadata and is not compared.
  bool operator==(const Corpus& other) const {
    return incidents_ == other.incidents_;
  }

 private:
  std::vector<Incident> incidents_;
  Provenance provenance_;
  std::size_t utterances_ = 0;
  std::size_t users_ = 0;
  std::size_t dispatchers_ = 0;
};

// Reads newline-delimited JSON incident records. Blank lines are skipped.
// Throws ParseError (1-based line number and offending field) on a malformed
// record and on a duplicate incident_id.
Corpus parse_corpus(std::istream& in, std::string source = "<stream>");
Corpus load_corpus(const std::string& path);

// One record per line, keys in schema order, incidents in stored order.
void write_corpus(const Corpus& corpus, std::ostream& out);
std::string serialize_incident(const Incident& incident);
Incident parse_incident(std::string_view json_line, std::size_t line_no = 1);

// ---------------------------------------------------------------------------
// Language filter

class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  // Returns "en" or "other".
  virtual std::string detect(std::string_view text) const = 0;
};

// English if the fraction of stopword tokens is at least `threshold`. Texts
// with fewer than three countable tokens are kept as English. Masking tags
// and digit masks are language-neutral and not counted.
class StopwordLanguageDetector : public LanguageDetector {
 public:
  explicit StopwordLanguageDetector(double threshold = 0.15);
  std::string detect(std::string_view text) const override;
  double threshold() const { return threshold_; }

 private:
  double threshold_;
  std::shared_ptr<const std::vector<std::string>> stopwords_;  // sorted
};

std::string detect_language(std::string_view text, double threshold = 0.15);

// ---------------------------------------------------------------------------
// Cleaning

struct CleaningConfig {
  std::vector<std::string> excluded_categories = default_excluded_categories();
  Timestamp date_min = Timestamp::from_civil(2018, 1, 1);
  // Inclusive bounds. Dates given as YYYY-MM-DD in a config file expand to
  // the start (date_min) or the last millisecond (date_max) of that day.
  Timestamp date_max = *Timestamp::parse("2019-12-31T23:59:59.999Z");
  // Incidents need strictly more than this many utterances.
  std::size_t min_utterances = 2;
  bool filter_language = true;
  double stopword_threshold = 0.15;

  static std::vector<std::string> default_excluded_categories();
  // JSON object or flat TOML with the keys above; absent keys keep defaults.
  static CleaningConfig parse(std::string_view text);
  static CleaningConfig load(const std::string& path);
};

// Rule names, in the order rules are applied. An incident removed by one rule
// is not counted again by later ones.
inline constexpr std::string_view kRuleExcludedCategory = "excluded-category";
inline constexpr std::string_view kRuleUnknownCategory = "unknown-category";
inline constexpr std::string_view kRuleDateWindow = "date-window";
inline constexpr std::string_view kRuleMinUtterances = "min-utterances";
inline constexpr std::string_view kRuleLanguage = "language";

struct CleaningReport {
  std::map<std::string, std::size_t> removed_by_rule;
  std::size_t kept = 0;
  std::size_t input = 0;

  std::size_t removed_total() const;
  bool operator==(const CleaningReport&) const = default;
};

struct CleanResult {
  Corpus corpus;
  CleaningReport report;
};

// Total: never throws on data; an all-filtered corpus is an empty Corpus.
// `detector` overrides the stopword baseline when given.
CleanResult clean_corpus(const Corpus& corpus, const CleaningConfig& config,
                         const LanguageDetector* detector = nullptr);

// ---------------------------------------------------------------------------
// Conversation stages

enum class Stage { kInitiation = 0, kGathering = 1, kElaboration = 2 };

// Utterance i of n (1-based) gets stage floor(3(i-1)/n). Throws
// ValidationError when n == 0.
std::vector<int> split_stages(std::size_t n);
std::vector<int> split_stages(const Incident& incident);

}  // namespace safechat

#endif  // SAFECHAT_CORPUS_H_
