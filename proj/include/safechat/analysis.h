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

// Per-incident features and the regression and test designs run over a
// labeled corpus: user negativity (OLS), dispatcher support (logistic), and
// the accompanying category, stage and time-of-day tests.

#ifndef SAFECHAT_ANALYSIS_H_
#define SAFECHAT_ANALYSIS_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safechat/corpus.h"
#include "safechat/emotion.h"
#include "safechat/stats.h"

namespace safechat::analysis {

// Organization adoption dates: {"org_id": "...", "adopted_at": "..."} per line.
using OrgTable = std::map<std::string, Timestamp, std::less<>>;
OrgTable parse_orgs(std::istream& in);
OrgTable load_orgs(const std::string& path);
void write_orgs(const OrgTable& orgs, std::ostream& out);

struct IncidentFeatures {
  std::string incident_id;
  std::string org_id;
  std::string category;
  bool anonymous = false;
  std::string time_of_day;
  int hour = 0;
  double chat_length = 0.0;  // utterances
  double years_in_use = 0.0;
  double tips_per_year = 0.0;
  std::optional<double> polarity;  // absent without user utterances
  bool support = false;            // any dispatcher utterance flagged
};

// Years in use run from the organization's adoption date, or from its first
// incident in the corpus when `orgs` has no entry. Tips per year divide the
// organization's incident count by the corpus time span in years (at least
// one year).
std::vector<IncidentFeatures> incident_features(const Corpus& corpus, const CorpusLabels& labels,
                                                const SentimentMapping& mapping,
                                                const SupportSet& support = SupportSet::standard(),
                                                const OrgTable* orgs = nullptr);

// Fields: negativity (-polarity), support (0/1), category, anonymous (0/1),
// time_of_day, chat_length, years_in_use, tips_per_year, polarity, org_id.
// Incidents without a polarity are skipped.
std::vector<stats::Record> to_records(const std::vector<IncidentFeatures>& features);

struct References {
  std::string category = "Suspicious Activity";
  std::string time_of_day = "4 a.m. - 8 a.m.";
};

// Nested model sequences. Negativity: 1 = category, anonymous, time of day,
// chat length; 2 adds years in use; 3 adds tips per year. Support: 1 =
// category, anonymous, time of day; 2 adds years in use and tips per year;
// 3 adds polarity.
stats::DesignSpec negativity_spec(int model = 3, const References& refs = {});
stats::DesignSpec support_spec(int model = 3, const References& refs = {});

struct FittedModel {
  std::string name;
  stats::Design design;
  stats::RegressionResult fit;  // organization-clustered SEs
};

FittedModel fit_negativity(const std::vector<stats::Record>& records, int model = 3,
                           const References& refs = {});
FittedModel fit_support(const std::vector<stats::Record>& records, int model = 3,
                        const References& refs = {});

struct NamedTest {
  std::string name;
  stats::TestResult result;
};

// Negativity across categories (ANOVA over categories with >= 2 incidents),
// stage by sentiment (chi-square), positive share first vs last stage
// (paired t), and category by time of day (chi-square), each skipped when
// its input is degenerate.
std::vector<NamedTest> in_text_tests(const Corpus& corpus, const CorpusLabels& labels,
                                     const SentimentMapping& mapping,
                                     const std::vector<IncidentFeatures>& features);

std::string tests_csv(const std::vector<NamedTest>& tests);

}  // namespace safechat::analysis

#endif  // SAFECHAT_ANALYSIS_H_
