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

#include "safechat/analysis.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/text.h"

namespace safechat::analysis {
namespace {

using nlohmann::json;

constexpr double kSecondsPerYear = 365.25 * 24 * 3600;

double years_between(const Timestamp& from, const Timestamp& to) {
  auto secs = std::chrono::duration<double>(to.utc() - from.utc()).count();
  return secs / kSecondsPerYear;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

OrgTable parse_orgs(std::istream& in) {
  OrgTable orgs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, "", e.what());
    }
    if (!j.is_object() || !j.contains("org_id") || !j["org_id"].is_string())
      throw ParseError(line_no, "org_id", "missing or not a string");
    if (!j.contains("adopted_at") || !j["adopted_at"].is_string())
      throw ParseError(line_no, "adopted_at", "missing or not a string");
    auto ts = Timestamp::parse(j["adopted_at"].get<std::string>());
    if (!ts) throw ParseError(line_no, "adopted_at", "invalid timestamp");
    auto id = j["org_id"].get<std::string>();
    if (!orgs.emplace(id, *ts).second)
      throw ParseError(line_no, "org_id", "duplicate org_id " + id);
  }
  return orgs;
}

OrgTable load_orgs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open org file " + path);
  return parse_orgs(in);
}

void write_orgs(const OrgTable& orgs, std::ostream& out) {
  for (const auto& [id, ts] : orgs) {
    nlohmann::ordered_json j;
    j["org_id"] = id;
    j["adopted_at"] = ts.to_string();
    out << j.dump() << '\n';
  }
}

std::vector<IncidentFeatures> incident_features(const Corpus& corpus, const CorpusLabels& labels,
                                                const SentimentMapping& mapping,
                                                const SupportSet& support, const OrgTable* orgs) {
  const auto& incidents = corpus.incidents();
  if (labels.size() != incidents.size())
    throw ValidationError("labels cover " + std::to_string(labels.size()) + " incidents, corpus has " +
                          std::to_string(incidents.size()));
  if (incidents.empty()) return {};

  std::map<std::string, Timestamp, std::less<>> first_seen;
  std::map<std::string, std::size_t, std::less<>> org_counts;
  Timestamp lo = incidents.front().created_at;
  Timestamp hi = lo;
  for (const auto& inc : incidents) {
    auto [it, fresh] = first_seen.emplace(inc.org_id, inc.created_at);
    if (!fresh && inc.created_at < it->second) it->second = inc.created_at;
    ++org_counts[inc.org_id];
    lo = std::min(lo, inc.created_at);
    hi = std::max(hi, inc.created_at);
  }
  const double span_years = std::max(1.0, years_between(lo, hi));

  std::vector<IncidentFeatures> out;
  out.reserve(incidents.size());
  for (std::size_t i = 0; i < incidents.size(); ++i) {
    const auto& inc = incidents[i];
    const auto& lab = labels[i];
    if (lab.size() != inc.utterances.size())
      throw ValidationError("incident " + inc.incident_id + ": label count mismatch");
    if (inc.category.is_excluded())
      throw ValidationError("incident " + inc.incident_id + ": excluded category " +
                            inc.category.name());
    IncidentFeatures f;
    f.incident_id = inc.incident_id;
    f.org_id = inc.org_id;
    f.category = inc.category.name();
    f.anonymous = inc.anonymous;
    f.time_of_day = std::string(stats::time_of_day_bucket(inc.created_at));
    f.hour = inc.created_at.local_hour();
    f.chat_length = static_cast<double>(inc.utterances.size());
    Timestamp adopted = first_seen.at(inc.org_id);
    if (orgs) {
      if (auto it = orgs->find(inc.org_id); it != orgs->end()) adopted = it->second;
    }
    f.years_in_use = std::max(0.0, years_between(adopted, inc.created_at));
    f.tips_per_year = static_cast<double>(org_counts.at(inc.org_id)) / span_years;
    const auto users = user_emotions(inc, lab);
    if (!users.empty()) f.polarity = polarity_score(users, mapping).value;
    for (std::size_t u = 0; u < inc.utterances.size(); ++u) {
      if (inc.utterances[u].speaker == Speaker::kDispatcher &&
          detect_emotional_support(lab[u].emotion, support).is_support) {
        f.support = true;
        break;
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<stats::Record> to_records(const std::vector<IncidentFeatures>& features) {
  std::vector<stats::Record> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    if (!f.polarity) continue;
    stats::Record r;
    r["negativity"] = -*f.polarity;
    r["polarity"] = *f.polarity;
    r["support"] = f.support ? 1.0 : 0.0;
    r["category"] = f.category;
    r["anonymous"] = f.anonymous ? 1.0 : 0.0;
    r["time_of_day"] = f.time_of_day;
    r["chat_length"] = f.chat_length;
    r["years_in_use"] = f.years_in_use;
    r["tips_per_year"] = f.tips_per_year;
    r["org_id"] = f.org_id;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

void check_model(int model) {
  if (model < 1 || model > 3) throw ValidationError("model must be 1, 2 or 3");
}

std::vector<stats::Covariate> base_covariates(const References& refs) {
  return {stats::Covariate::categorical("category", refs.category),
          stats::Covariate::continuous("anonymous"),
          stats::Covariate::categorical("time_of_day", refs.time_of_day)};
}

}  // namespace

stats::DesignSpec negativity_spec(int model, const References& refs) {
  check_model(model);
  stats::DesignSpec spec;
  spec.outcome = "negativity";
  spec.covariates = base_covariates(refs);
  spec.covariates.push_back(stats::Covariate::continuous("chat_length"));
  if (model >= 2) spec.covariates.push_back(stats::Covariate::continuous("years_in_use"));
  if (model >= 3) spec.covariates.push_back(stats::Covariate::continuous("tips_per_year"));
  spec.cluster_field = "org_id";
  return spec;
}

stats::DesignSpec support_spec(int model, const References& refs) {
  check_model(model);
  stats::DesignSpec spec;
  spec.outcome = "support";
  spec.covariates = base_covariates(refs);
  if (model >= 2) {
    spec.covariates.push_back(stats::Covariate::continuous("years_in_use"));
    spec.covariates.push_back(stats::Covariate::continuous("tips_per_year"));
  }
  if (model >= 3) spec.covariates.push_back(stats::Covariate::continuous("polarity"));
  spec.cluster_field = "org_id";
  return spec;
}

FittedModel fit_negativity(const std::vector<stats::Record>& records, int model,
                           const References& refs) {
  FittedModel m;
  m.name = "negativity_model" + std::to_string(model);
  m.design = stats::design_matrix(records, negativity_spec(model, refs));
  auto fit = stats::ols_fit(m.design.x, m.design.y, m.design.terms);
  m.fit = stats::with_clustered_se(fit, m.design.x, m.design.clusters);
  return m;
}

FittedModel fit_support(const std::vector<stats::Record>& records, int model,
                        const References& refs) {
  FittedModel m;
  m.name = "support_model" + std::to_string(model);
  m.design = stats::design_matrix(records, support_spec(model, refs));
  auto fit = stats::logistic_fit(m.design.x, m.design.y, m.design.terms);
  m.fit = stats::with_clustered_se(fit, m.design.x, m.design.clusters);
  return m;
}

std::vector<NamedTest> in_text_tests(const Corpus& corpus, const CorpusLabels& labels,
                                     const SentimentMapping& mapping,
                                     const std::vector<IncidentFeatures>& features) {
  std::vector<NamedTest> out;
  auto attempt = [&](const std::string& name, auto&& run) {
    try {
      out.push_back({name, run()});
    } catch (const ValidationError&) {
      // degenerate input: the test is omitted
    }
  };

  attempt("negativity_by_category", [&] {
    std::map<std::string, std::vector<double>> by_cat;
    for (const auto& f : features)
      if (f.polarity) by_cat[f.category].push_back(-*f.polarity);
    std::vector<std::vector<double>> groups;
    for (auto& [cat, v] : by_cat)
      if (v.size() >= 2) groups.push_back(std::move(v));
    return stats::one_way_anova(groups);
  });

  std::vector<LabeledConversation> convs;
  convs.reserve(corpus.incident_count());
  for (std::size_t i = 0; i < corpus.incident_count(); ++i)
    convs.push_back(labeled_conversation(corpus.incidents()[i], labels.at(i)));

  attempt("stage_by_sentiment", [&] {
    auto table = stage_sentiment(convs, mapping);
    std::vector<std::vector<double>> t;
    for (const auto& row : table.counts) t.push_back({double(row[0]), double(row[1]), double(row[2])});
    return stats::chi_square_independence(t);
  });

  attempt("positive_share_initiation_vs_elaboration", [&] {
    auto pairs = stage_positive_ratios(convs, mapping, Stage::kInitiation, Stage::kElaboration);
    return stats::t_test(pairs.from, pairs.to, {.paired = true});
  });

  attempt("category_by_time_of_day", [&] {
    std::vector<std::string> cats;
    for (const auto& f : features) cats.push_back(f.category);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    const auto& buckets = stats::time_of_day_buckets();
    std::vector<std::vector<double>> t(cats.size(), std::vector<double>(buckets.size(), 0.0));
    for (const auto& f : features) {
      auto r = std::lower_bound(cats.begin(), cats.end(), f.category) - cats.begin();
      auto c = std::find(buckets.begin(), buckets.end(), f.time_of_day) - buckets.begin();
      t[r][c] += 1.0;
    }
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < buckets.size(); ++c) {
      double s = 0;
      for (const auto& row : t) s += row[c];
      if (s > 0) keep.push_back(c);
    }
    for (auto& row : t) {
      std::vector<double> kept;
      for (auto c : keep) kept.push_back(row[c]);
      row = std::move(kept);
    }
    return stats::chi_square_independence(t);
  });
  return out;
}

std::string tests_csv(const std::vector<NamedTest>& tests) {
  std::ostringstream os;
  os << "test,kind,statistic,df1,df2,p_value\n";
  for (const auto& t : tests) {
    os << text::csv_field(t.name) << ',' << stats::test_kind_name(t.result.kind) << ','
       << fmt6(t.result.statistic) << ',' << fmt6(t.result.df1) << ','
       << (t.result.df2 ? fmt6(*t.result.df2) : "") << ',' << fmt6(t.result.p_value) << '\n';
  }
  return os.str();
}

}  // namespace safechat::analysis
