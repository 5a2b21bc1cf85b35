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

#include "safechat/corpus.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/resources.h"
#include "safechat/text.h"

namespace safechat {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Speaker / category

std::string_view speaker_name(Speaker s) {
  return s == Speaker::kUser ? "user" : "dispatcher";
}

std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "user") return Speaker::kUser;
  if (s == "dispatcher") return Speaker::kDispatcher;
  return std::nullopt;
}

const std::array<Category, kCategoryCount>& all_categories() {
  static constexpr std::array<Category, kCategoryCount> kAll = {
      Category::kNoiseDisturbance,
      Category::kSuspiciousActivity,
      Category::kEmergencyMessage,
      Category::kDrugsAlcohol,
      Category::kFacilitiesMaintenance,
      Category::kHarassmentAbuse,
      Category::kAccidentTrafficParking,
      Category::kTheftLostItem,
      Category::kMentalHealth,
      Category::kVandalismDamage,
      Category::kMisconduct,
      Category::kHazard,
      Category::kInjuryMedical,
      Category::kSupportServices,
      Category::kSuspiciousUnattendedPackage,
      Category::kThreatVerbalAbuse,
      Category::kUnauthorizedVisitor,
      Category::kContactMallCorporatePropertySecurity,
  };
  return kAll;
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kNoiseDisturbance: return "Noise Disturbance";
    case Category::kSuspiciousActivity: return "Suspicious Activity";
    case Category::kEmergencyMessage: return "Emergency Message";
    case Category::kDrugsAlcohol: return "Drugs/Alcohol";
    case Category::kFacilitiesMaintenance: return "Facilities/Maintenance";
    case Category::kHarassmentAbuse: return "Harassment/Abuse";
    case Category::kAccidentTrafficParking: return "Accident/Traffic/Parking";
    case Category::kTheftLostItem: return "Theft/Lost Item";
    case Category::kMentalHealth: return "Mental Health";
    case Category::kVandalismDamage: return "Vandalism/Damage";
    case Category::kMisconduct: return "Misconduct";
    case Category::kHazard: return "Hazard";
    case Category::kInjuryMedical: return "Injury/Medical";
    case Category::kSupportServices: return "Support Services";
    case Category::kSuspiciousUnattendedPackage: return "Suspicious/Unattended Package";
    case Category::kThreatVerbalAbuse: return "Threat/Verbal Abuse";
    case Category::kUnauthorizedVisitor: return "Unauthorized Visitor";
    case Category::kContactMallCorporatePropertySecurity:
      return "Contact Mall/Corporate/Property Security";
  }
  return "?";
}

std::string category_key(std::string_view name) {
  std::string collapsed = text::collapse_whitespace(name);
  std::string out;
  out.reserve(collapsed.size());
  for (std::size_t i = 0; i < collapsed.size(); ++i) {
    char c = collapsed[i];
    if (c == ' ' && ((i + 1 < collapsed.size() && collapsed[i + 1] == '/') ||
                     (!out.empty() && out.back() == '/'))) {
      continue;
    }
    out.push_back(c);
  }
  return text::to_lower(out);
}

TipCategory TipCategory::excluded(std::string name) {
  TipCategory t;
  t.excluded_name_ = std::move(name);
  return t;
}

TipCategory TipCategory::parse(std::string_view name) {
  std::string key = category_key(name);
  for (Category c : all_categories()) {
    if (category_key(category_name(c)) == key) return TipCategory(c);
  }
  return excluded(std::string(name));
}

std::string TipCategory::name() const {
  return category_ ? std::string(category_name(*category_)) : excluded_name_;
}

std::size_t Incident::count(Speaker s) const {
  return static_cast<std::size_t>(std::count_if(
      utterances.begin(), utterances.end(),
      [s](const Utterance& u) { return u.speaker == s; }));
}

Corpus::Corpus(std::vector<Incident> incidents, Provenance provenance)
    : incidents_(std::move(incidents)), provenance_(std::move(provenance)) {
  for (const auto& inc : incidents_) {
    utterances_ += inc.utterances.size();
    users_ += inc.count(Speaker::kUser);
    dispatchers_ += inc.count(Speaker::kDispatcher);
  }
}

// ---------------------------------------------------------------------------
// Corpus file format

namespace {

const json& require(const json& obj, const char* field, std::size_t line,
                    const std::string& prefix = "") {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(line, prefix + field, "missing field " + prefix + field);
  }
  return *it;
}

std::string require_string(const json& obj, const char* field, std::size_t line,
                           const std::string& prefix = "") {
  const json& v = require(obj, field, line, prefix);
  if (!v.is_string()) {
    throw ParseError(line, prefix + field,
                     "field " + prefix + field + ": expected string");
  }
  return v.get<std::string>();
}

Timestamp require_time(const json& obj, const char* field, std::size_t line,
                       const std::string& prefix = "") {
  std::string raw = require_string(obj, field, line, prefix);
  auto ts = Timestamp::parse(raw);
  if (!ts) {
    throw ParseError(line, prefix + field,
                     "field " + prefix + field + ": invalid RFC 3339 timestamp '" +
                         raw + "'");
  }
  return *ts;
}

}  // namespace

Incident parse_incident(std::string_view line_text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(line_text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, "record", std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line, "record", "record is not an object");

  Incident inc;
  inc.incident_id = require_string(obj, "incident_id", line);
  if (text::trim(inc.incident_id).empty()) {
    throw ParseError(line, "incident_id", "field incident_id: empty");
  }
  inc.org_id = require_string(obj, "org_id", line);
  inc.category = TipCategory::parse(require_string(obj, "category", line));
  const json& anon = require(obj, "anonymous", line);
  if (!anon.is_boolean()) {
    throw ParseError(line, "anonymous", "field anonymous: expected boolean");
  }
  inc.anonymous = anon.get<bool>();
  inc.created_at = require_time(obj, "created_at", line);

  const json& utts = require(obj, "utterances", line);
  if (!utts.is_array()) {
    throw ParseError(line, "utterances", "field utterances: expected array");
  }
  inc.utterances.reserve(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    std::string prefix = "utterances[" + std::to_string(i) + "].";
    const json& u = utts[i];
    if (!u.is_object()) {
      throw ParseError(line, "utterances", "utterance " + std::to_string(i) +
                                               " is not an object");
    }
    Utterance utt;
    std::string speaker = require_string(u, "speaker", line, prefix);
    auto sp = parse_speaker(speaker);
    if (!sp) {
      throw ParseError(line, prefix + "speaker",
                       "field " + prefix + "speaker: expected user|dispatcher");
    }
    utt.speaker = *sp;
    utt.text = require_string(u, "text", line, prefix);
    if (text::trim(utt.text).empty()) {
      throw ParseError(line, prefix + "text", "field " + prefix + "text: empty");
    }
    utt.ts = require_time(u, "ts", line, prefix);
    if (!inc.utterances.empty() && utt.ts < inc.utterances.back().ts) {
      throw ParseError(line, prefix + "ts",
                       "field " + prefix + "ts: utterances not sorted by time");
    }
    inc.utterances.push_back(std::move(utt));
  }
  return inc;
}

Corpus parse_corpus(std::istream& in, std::string source) {
  std::vector<Incident> incidents;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Incident inc = parse_incident(line, line_no);
    if (!seen.insert(inc.incident_id).second) {
      throw ParseError(line_no, "incident_id",
                       "duplicate incident_id " + inc.incident_id);
    }
    incidents.push_back(std::move(inc));
  }
  auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
  return Corpus(std::move(incidents), Provenance{std::move(source), Timestamp(now)});
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);
  return parse_corpus(in, path);
}

std::string serialize_incident(const Incident& inc) {
  nlohmann::ordered_json obj;
  obj["incident_id"] = inc.incident_id;
  obj["org_id"] = inc.org_id;
  obj["category"] = inc.category.name();
  obj["anonymous"] = inc.anonymous;
  obj["created_at"] = inc.created_at.to_string();
  auto utts = nlohmann::ordered_json::array();
  for (const auto& u : inc.utterances) {
    nlohmann::ordered_json uj;
    uj["speaker"] = speaker_name(u.speaker);
    uj["text"] = u.text;
    uj["ts"] = u.ts.to_string();
    utts.push_back(std::move(uj));
  }
  obj["utterances"] = std::move(utts);
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& inc : corpus.incidents()) out << serialize_incident(inc) << '\n';
}

// ---------------------------------------------------------------------------
// Language detection

StopwordLanguageDetector::StopwordLanguageDetector(double threshold)
    : threshold_(threshold) {
  static const auto kWords = [] {
    auto words = json::parse(resources::stopwords_en()).get<std::vector<std::string>>();
    std::sort(words.begin(), words.end());
    return std::make_shared<const std::vector<std::string>>(std::move(words));
  }();
  stopwords_ = kWords;
}

std::string StopwordLanguageDetector::detect(std::string_view t) const {
  std::size_t counted = 0, hits = 0;
  for (const auto& tok : text::word_tokens(t)) {
    if (text::is_mask_tag(tok) || tok.front() == '#') continue;
    if (std::all_of(tok.begin(), tok.end(),
                    [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    ++counted;
    if (std::binary_search(stopwords_->begin(), stopwords_->end(), tok)) ++hits;
  }
  if (counted < 3) return "en";
  return static_cast<double>(hits) / static_cast<double>(counted) >= threshold_
             ? "en"
             : "other";
}

std::string detect_language(std::string_view text, double threshold) {
  return StopwordLanguageDetector(threshold).detect(text);
}

// ---------------------------------------------------------------------------
// Cleaning config

std::vector<std::string> CleaningConfig::default_excluded_categories() {
  return {"SafeRide",
          "911 / Call",
          "Broadcast Message",
          "Scavenger Hunt / Test",
          "Operational Procedure Log",
          "Broadcast Check-in Drill",
          "Broadcast Check-in",
          "Request Security Presence / Walk-through",
          "Other",
          "Misc"};
}

namespace {

// Flat TOML subset: key = value with strings, integers, floats, booleans and
// single-line arrays of strings. Comments start with '#'.
json parse_flat_toml(std::string_view text) {
  json out = json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = text::trim(line);
    if (l.empty() || l.front() == '#') continue;
    auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "config", "expected key = value");
    }
    std::string key(text::trim(l.substr(0, eq)));
    std::string value(text::trim(l.substr(eq + 1)));
    // Strip a trailing comment outside of quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (value[i] == '"') quoted = !quoted;
      if (value[i] == '#' && !quoted) {
        value = std::string(text::trim(value.substr(0, i)));
        break;
      }
    }
    if (value == "true" || value == "false") {
      out[key] = value == "true";
      continue;
    }
    try {
      // Quoted strings, arrays and numbers share JSON syntax.
      out[key] = json::parse(value);
    } catch (const json::parse_error&) {
      throw ParseError(line_no, key, "invalid value for " + key);
    }
  }
  return out;
}

Timestamp config_date(const json& v, const char* key, bool end_of_day) {
  if (!v.is_string()) {
    throw ValidationError(std::string("config ") + key + ": expected date string");
  }
  std::string s = v.get<std::string>();
  if (s.size() == 10) s += end_of_day ? "T23:59:59.999Z" : "T00:00:00Z";
  auto ts = Timestamp::parse(s);
  if (!ts) throw ValidationError(std::string("config ") + key + ": invalid date");
  return *ts;
}

}  // namespace

CleaningConfig CleaningConfig::parse(std::string_view text) {
  json obj;
  std::string_view t = text::trim(text);
  if (!t.empty() && t.front() == '{') {
    try {
      obj = json::parse(t);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
  } else {
    obj = parse_flat_toml(t);
  }
  static const std::unordered_set<std::string> kKeys = {
      "excluded_categories", "date_min",        "date_max",
      "min_utterances",      "filter_language", "stopword_threshold"};
  for (const auto& [k, _] : obj.items()) {
    if (!kKeys.count(k)) throw ValidationError("config: unknown key " + k);
  }
  CleaningConfig cfg;
  try {
    if (obj.contains("excluded_categories")) {
      cfg.excluded_categories =
          obj["excluded_categories"].get<std::vector<std::string>>();
    }
    if (obj.contains("date_min")) cfg.date_min = config_date(obj["date_min"], "date_min", false);
    if (obj.contains("date_max")) cfg.date_max = config_date(obj["date_max"], "date_max", true);
    if (obj.contains("min_utterances")) {
      auto v = obj["min_utterances"].get<long long>();
      if (v < 0) throw ValidationError("config min_utterances: negative");
      cfg.min_utterances = static_cast<std::size_t>(v);
    }
    if (obj.contains("filter_language")) cfg.filter_language = obj["filter_language"].get<bool>();
    if (obj.contains("stopword_threshold")) {
      cfg.stopword_threshold = obj["stopword_threshold"].get<double>();
      if (cfg.stopword_threshold < 0 || cfg.stopword_threshold > 1) {
        throw ValidationError("config stopword_threshold: outside [0,1]");
      }
    }
  } catch (const json::type_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

CleaningConfig CleaningConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::size_t CleaningReport::removed_total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : removed_by_rule) n += c;
  return n;
}

CleanResult clean_corpus(const Corpus& corpus, const CleaningConfig& config,
                         const LanguageDetector* detector) {
  std::unordered_set<std::string> blacklist;
  for (const auto& name : config.excluded_categories) blacklist.insert(category_key(name));

  StopwordLanguageDetector fallback(config.stopword_threshold);
  const LanguageDetector& lang = detector ? *detector : fallback;

  CleaningReport report;
  report.input = corpus.incident_count();
  for (auto rule : {kRuleExcludedCategory, kRuleUnknownCategory, kRuleDateWindow,
                    kRuleMinUtterances, kRuleLanguage}) {
    report.removed_by_rule[std::string(rule)] = 0;
  }

  std::vector<Incident> kept;
  for (const auto& inc : corpus.incidents()) {
    std::string_view rule;
    if (blacklist.count(category_key(inc.category.name()))) {
      rule = kRuleExcludedCategory;
    } else if (inc.category.is_excluded()) {
      rule = kRuleUnknownCategory;
    } else if (inc.created_at < config.date_min ||
               config.date_max < inc.created_at) {
      rule = kRuleDateWindow;
    } else if (inc.utterances.size() <= config.min_utterances) {
      rule = kRuleMinUtterances;
    } else if (config.filter_language) {
      std::string joined;
      for (const auto& u : inc.utterances) {
        if (!joined.empty()) joined.push_back(' ');
        joined += u.text;
      }
      if (lang.detect(joined) != "en") rule = kRuleLanguage;
    }
    if (rule.empty()) {
      kept.push_back(inc);
    } else {
      ++report.removed_by_rule[std::string(rule)];
    }
  }
  report.kept = kept.size();
  return CleanResult{Corpus(std::move(kept), corpus.provenance()), std::move(report)};
}

// ---------------------------------------------------------------------------
// Stages

std::vector<int> split_stages(std::size_t n) {
  if (n == 0) throw ValidationError("split_stages: incident has no utterances");
  std::vector<int> out(n);
  for (std::size_t i = 1; i <= n; ++i) {
    out[i - 1] = static_cast<int>(std::min<std::size_t>(3 * (i - 1) / n, 2));
  }
  return out;
}

std::vector<int> split_stages(const Incident& incident) {
  return split_stages(incident.utterances.size());
}

}  // namespace safechat
