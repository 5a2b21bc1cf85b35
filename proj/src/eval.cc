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

#include "safechat/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/text.h"

namespace safechat::eval {
namespace {

using nlohmann::json;

SimilarityScore make_score(double p, double r, Metric m) {
  return {p, r, f1_score(p, r), m, false};
}

SimilarityScore empty_score(Metric m) { return {0.0, 0.0, 0.0, m, true}; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double greedy_side(const std::vector<std::vector<double>>& from,
                   const std::vector<std::vector<double>>& to) {
  double sum = 0.0;
  for (const auto& u : from) {
    double best = -1.0;
    for (const auto& v : to) best = std::max(best, dot(u, v));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rate * 100.0);
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

SupportRateRow summarize_group(std::string label, std::span<const SupportPair* const> members,
                               std::size_t min_n) {
  SupportRateRow row;
  row.group = std::move(label);
  row.n = members.size();
  std::vector<double> h, m;
  for (const SupportPair* p : members) {
    h.push_back(p->human ? 1.0 : 0.0);
    m.push_back(p->model ? 1.0 : 0.0);
  }
  const double n = static_cast<double>(row.n);
  row.human_rate = std::count(h.begin(), h.end(), 1.0) / n;
  row.model_rate = std::count(m.begin(), m.end(), 1.0) / n;
  if (row.n >= std::max<std::size_t>(min_n, 2)) {
    try {
      auto t = stats::t_test(h, m, {.paired = true});
      row.t_statistic = t.statistic;
      row.p_value = t.p_value;
    } catch (const ValidationError&) {
      // Zero variance of the paired differences: no test is reported.
    }
  }
  return row;
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kRougeL: return "rouge_l";
    case Metric::kRouge1: return "rouge_1";
    case Metric::kRouge2: return "rouge_2";
    case Metric::kEmbedSim: return "embed_sim";
  }
  return "unknown";
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SimilarityScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = text::word_tokens(candidate);
  const auto r = text::word_tokens(reference);
  if (c.empty() || r.empty()) return empty_score(Metric::kRougeL);
  const double lcs = static_cast<double>(lcs_length(c, r));
  return make_score(lcs / static_cast<double>(c.size()), lcs / static_cast<double>(r.size()),
                    Metric::kRougeL);
}

SimilarityScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n != 1 && n != 2) throw ValidationError("rouge_n supports n = 1 or 2");
  const Metric metric = n == 1 ? Metric::kRouge1 : Metric::kRouge2;
  auto grams = [n](const std::vector<std::string>& toks) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      std::string g = toks[i];
      if (n == 2) g += ' ' + toks[i + 1];
      ++out[g];
    }
    return out;
  };
  const auto c = grams(text::word_tokens(candidate));
  const auto r = grams(text::word_tokens(reference));
  if (c.empty() || r.empty()) return empty_score(metric);
  std::size_t overlap = 0, nc = 0, nr = 0;
  for (const auto& [g, k] : c) {
    nc += k;
    if (auto it = r.find(g); it != r.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [_, k] : r) nr += k;
  return make_score(static_cast<double>(overlap) / static_cast<double>(nc),
                    static_cast<double>(overlap) / static_cast<double>(nr), metric);
}

HashedTrigramEmbedder::HashedTrigramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

const HashedTrigramEmbedder& HashedTrigramEmbedder::standard() {
  static const HashedTrigramEmbedder kStandard;
  return kStandard;
}

std::vector<double> HashedTrigramEmbedder::embed_token(std::string_view token) const {
  const std::string padded = "<" + std::string(token) + ">";
  std::vector<double> v(dim_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    v[fnv1a(std::string_view(padded).substr(i, 3)) % dim_] += 1.0;
  }
  const double norm = std::sqrt(dot(v, v));
  for (double& x : v) x /= norm;
  return v;
}

std::vector<std::vector<double>> HashedTrigramEmbedder::embed(
    std::span<const std::string> tokens) const {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(embed_token(t));
  return out;
}

SimilarityScore embed_similarity(std::string_view candidate, std::string_view reference,
                                 const TokenEmbedder& embedder) {
  const auto c = text::word_tokens(candidate);
  const auto r = text::word_tokens(reference);
  if (c.empty() || r.empty()) return empty_score(Metric::kEmbedSim);
  const auto ce = embedder.embed(c);
  const auto re = embedder.embed(r);
  const double p = std::clamp(greedy_side(ce, re), 0.0, 1.0);
  const double rc = std::clamp(greedy_side(re, ce), 0.0, 1.0);
  return make_score(p, rc, Metric::kEmbedSim);
}

// ---------------------------------------------------------------------------
// Support rates

double support_rate(std::span<const SupportFlag> flags) {
  if (flags.empty()) throw ValidationError("support rate of no utterances");
  const auto k = std::count_if(flags.begin(), flags.end(),
                               [](const SupportFlag& f) { return f.is_support; });
  return static_cast<double>(k) / static_cast<double>(flags.size());
}

std::string_view group_by_name(GroupBy g) { return g == GroupBy::kCategory ? "category" : "hour"; }

std::optional<GroupBy> parse_group_by(std::string_view name) {
  if (name == "category") return GroupBy::kCategory;
  if (name == "hour") return GroupBy::kHour;
  return std::nullopt;
}

std::string hour_label(int hour) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", hour);
  return buf;
}

SupportRateTable compare_support(std::span<const SupportPair> pairs, GroupBy group_by,
                                 std::size_t min_n) {
  SupportRateTable table;
  table.group_by = group_by;
  std::map<std::string, std::vector<const SupportPair*>> groups;
  std::vector<const SupportPair*> all;
  for (const auto& p : pairs) {
    const std::string key = group_by == GroupBy::kCategory ? p.category : hour_label(p.hour);
    groups[key].push_back(&p);
    all.push_back(&p);
  }
  for (const auto& [key, members] : groups) {
    table.rows.push_back(summarize_group(key, members, min_n));
  }
  table.total.group = "Total";
  if (!all.empty()) table.total = summarize_group("Total", all, min_n);
  return table;
}

std::vector<ModelOutput> parse_model_outputs(std::istream& in) {
  std::vector<ModelOutput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, "", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "", "expected an object");
    for (const char* key : {"incident_id", "turn_index", "text"}) {
      if (!j.contains(key)) throw ParseError(line_no, key, std::string("missing field ") + key);
    }
    if (!j["incident_id"].is_string()) {
      throw ParseError(line_no, "incident_id", "field incident_id must be a string");
    }
    if (!j["turn_index"].is_number_unsigned()) {
      throw ParseError(line_no, "turn_index", "field turn_index must be a non-negative integer");
    }
    if (!j["text"].is_string()) throw ParseError(line_no, "text", "field text must be a string");
    out.push_back({j["incident_id"].get<std::string>(), j["turn_index"].get<std::size_t>(),
                   j["text"].get<std::string>()});
  }
  return out;
}

std::vector<ModelOutput> load_model_outputs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return parse_model_outputs(in);
}

void write_model_outputs(std::span<const ModelOutput> outputs, std::ostream& out) {
  for (const auto& o : outputs) {
    nlohmann::ordered_json j;
    j["incident_id"] = o.incident_id;
    j["turn_index"] = o.turn_index;
    j["text"] = o.text;
    out << j.dump() << '\n';
  }
}

std::vector<AlignedTurn> align_outputs(const Corpus& corpus, std::span<const ModelOutput> model) {
  std::map<std::pair<std::string_view, std::size_t>, const ModelOutput*> by_key;
  for (const auto& o : model) {
    if (!by_key.emplace(std::pair<std::string_view, std::size_t>(o.incident_id, o.turn_index), &o)
             .second) {
      throw ValidationError("duplicate model output for " + o.incident_id + " turn " +
                            std::to_string(o.turn_index));
    }
  }
  std::vector<AlignedTurn> out;
  for (const auto& inc : corpus.incidents()) {
    for (std::size_t i = 0; i < inc.utterances.size(); ++i) {
      if (inc.utterances[i].speaker != Speaker::kDispatcher) continue;
      const auto it = by_key.find({inc.incident_id, i});
      if (it == by_key.end()) {
        throw ValidationError("misaligned: no model output for " + inc.incident_id + " turn " +
                              std::to_string(i));
      }
      out.push_back({&inc, i, &inc.utterances[i].text, &it->second->text});
      by_key.erase(it);
    }
  }
  if (!by_key.empty()) {
    const ModelOutput& o = *by_key.begin()->second;
    throw ValidationError("misaligned: model output " + o.incident_id + " turn " +
                          std::to_string(o.turn_index) + " has no human dispatcher turn");
  }
  return out;
}

std::vector<SupportPair> support_pairs(std::span<const AlignedTurn> aligned,
                                       const EmotionClassifier& classifier,
                                       const SupportSet& support) {
  std::vector<std::string> texts;
  texts.reserve(aligned.size() * 2);
  for (const auto& a : aligned) {
    texts.push_back(*a.human_text);
    texts.push_back(text::trim(*a.model_text).empty() ? std::string("(empty)") : *a.model_text);
  }
  const auto labels = classify_all(texts, classifier);
  std::vector<SupportPair> out;
  out.reserve(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    SupportPair p;
    p.category = aligned[i].incident->category.name();
    p.hour = aligned[i].incident->created_at.local_hour();
    p.human = detect_emotional_support(labels[2 * i].emotion, support).is_support;
    p.model = detect_emotional_support(labels[2 * i + 1].emotion, support).is_support;
    out.push_back(std::move(p));
  }
  return out;
}

SupportRateTable compare_support(const Corpus& human, std::span<const ModelOutput> model,
                                 GroupBy group_by, const EmotionClassifier& classifier,
                                 const SupportSet& support, std::size_t min_n) {
  const auto aligned = align_outputs(human, model);
  const auto pairs = support_pairs(aligned, classifier, support);
  return compare_support(pairs, group_by, min_n);
}

std::string support_table_csv(const SupportRateTable& table) {
  std::ostringstream os;
  os << group_by_name(table.group_by) << ",n,human_rate,model_rate,t,p_value\n";
  auto row = [&](const SupportRateRow& r) {
    os << text::csv_field(r.group) << ',' << r.n << ',' << format_double(r.human_rate) << ','
       << format_double(r.model_rate) << ','
       << (r.t_statistic ? format_double(*r.t_statistic) : "") << ','
       << (r.p_value ? format_double(*r.p_value) : "") << '\n';
  };
  for (const auto& r : table.rows) row(r);
  if (table.total.n > 0) row(table.total);
  return os.str();
}

std::string render_support_table(const SupportRateTable& table) {
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({std::string(group_by_name(table.group_by)), "Human (%)", "Model (%)", "p"});
  auto add = [&](const SupportRateRow& r) {
    cells.push_back({r.group, percent(r.human_rate), percent(r.model_rate),
                     r.p_value ? format_double(*r.p_value) : "-"});
  };
  for (const auto& r : table.rows) add(r);
  if (table.total.n > 0) add(table.total);
  std::array<std::size_t, 4> width{};
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], c[i].size());
  }
  std::ostringstream os;
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < 4; ++i) {
      if (i > 0) os << " | ";
      os << c[i];
      if (i < 3) os << std::string(width[i] - c[i].size(), ' ');
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Temporal consistency

Dispersion dispersion(std::span<const double> rates) {
  Dispersion d;
  d.hours = rates.size();
  if (rates.empty()) return d;
  for (double r : rates) d.mean += r;
  d.mean /= static_cast<double>(rates.size());
  double ss = 0.0;
  for (double r : rates) {
    ss += (r - d.mean) * (r - d.mean);
    d.mean_abs_deviation += std::abs(r - d.mean);
  }
  d.mean_abs_deviation /= static_cast<double>(rates.size());
  d.sd = rates.size() > 1 ? std::sqrt(ss / static_cast<double>(rates.size() - 1)) : 0.0;
  return d;
}

std::pair<HourlyRates, HourlyRates> hourly_rates(std::span<const SupportPair> pairs) {
  std::array<std::size_t, 24> n{}, h{}, m{};
  for (const auto& p : pairs) {
    const auto hr = static_cast<std::size_t>(p.hour);
    if (hr >= 24) throw ValidationError("hour outside 0..23");
    ++n[hr];
    h[hr] += p.human ? 1 : 0;
    m[hr] += p.model ? 1 : 0;
  }
  HourlyRates human, model;
  for (std::size_t i = 0; i < 24; ++i) {
    if (n[i] == 0) continue;
    human[i] = static_cast<double>(h[i]) / static_cast<double>(n[i]);
    model[i] = static_cast<double>(m[i]) / static_cast<double>(n[i]);
  }
  return {human, model};
}

TemporalConsistency temporal_consistency(std::span<const double> human_rates,
                                         std::span<const double> model_rates) {
  if (human_rates.size() < 2 || model_rates.size() < 2) {
    throw ValidationError("each system needs rates for at least 2 hours");
  }
  const std::vector<std::vector<double>> groups = {
      {human_rates.begin(), human_rates.end()}, {model_rates.begin(), model_rates.end()}};
  TemporalConsistency out;
  out.levene = stats::levene_test(groups);
  out.human = dispersion(human_rates);
  out.model = dispersion(model_rates);
  return out;
}

TemporalConsistency temporal_consistency(const HourlyRates& human, const HourlyRates& model) {
  std::vector<double> h, m;
  for (const auto& r : human) {
    if (r) h.push_back(*r);
  }
  for (const auto& r : model) {
    if (r) m.push_back(*r);
  }
  return temporal_consistency(h, m);
}

// ---------------------------------------------------------------------------
// Similarity tables

std::vector<SimilarityRow> similarity_by_category(std::span<const AlignedTurn> aligned,
                                                  const TokenEmbedder& embedder) {
  std::map<std::string, SimilarityRow> groups;
  SimilarityRow total{"Total", 0, 0.0, 0.0};
  for (const auto& a : aligned) {
    const double r = rouge_l(*a.model_text, *a.human_text).f1;
    const double e = embed_similarity(*a.model_text, *a.human_text, embedder).f1;
    SimilarityRow& row = groups[a.incident->category.name()];
    row.group = a.incident->category.name();
    for (SimilarityRow* target : {&row, &total}) {
      ++target->n;
      target->rouge_l_f1 += r;
      target->embed_f1 += e;
    }
  }
  std::vector<SimilarityRow> out;
  for (auto& [_, row] : groups) out.push_back(row);
  if (total.n > 0) out.push_back(total);
  for (auto& row : out) {
    row.rouge_l_f1 /= static_cast<double>(row.n);
    row.embed_f1 /= static_cast<double>(row.n);
  }
  return out;
}

std::string similarity_table_csv(std::span<const SimilarityRow> rows) {
  std::ostringstream os;
  os << "category,n,rouge_l_f1,embed_sim_f1\n";
  for (const auto& r : rows) {
    os << text::csv_field(r.group) << ',' << r.n << ',' << format_double(r.rouge_l_f1) << ','
       << format_double(r.embed_f1) << '\n';
  }
  return os.str();
}

}  // namespace safechat::eval
