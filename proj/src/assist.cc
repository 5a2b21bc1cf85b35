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

#include "safechat/assist.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/resources.h"
#include "safechat/text.h"

namespace safechat {

const std::string_view kPromptPreamble =
    "A chat between an individual reporting a safety concern to the local police "
    "department and a dispatcher from the police department. The dispatcher gives "
    "helpful and detailed guidance and instructions on how to proceed. The dispatcher "
    "is also supposed to give necessary emotional support to the user.";

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kScenario = "- Scenario: ";
constexpr std::string_view kUserPrefix = "User: ";
constexpr std::string_view kDispatcherPrefix = "Dispatcher: ";
constexpr std::string_view kAwaiting = "Dispatcher:";

std::string_view role_prefix(Speaker s) {
  return s == Speaker::kUser ? kUserPrefix : kDispatcherPrefix;
}

std::vector<std::string_view> split(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

ParsedBlock parse_block(std::string_view block) {
  const auto lines = split(block, "\n");
  if (!lines.front().starts_with(kScenario)) {
    throw ValidationError("prompt: block does not start with a scenario line");
  }
  ParsedBlock out;
  out.summary = std::string(lines.front().substr(kScenario.size()));
  std::size_t round = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::string header = "Round " + std::to_string(round + 1) + ":";
    if (line == header) {
      ++round;
      continue;
    }
    if (round == 0) throw ValidationError("prompt: turn before the first round header");
    if (line == kAwaiting && i + 1 == lines.size()) {
      out.awaiting_dispatcher = true;
      break;
    }
    Speaker s;
    std::string_view rest;
    if (line.starts_with(kUserPrefix)) {
      s = Speaker::kUser;
      rest = line.substr(kUserPrefix.size());
    } else if (line.starts_with(kDispatcherPrefix)) {
      s = Speaker::kDispatcher;
      rest = line.substr(kDispatcherPrefix.size());
    } else {
      throw ValidationError("prompt: unexpected line \"" + std::string(line) + "\"");
    }
    out.turns.push_back({s, std::string(rest)});
    out.round_of_turn.push_back(round);
  }
  if (out.turns.empty()) throw ValidationError("prompt: block has no turns");
  return out;
}

std::string clean_generation(std::string_view raw) {
  std::string t(raw);
  for (std::string_view stop : {"\nUser:", "\nRound "}) {
    const auto pos = t.find(stop);
    if (pos != std::string::npos) t.resize(pos);
  }
  return text::collapse_whitespace(t);
}

Candidate make_candidate(std::string text, CandidateSource source) {
  Candidate c;
  c.text = std::move(text);
  c.source = source;
  return c;
}

}  // namespace

std::vector<Turn> to_turns(std::span<const Utterance> utterances) {
  std::vector<Turn> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back({u.speaker, u.text});
  return out;
}

// ---------------------------------------------------------------------------
// Scenario summaries

std::string_view summary_source_name(SummarySource s) {
  return s == SummarySource::kBackend ? "backend" : "truncation-baseline";
}

ScenarioSummary summarize_scenario(std::string incident_id,
                                   std::span<const Utterance> utterances,
                                   const SummaryBackend* backend) {
  const auto first = std::find_if(utterances.begin(), utterances.end(), [](const Utterance& u) {
    return u.speaker == Speaker::kUser;
  });
  if (first == utterances.end()) throw ValidationError("no user utterances to summarize");
  ScenarioSummary s;
  s.incident_id = std::move(incident_id);
  if (backend != nullptr) {
    try {
      std::string out = text::truncate_at_word(
          text::collapse_whitespace(backend->summarize(utterances)), kMaxSummaryChars);
      if (!out.empty()) {
        s.text = std::move(out);
        s.source = SummarySource::kBackend;
        return s;
      }
    } catch (const std::exception&) {
    }
    s.backend_failed = true;
  }
  s.text = std::string(kBaselineSummaryPrefix) +
           text::truncate_at_word(text::collapse_whitespace(first->text),
                                  kBaselineSummaryChars);
  s.source = SummarySource::kTruncationBaseline;
  return s;
}

ScenarioSummary summarize_scenario(const Incident& incident, const SummaryBackend* backend) {
  return summarize_scenario(incident.incident_id, incident.utterances, backend);
}

// ---------------------------------------------------------------------------
// Retrieval

std::string flatten_dialogue(std::span<const Turn> turns) {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += role_prefix(t.speaker);
    out += text::collapse_whitespace(t.text);
  }
  return out;
}

RetrievalIndex RetrievalIndex::build(std::vector<IndexedDocument> documents, Bm25Params params) {
  if (documents.empty()) throw ValidationError("cannot build an index over no documents");
  if (!(params.k1 >= 0.0) || !(params.b >= 0.0 && params.b <= 1.0) ||
      !(params.summary_weight >= 0.0) || !(params.history_weight >= 0.0)) {
    throw ValidationError("invalid BM25 parameters");
  }
  std::set<std::string_view> ids;
  for (const auto& d : documents) {
    if (!ids.insert(d.doc_id).second) throw ValidationError("duplicate document id " + d.doc_id);
  }
  RetrievalIndex idx;
  idx.docs_ = std::move(documents);
  idx.params_ = params;
  double total = 0.0;
  for (const auto& d : idx.docs_) {
    TermCounts counts = idx.weighted_counts(d.summary, flatten_dialogue(d.turns));
    double len = 0.0;
    for (const auto& [term, c] : counts) {
      len += c;
      ++idx.df_[term];
    }
    idx.tf_.push_back(std::move(counts));
    idx.length_.push_back(len);
    total += len;
  }
  idx.avgdl_ = total / static_cast<double>(idx.docs_.size());
  for (std::size_t i = 0; i < idx.docs_.size(); ++i) {
    auto w = idx.weight_vector(idx.tf_[i], idx.length_[i]);
    double norm = 0.0;
    for (const auto& [_, v] : w) norm += v * v;
    idx.weights_.push_back(std::move(w));
    idx.norms_.push_back(std::sqrt(norm));
  }
  return idx;
}

RetrievalIndex RetrievalIndex::build(const Corpus& corpus,
                                     std::span<const ScenarioSummary> summaries,
                                     Bm25Params params) {
  if (corpus.empty()) throw ValidationError("cannot build an index over an empty corpus");
  if (summaries.size() != corpus.incident_count()) {
    throw ValidationError("need exactly one summary per incident");
  }
  std::vector<IndexedDocument> docs;
  docs.reserve(corpus.incident_count());
  for (std::size_t i = 0; i < corpus.incident_count(); ++i) {
    const Incident& inc = corpus.incidents()[i];
    docs.push_back({inc.incident_id, summaries[i].text, to_turns(inc.utterances)});
  }
  return build(std::move(docs), params);
}

const IndexedDocument& RetrievalIndex::document(std::string_view doc_id) const {
  for (const auto& d : docs_) {
    if (d.doc_id == doc_id) return d;
  }
  throw NotFoundError("no document " + std::string(doc_id));
}

RetrievalIndex::TermCounts RetrievalIndex::weighted_counts(std::string_view summary,
                                                           std::string_view history) const {
  TermCounts counts;
  if (params_.summary_weight > 0.0) {
    for (auto& t : text::word_tokens(summary)) counts[t] += params_.summary_weight;
  }
  if (params_.history_weight > 0.0) {
    for (auto& t : text::word_tokens(history)) counts[t] += params_.history_weight;
  }
  return counts;
}

std::size_t RetrievalIndex::document_frequency(std::string_view term) const {
  const auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double RetrievalIndex::document_length(std::size_t doc) const { return length_.at(doc); }

double RetrievalIndex::idf(std::string_view term) const {
  const double n = static_cast<double>(docs_.size());
  const double df = static_cast<double>(document_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::map<std::string, double, std::less<>> RetrievalIndex::weight_vector(
    const TermCounts& counts, double length) const {
  const double norm = avgdl_ > 0.0 ? length / avgdl_ : 1.0;
  const double denom_k = params_.k1 * (1.0 - params_.b + params_.b * norm);
  std::map<std::string, double, std::less<>> w;
  for (const auto& [term, c] : counts) {
    if (c <= 0.0) continue;
    w[term] = idf(term) * c * (params_.k1 + 1.0) / (c + denom_k);
  }
  return w;
}

double RetrievalIndex::bm25_counts(const TermCounts& query, std::size_t doc) const {
  const TermCounts& tf = tf_.at(doc);
  const double norm = avgdl_ > 0.0 ? length_[doc] / avgdl_ : 1.0;
  const double denom_k = params_.k1 * (1.0 - params_.b + params_.b * norm);
  double score = 0.0;
  for (const auto& [term, _] : query) {
    const auto it = tf.find(term);
    if (it == tf.end()) continue;
    const double f = it->second;
    score += idf(term) * f * (params_.k1 + 1.0) / (f + denom_k);
  }
  return score;
}

double RetrievalIndex::bm25(std::string_view query, std::size_t doc) const {
  TermCounts q;
  for (auto& t : text::word_tokens(query)) q[t] += 1.0;
  return bm25_counts(q, doc);
}

double RetrievalIndex::bm25(std::string_view summary, std::string_view history,
                            std::size_t doc) const {
  return bm25_counts(weighted_counts(summary, history), doc);
}

std::vector<RetrievalHit> RetrievalIndex::retrieve(std::string_view summary,
                                                   std::string_view history, std::size_t k,
                                                   std::optional<std::string_view> exclude) const {
  if (k == 0) throw ValidationError("k must be at least 1");
  const TermCounts q = weighted_counts(summary, history);
  double qlen = 0.0;
  for (const auto& [_, c] : q) qlen += c;
  const auto qw = weight_vector(q, qlen);
  double qnorm = 0.0;
  for (const auto& [_, v] : qw) qnorm += v * v;
  qnorm = std::sqrt(qnorm);

  std::vector<RetrievalHit> hits;
  hits.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (exclude && docs_[i].doc_id == *exclude) continue;
    double dot = 0.0;
    const auto& dw = weights_[i];
    for (const auto& [term, v] : qw) {
      const auto it = dw.find(term);
      if (it != dw.end()) dot += v * it->second;
    }
    const double denom = qnorm * norms_[i];
    const double cos = denom > 0.0 ? std::min(1.0, dot / denom) : 0.0;
    hits.push_back({docs_[i].doc_id, i, cos, bm25_counts(q, i)});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<RetrievalHit> RetrievalIndex::retrieve(std::string_view query, std::size_t k) const {
  return retrieve({}, query, k);
}

std::string RetrievalIndex::to_json() const {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["params"] = {{"k1", params_.k1},
                 {"b", params_.b},
                 {"summary_weight", params_.summary_weight},
                 {"history_weight", params_.history_weight}};
  ordered_json docs = ordered_json::array();
  for (const auto& d : docs_) {
    ordered_json turns = ordered_json::array();
    for (const auto& t : d.turns) {
      turns.push_back({{"speaker", speaker_name(t.speaker)}, {"text", t.text}});
    }
    docs.push_back({{"doc_id", d.doc_id}, {"summary", d.summary}, {"turns", std::move(turns)}});
  }
  j["documents"] = std::move(docs);
  return j.dump();
}

RetrievalIndex RetrievalIndex::from_json(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError("index snapshot has format_version " + std::to_string(version) +
                            ", expected " + std::to_string(kFormatVersion));
    }
    Bm25Params p;
    const json& pj = j.at("params");
    p.k1 = pj.at("k1").get<double>();
    p.b = pj.at("b").get<double>();
    p.summary_weight = pj.at("summary_weight").get<double>();
    p.history_weight = pj.at("history_weight").get<double>();
    std::vector<IndexedDocument> docs;
    for (const auto& dj : j.at("documents")) {
      IndexedDocument d;
      d.doc_id = dj.at("doc_id").get<std::string>();
      d.summary = dj.at("summary").get<std::string>();
      for (const auto& tj : dj.at("turns")) {
        auto s = parse_speaker(tj.at("speaker").get<std::string>());
        if (!s) throw ValidationError("index snapshot: bad speaker");
        d.turns.push_back({*s, tj.at("text").get<std::string>()});
      }
      docs.push_back(std::move(d));
    }
    return build(std::move(docs), p);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("index snapshot: ") + e.what());
  }
}

void RetrievalIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << to_json() << '\n';
  if (!out) throw IoError("failed writing " + path);
}

RetrievalIndex RetrievalIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

bool RetrievalIndex::operator==(const RetrievalIndex& other) const {
  return params_ == other.params_ && docs_ == other.docs_;
}

// ---------------------------------------------------------------------------
// Prompts

std::string render_block(std::string_view summary, std::span<const Turn> turns,
                         bool awaiting_dispatcher) {
  std::string out(kScenario);
  out += text::collapse_whitespace(summary);
  std::size_t round = 0;
  const Turn* prev = nullptr;
  for (const auto& t : turns) {
    if (round == 0 || (t.speaker == Speaker::kUser && prev->speaker == Speaker::kDispatcher)) {
      out += "\nRound " + std::to_string(++round) + ":";
    }
    out += '\n';
    out += role_prefix(t.speaker);
    out += text::collapse_whitespace(t.text);
    prev = &t;
  }
  if (awaiting_dispatcher) {
    out += '\n';
    out += kAwaiting;
  }
  return out;
}

PromptBundle assemble_prompt(std::string_view summary, const IndexedDocument* exemplar,
                             std::span<const Turn> current) {
  if (current.empty()) throw ValidationError("current conversation is empty");
  if (current.back().speaker != Speaker::kUser) {
    throw ValidationError("current conversation must end with a user turn");
  }
  PromptBundle p;
  p.preamble = std::string(kPromptPreamble);
  if (exemplar != nullptr) p.exemplar = render_block(exemplar->summary, exemplar->turns, false);
  p.current = render_block(summary, current, true);
  p.assembled = p.preamble + "\n\n";
  if (p.exemplar) p.assembled += *p.exemplar + "\n\n";
  p.assembled += p.current;
  return p;
}

ParsedPrompt parse_prompt(std::string_view assembled) {
  const std::string head = std::string(kPromptPreamble) + "\n\n";
  if (!assembled.starts_with(head)) throw ValidationError("prompt: missing preamble");
  const auto blocks = split(assembled.substr(head.size()), "\n\n");
  if (blocks.size() > 2) throw ValidationError("prompt: too many blocks");
  ParsedPrompt out;
  out.preamble = std::string(kPromptPreamble);
  if (blocks.size() == 2) {
    out.exemplar = parse_block(blocks[0]);
    if (out.exemplar->awaiting_dispatcher) {
      throw ValidationError("prompt: exemplar block awaits a reply");
    }
  }
  out.current = parse_block(blocks.back());
  if (!out.current.awaiting_dispatcher) {
    throw ValidationError("prompt: current block does not await a dispatcher reply");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suggestions

ResponseTemplates ResponseTemplates::from_json(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    ResponseTemplates t;
    t.default_ = j.at("default").get<std::string>();
    t.closing_ = j.at("closing").get<std::string>();
    if (j.contains("categories")) {
      for (const auto& [name, phrase] : j["categories"].items()) {
        t.by_category_.emplace_back(category_key(name), phrase.get<std::string>());
      }
    }
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("templates: ") + e.what());
  }
}

const ResponseTemplates& ResponseTemplates::bundled() {
  static const ResponseTemplates kBundled = from_json(resources::templates());
  return kBundled;
}

const std::string& ResponseTemplates::acknowledgment(const TipCategory& category) const {
  const std::string key = category_key(category.name());
  for (const auto& [name, phrase] : by_category_) {
    if (name == key) return phrase;
  }
  return default_;
}

std::string template_fallback(const DialogueState& state, const TipCategory& category,
                              std::span<const SlotQuestion> questions,
                              const ResponseTemplates& templates,
                              const SlotPriorities& priorities) {
  const auto next = next_question(state, category, questions, priorities);
  if (!next) return templates.closing();
  return templates.acknowledgment(category) + " " + next->question;
}

std::string_view candidate_source_name(CandidateSource s) {
  return s == CandidateSource::kBackend ? "backend" : "template";
}

SuggestionBundle suggest_response(const SuggestionRequest& request,
                                  const RetrievalIndex* index, const AssistBackends& backends,
                                  const AssistConfig& config) {
  if (request.utterances.empty()) throw ValidationError("nothing to answer: empty session");
  if (request.utterances.back().speaker != Speaker::kUser) {
    throw ValidationError("nothing to answer: last turn is from the dispatcher");
  }
  const DialogueState empty_state;
  const DialogueState& state = request.state ? *request.state : empty_state;
  const ResponseTemplates& templates =
      config.templates ? *config.templates : ResponseTemplates::bundled();
  const SlotPriorities& priorities =
      config.priorities ? *config.priorities : SlotPriorities::bundled();

  SuggestionBundle bundle;
  bundle.summary = summarize_scenario(request.session_id, request.utterances, backends.summary);
  if (bundle.summary.backend_failed) {
    bundle.warnings.push_back("summary backend failed; truncation baseline used");
  }
  const std::vector<Turn> turns = to_turns(request.utterances);

  const IndexedDocument* exemplar = nullptr;
  if (index != nullptr && index->size() > 0) {
    std::optional<std::string_view> exclude;
    if (config.exclude_doc) exclude = *config.exclude_doc;
    const auto hits = index->retrieve(bundle.summary.text, flatten_dialogue(turns), 1, exclude);
    if (!hits.empty()) {
      exemplar = &index->documents()[hits.front().index];
      bundle.retrieved_doc = hits.front().doc_id;
    }
  }
  bundle.prompt = assemble_prompt(bundle.summary.text, exemplar, turns);

  if (backends.generation != nullptr) {
    for (std::size_t c = 0; c < config.candidates; ++c) {
      for (std::size_t attempt = 0; attempt <= config.retries; ++attempt) {
        try {
          std::string out = clean_generation(
              backends.generation->generate(bundle.prompt.assembled, config.max_tokens));
          if (out.empty()) {
            bundle.warnings.push_back("generation backend returned empty text");
          } else {
            const bool dup = std::any_of(
                bundle.candidates.begin(), bundle.candidates.end(),
                [&](const Candidate& k) { return k.text == out; });
            if (!dup) bundle.candidates.push_back(make_candidate(std::move(out), CandidateSource::kBackend));
          }
          break;
        } catch (const BackendError& e) {
          bundle.warnings.push_back(std::string("generation backend: ") + e.what());
          if (!e.retryable()) break;
        } catch (const std::exception& e) {
          bundle.warnings.push_back(std::string("generation backend: ") + e.what());
          break;
        }
      }
    }
  } else {
    bundle.warnings.push_back("generation backend disabled");
  }
  bundle.degraded = bundle.candidates.empty();
  bundle.candidates.push_back(make_candidate(
      template_fallback(state, request.category, config.questions, templates, priorities),
      CandidateSource::kTemplate));

  const auto next = next_question(state, request.category, config.questions, priorities);
  std::vector<std::string> texts;
  for (const auto& c : bundle.candidates) texts.push_back(c.text);
  std::vector<EmotionLabel> labels;
  if (backends.classifier != nullptr) {
    try {
      labels = backends.classifier->classify_batch(texts);
      if (labels.size() != texts.size()) throw BackendError("label count mismatch", false);
    } catch (const std::exception& e) {
      bundle.warnings.push_back(std::string("classifier backend: ") + e.what() +
                                "; lexicon baseline used");
      labels.clear();
    }
  }
  if (labels.empty()) labels = LexiconClassifier::bundled().classify_batch(texts);
  for (std::size_t i = 0; i < bundle.candidates.size(); ++i) {
    Candidate& c = bundle.candidates[i];
    c.emotion = labels[i];
    c.support = detect_emotional_support(c.emotion.emotion, config.support);
    if (next) c.next_slot = next->slot;
    c.intent = classify_intent(c.text);
  }
  return bundle;
}

}  // namespace safechat
