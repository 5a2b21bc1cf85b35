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

// Response suggestion harness: scenario summaries, a BM25 index over past
// conversations, prompt assembly and annotated candidate generation.

#ifndef SAFECHAT_ASSIST_H_
#define SAFECHAT_ASSIST_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safechat/corpus.h"
#include "safechat/emotion.h"
#include "safechat/events.h"

namespace safechat {

struct Turn {
  Speaker speaker = Speaker::kUser;
  std::string text;

  bool operator==(const Turn&) const = default;
};

std::vector<Turn> to_turns(std::span<const Utterance> utterances);

// ---------------------------------------------------------------------------
// Scenario summaries

enum class SummarySource { kBackend, kTruncationBaseline };
std::string_view summary_source_name(SummarySource s);

struct ScenarioSummary {
  std::string incident_id;
  std::string text;  // single line, at most kMaxSummaryChars bytes
  SummarySource source = SummarySource::kTruncationBaseline;
  bool backend_failed = false;  // a configured backend errored or returned nothing
};

inline constexpr std::size_t kMaxSummaryChars = 500;
inline constexpr std::size_t kBaselineSummaryChars = 240;
inline constexpr std::string_view kBaselineSummaryPrefix = "A user is reporting: ";

class SummaryBackend {
 public:
  virtual ~SummaryBackend() = default;
  virtual std::string summarize(std::span<const Utterance> utterances) const = 0;
};

// Backend output when available, else the prefix plus the first user message
// cut to 240 bytes at a word boundary. Throws ValidationError when there is no
// user utterance.
ScenarioSummary summarize_scenario(const Incident& incident,
                                   const SummaryBackend* backend = nullptr);
ScenarioSummary summarize_scenario(std::string incident_id,
                                   std::span<const Utterance> utterances,
                                   const SummaryBackend* backend = nullptr);

// ---------------------------------------------------------------------------
// Retrieval

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  // Term-frequency weights of the summary and dialogue parts of a document.
  double summary_weight = 1.0;
  double history_weight = 1.0;

  bool operator==(const Bm25Params&) const = default;
};

struct IndexedDocument {
  std::string doc_id;
  std::string summary;
  std::vector<Turn> turns;

  bool operator==(const IndexedDocument&) const = default;
};

// "User: ...\nDispatcher: ..." with one line per turn.
std::string flatten_dialogue(std::span<const Turn> turns);

struct RetrievalHit {
  std::string doc_id;
  std::size_t index = 0;  // position in documents()
  double score = 0.0;     // cosine of BM25 weight vectors, in [0, 1]
  double bm25 = 0.0;      // raw BM25 of the query against the document
};

// Immutable after construction. Documents keep insertion order; retrieval
// ranks by the cosine between the BM25 term-weight vectors of the query and
// each document, so a stored document always retrieves itself first.
class RetrievalIndex {
 public:
  static constexpr int kFormatVersion = 1;

  // Throws ValidationError on an empty document set or duplicate ids.
  static RetrievalIndex build(std::vector<IndexedDocument> documents, Bm25Params params = {});
  // One summary per incident, aligned by position.
  static RetrievalIndex build(const Corpus& corpus, std::span<const ScenarioSummary> summaries,
                              Bm25Params params = {});

  const std::vector<IndexedDocument>& documents() const { return docs_; }
  const Bm25Params& params() const { return params_; }
  std::size_t size() const { return docs_.size(); }
  const IndexedDocument& document(std::string_view doc_id) const;  // NotFoundError

  std::size_t document_frequency(std::string_view term) const;
  double document_length(std::size_t doc) const;
  double average_length() const { return avgdl_; }
  double idf(std::string_view term) const;

  // Raw BM25 summed over the distinct query tokens.
  double bm25(std::string_view query, std::size_t doc) const;
  double bm25(std::string_view summary, std::string_view history, std::size_t doc) const;

  // Top-k by score, ties broken by doc_id. Throws ValidationError when k == 0.
  std::vector<RetrievalHit> retrieve(std::string_view summary, std::string_view history,
                                     std::size_t k,
                                     std::optional<std::string_view> exclude = {}) const;
  std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k) const;

  // {"format_version": 1, "params": {...}, "documents": [...]}.
  std::string to_json() const;
  // Throws ValidationError on a version mismatch or malformed snapshot.
  static RetrievalIndex from_json(std::string_view json_text);
  void save(const std::string& path) const;
  static RetrievalIndex load(const std::string& path);

  bool operator==(const RetrievalIndex& other) const;

 private:
  using TermCounts = std::map<std::string, double, std::less<>>;

  RetrievalIndex() = default;
  TermCounts weighted_counts(std::string_view summary, std::string_view history) const;
  double bm25_counts(const TermCounts& query, std::size_t doc) const;
  std::map<std::string, double, std::less<>> weight_vector(const TermCounts& counts,
                                                           double length) const;

  std::vector<IndexedDocument> docs_;
  Bm25Params params_;
  std::vector<TermCounts> tf_;
  std::vector<double> length_;
  std::map<std::string, std::size_t, std::less<>> df_;
  double avgdl_ = 0.0;
  std::vector<std::map<std::string, double, std::less<>>> weights_;
  std::vector<double> norms_;
};

// ---------------------------------------------------------------------------
// Prompts

extern const std::string_view kPromptPreamble;

struct PromptBundle {
  std::string preamble;
  std::optional<std::string> exemplar;
  std::string current;
  std::string assembled;

  bool operator==(const PromptBundle&) const = default;
};

// "- Scenario: {summary}" then "Round k:" headers, a new round starting at
// every user turn that follows a dispatcher turn. Whitespace runs inside
// texts collapse to one space so every turn stays on one line. The current
// block ends with an empty "Dispatcher:" line.
std::string render_block(std::string_view summary, std::span<const Turn> turns,
                         bool awaiting_dispatcher);

// Throws ValidationError when `current` is empty or ends with a dispatcher
// turn.
PromptBundle assemble_prompt(std::string_view summary, const IndexedDocument* exemplar,
                             std::span<const Turn> current);

struct ParsedBlock {
  std::string summary;
  std::vector<Turn> turns;
  std::vector<std::size_t> round_of_turn;  // 1-based round per turn
  bool awaiting_dispatcher = false;
};

struct ParsedPrompt {
  std::string preamble;
  std::optional<ParsedBlock> exemplar;
  ParsedBlock current;
};

// Inverse of assemble_prompt. Throws ValidationError on text outside the
// grammar.
ParsedPrompt parse_prompt(std::string_view assembled);

// ---------------------------------------------------------------------------
// Suggestions

// Prompt in, text out. Transport failures raise BackendError.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string generate(const std::string& prompt, std::size_t max_tokens) const = 0;
};

class ResponseTemplates {
 public:
  static const ResponseTemplates& bundled();
  // {"default": "...", "categories": {...}, "closing": "..."}
  static ResponseTemplates from_json(std::string_view json_text);

  const std::string& acknowledgment(const TipCategory& category) const;
  const std::string& closing() const { return closing_; }

 private:
  std::string default_;
  std::vector<std::pair<std::string, std::string>> by_category_;  // category_key
  std::string closing_;
};

// Acknowledgment plus the next question, or the closing phrase when every
// slot is filled.
std::string template_fallback(const DialogueState& state, const TipCategory& category,
                              std::span<const SlotQuestion> questions,
                              const ResponseTemplates& templates = ResponseTemplates::bundled(),
                              const SlotPriorities& priorities = SlotPriorities::bundled());

enum class CandidateSource { kBackend, kTemplate };
std::string_view candidate_source_name(CandidateSource s);

struct Candidate {
  std::string text;
  CandidateSource source = CandidateSource::kTemplate;
  EmotionLabel emotion;
  SupportFlag support;
  std::optional<SlotId> next_slot;
  std::optional<DispatcherIntent> intent;
};

struct SuggestionBundle {
  std::vector<Candidate> candidates;  // never empty; template last
  std::optional<std::string> retrieved_doc;
  PromptBundle prompt;
  ScenarioSummary summary;
  bool degraded = false;  // no backend candidate was produced
  std::vector<std::string> warnings;
};

struct SuggestionRequest {
  std::string session_id;
  TipCategory category{Category::kSuspiciousActivity};
  std::span<const Utterance> utterances;
  const DialogueState* state = nullptr;  // empty state when null
};

struct AssistBackends {
  const GenerationBackend* generation = nullptr;  // disabled when null
  const SummaryBackend* summary = nullptr;
  const EmotionClassifier* classifier = nullptr;  // lexicon baseline when null
};

struct AssistConfig {
  std::size_t candidates = 1;  // backend calls per suggestion
  std::size_t max_tokens = 256;
  std::size_t retries = 1;  // extra attempts after a retryable failure
  std::vector<SlotQuestion> questions = build_slot_questions();
  const ResponseTemplates* templates = nullptr;  // bundled when null
  const SlotPriorities* priorities = nullptr;    // bundled when null
  SupportSet support = SupportSet::standard();
  // Excluded from retrieval, e.g. the incident being evaluated.
  std::optional<std::string> exclude_doc;
};

// Throws ValidationError unless the utterances end with a user turn. Backend
// failures never escape: they are recorded as warnings and the bundle falls
// back to the template candidate.
SuggestionBundle suggest_response(const SuggestionRequest& request,
                                  const RetrievalIndex* index, const AssistBackends& backends,
                                  const AssistConfig& config = {});

}  // namespace safechat

#endif  // SAFECHAT_ASSIST_H_
