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

// Live chat sessions with append-only persistence. Every mutation is written
// to the event log before it becomes visible; replaying the log (optionally
// on top of a snapshot) rebuilds every session exactly. Backend results
// (emotion labels, extracted slot answers) are stored in the log so replay
// never calls a backend.

#ifndef SAFECHAT_SERVICE_H_
#define SAFECHAT_SERVICE_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "safechat/assist.h"
#include "safechat/corpus.h"
#include "safechat/emotion.h"
#include "safechat/events.h"

namespace safechat::service {

enum class SessionStatus { kOpen, kClosed };
std::string_view status_name(SessionStatus s);

enum class ResponseSource { kAcceptedSuggestion, kEdited, kManual };
std::string_view response_source_name(ResponseSource s);  // "accepted-suggestion", ...
std::optional<ResponseSource> parse_response_source(std::string_view s);

struct Message {
  Utterance utterance;
  EmotionLabel emotion;
  std::optional<SupportFlag> support;     // dispatcher turns
  std::optional<DispatcherIntent> intent;  // dispatcher turns
  std::optional<ResponseSource> source;    // recorded responses

  bool operator==(const Message&) const = default;
};

struct Session {
  std::string session_id;
  std::string org_id;
  TipCategory category{Category::kSuspiciousActivity};
  bool anonymous = false;
  Timestamp created_at;
  Timestamp last_activity;
  SessionStatus status = SessionStatus::kOpen;
  std::vector<Message> messages;
  DialogueState state;
  std::vector<PolarityScore> polarity_trace;  // one per user message
  std::size_t suggestions_issued = 0;

  std::vector<Utterance> utterances() const;
};

// Canonical JSON used by GET /v1/sessions/{id}, snapshots and the replay
// check. The next question is derived with the bundled tables.
std::string session_json(const Session& session,
                         std::span<const SlotQuestion> questions = {});
Session parse_session(std::string_view json_text);

enum class EventKind {
  kSessionCreated,
  kMessageAppended,
  kSuggestionIssued,
  kResponseRecorded,
  kSessionClosed,
};
std::string_view event_kind_name(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct EventRecord {
  std::uint64_t seq = 0;
  std::string session_id;
  EventKind kind = EventKind::kSessionCreated;
  std::string payload;  // JSON object text
  Timestamp ts;

  std::string to_json() const;
  static EventRecord parse(std::string_view line, std::size_t line_no = 1);
};

// Append-only JSONL log. Appends are serialized; each line is flushed and,
// when requested, fsynced before append returns.
class EventLog {
 public:
  EventLog() = default;  // in-memory only
  EventLog(const std::string& path, bool fsync);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Assigns the next sequence number and persists the record.
  EventRecord append(std::string session_id, EventKind kind, std::string payload, Timestamp ts);
  std::uint64_t last_seq() const;
  std::size_t size() const;
  void reset_seq(std::uint64_t seq);

  // Reads a log file. A torn final line (no trailing newline, undecodable)
  // is dropped; any other defect throws ParseError. Sequence numbers must
  // increase by one.
  // `valid_bytes` receives the length of the well-formed prefix.
  static std::vector<EventRecord> read(const std::string& path,
                                       std::uintmax_t* valid_bytes = nullptr);

 private:
  mutable std::mutex mu_;
  std::FILE* file_ = nullptr;
  bool fsync_ = false;
  std::uint64_t seq_ = 0;
  std::size_t count_ = 0;
};

struct ServiceBackends {
  const EmotionClassifier* classifier = nullptr;  // lexicon baseline when null
  const QaBackend* qa = nullptr;                  // pattern baseline when null
  const GenerationBackend* generation = nullptr;
  const SummaryBackend* summary = nullptr;
  const RetrievalIndex* index = nullptr;
};

struct ServiceOptions {
  std::string data_dir;  // empty: nothing persisted
  bool fsync = false;
  std::size_t snapshot_every = 0;  // events between snapshots, 0 = never
  std::function<Timestamp()> clock;  // system clock when empty
  AssistConfig assist;
  // Historical incidents included in analytics.
  std::optional<Corpus> corpus;
};

struct Filters {
  std::optional<std::string> category;
  std::optional<SessionStatus> status;
  std::string origin = "all";  // all | sessions | corpus
};

class Service {
 public:
  Service(ServiceOptions options, ServiceBackends backends);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Throws ValidationError for excluded or unknown categories.
  std::string create_session(const std::string& org_id, std::string_view category, bool anonymous);
  // Throws NotFoundError / ConflictError (closed session) / ValidationError.
  std::string append_message(const std::string& session_id, Speaker speaker, const std::string& text,
                             std::optional<Timestamp> ts = std::nullopt);
  // Suggestion bundle JSON. ConflictError when the session is closed, empty
  // or ends with a dispatcher turn.
  std::string get_suggestions(const std::string& session_id, std::size_t n = 1);
  std::string record_response(const std::string& session_id, const std::string& text,
                              ResponseSource source);
  std::string close_session(const std::string& session_id);

  std::string session_summary(const std::string& session_id) const;
  std::shared_ptr<const Session> session(const std::string& session_id) const;
  // Ordered by last activity, newest first.
  std::string list_sessions(const Filters& filters = {}) const;
  std::vector<std::string> session_ids() const;

  // kind: support-rate | polarity | stage-sentiment. Empty data gives an
  // empty row list.
  std::string analytics(std::string_view kind, std::string_view group_by,
                        const Filters& filters = {}) const;

  // Blocks until the session has more than `after` messages or the timeout
  // passes. Returns whether it did.
  bool wait_for_messages(const std::string& session_id, std::size_t after,
                         std::chrono::milliseconds timeout) const;

  std::uint64_t last_seq() const { return log_->last_seq(); }
  std::size_t log_size() const { return log_->size(); }
  void snapshot();

 private:
  struct Entry {
    std::mutex write;        // one writer per session
    mutable std::mutex ptr;  // guards the pointer swap only
    std::shared_ptr<const Session> current;
  };

  const EmotionClassifier& classifier() const;
  const QaBackend& qa() const;
  Timestamp now() const;
  Entry& find(const std::string& id) const;
  std::shared_ptr<const Session> load(const Entry& e) const;
  std::vector<std::shared_ptr<const Session>> all_sessions() const;
  void replay(const EventRecord& rec);
  std::string add_message(const std::string& session_id, Speaker speaker, const std::string& text,
                          std::optional<Timestamp> ts, std::optional<ResponseSource> source);
  std::shared_ptr<const Session> commit(Entry& e, const std::string& id, EventKind kind,
                                        std::string payload);
  void publish(Entry& e, std::shared_ptr<const Session> s);
  void maybe_snapshot();

  ServiceOptions options_;
  ServiceBackends backends_;
  std::unique_ptr<EventLog> log_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<Entry>, std::less<>> sessions_;
  std::uint64_t next_id_ = 1;
  // Held shared by every commit, exclusively while a snapshot is taken.
  mutable std::shared_mutex commit_mu_;
  mutable std::mutex notify_mu_;
  mutable std::condition_variable notify_cv_;
  std::mutex snapshot_mu_;
  CorpusLabels corpus_labels_;
};

}  // namespace safechat::service

#endif  // SAFECHAT_SERVICE_H_
