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

#include "safechat/service.h"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "safechat/error.h"
#include "safechat/eval.h"
#include "safechat/text.h"

namespace safechat::service {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::string_view kStageNames[] = {"initiation", "gathering", "elaboration"};

const std::vector<SlotQuestion>& default_questions() {
  static const auto q = build_slot_questions();
  return q;
}

Timestamp ts_field(const json& j, const char* name) {
  auto ts = Timestamp::parse(j.at(name).get<std::string>());
  if (!ts) throw ValidationError(std::string("invalid timestamp in ") + name);
  return *ts;
}

ojson label_json(const EmotionLabel& l) {
  return ojson{{"label", emotion_name(l.emotion)}, {"confidence", l.confidence}};
}

EmotionLabel parse_label(const json& j) {
  auto e = parse_emotion(j.at("label").get<std::string>());
  if (!e) throw ValidationError("unknown emotion label");
  return {*e, j.at("confidence").get<double>()};
}

ojson answer_json(SlotId slot, const SlotAnswer& a) {
  return ojson{{"slot", slot_name(slot)},
               {"text", a.text},
               {"utterance_index", a.utterance_index},
               {"score", a.score}};
}

SlotId parse_slot_field(const json& j) {
  auto s = parse_slot(j.at("slot").get<std::string>());
  if (!s) throw ValidationError("unknown slot");
  return *s;
}

ojson candidate_json(const Candidate& c, std::span<const SlotQuestion> questions) {
  ojson j;
  j["text"] = c.text;
  j["source"] = candidate_source_name(c.source);
  j["emotion"] = label_json(c.emotion);
  j["support"] = c.support.is_support;
  if (c.next_slot) {
    j["next_slot"] = slot_name(*c.next_slot);
    auto q = std::find_if(questions.begin(), questions.end(),
                          [&](const SlotQuestion& sq) { return sq.slot == *c.next_slot; });
    j["next_question"] = q != questions.end() ? ojson(q->question) : ojson(nullptr);
  } else {
    j["next_slot"] = nullptr;
    j["next_question"] = nullptr;
  }
  j["intent"] = c.intent ? ojson(c.intent->name()) : ojson(nullptr);
  return j;
}

// Applies one event to a session value. Live commits and replay share this
// function, which is what makes replay exact.
Session apply_event(Session s, const EventRecord& rec) {
  const json p = json::parse(rec.payload);
  switch (rec.kind) {
    case EventKind::kSessionCreated: {
      Session fresh;
      fresh.session_id = rec.session_id;
      fresh.org_id = p.at("org_id").get<std::string>();
      fresh.category = TipCategory::parse(p.at("category").get<std::string>());
      fresh.anonymous = p.at("anonymous").get<bool>();
      fresh.created_at = rec.ts;
      fresh.last_activity = rec.ts;
      return fresh;
    }
    case EventKind::kMessageAppended:
    case EventKind::kResponseRecorded: {
      Message m;
      auto speaker = parse_speaker(p.at("speaker").get<std::string>());
      if (!speaker) throw ValidationError("bad speaker in event " + std::to_string(rec.seq));
      m.utterance.speaker = *speaker;
      m.utterance.text = p.at("text").get<std::string>();
      m.utterance.ts = ts_field(p, "ts");
      m.emotion = parse_label(p.at("emotion"));
      if (p.contains("source")) m.source = parse_response_source(p["source"].get<std::string>());
      const std::size_t index = s.messages.size();
      if (m.utterance.speaker == Speaker::kDispatcher) {
        m.support = detect_emotional_support(m.emotion.emotion);
        if (p.contains("intent") && p["intent"].is_string())
          m.intent = DispatcherIntent::parse(p["intent"].get<std::string>());
      }
      s.messages.push_back(std::move(m));
      if (s.messages.back().utterance.speaker == Speaker::kUser) {
        std::vector<Emotion> user;
        for (const auto& msg : s.messages)
          if (msg.utterance.speaker == Speaker::kUser) user.push_back(msg.emotion.emotion);
        s.polarity_trace.push_back(polarity_score(user, SentimentMapping::standard()));
        std::array<std::vector<SlotAnswer>, kSlotCount> answers;
        for (auto slot : all_slots()) answers[static_cast<std::size_t>(slot)] = s.state.answers(slot);
        for (const auto& a : p.at("answers")) {
          answers[static_cast<std::size_t>(parse_slot_field(a))].push_back(
              {a.at("text").get<std::string>(), a.at("utterance_index").get<std::size_t>(),
               a.at("score").get<double>()});
        }
        s.state = state_from_parts(std::move(answers), index);
      }
      s.last_activity = rec.ts;
      return s;
    }
    case EventKind::kSuggestionIssued:
      ++s.suggestions_issued;
      return s;
    case EventKind::kSessionClosed:
      s.status = SessionStatus::kClosed;
      s.last_activity = rec.ts;
      return s;
  }
  return s;
}

bool category_matches(const Filters& f, const std::string& category) {
  return !f.category || category_key(*f.category) == category_key(category);
}

}  // namespace

std::string_view status_name(SessionStatus s) {
  return s == SessionStatus::kOpen ? "open" : "closed";
}

std::string_view response_source_name(ResponseSource s) {
  switch (s) {
    case ResponseSource::kAcceptedSuggestion: return "accepted-suggestion";
    case ResponseSource::kEdited: return "edited";
    case ResponseSource::kManual: return "manual";
  }
  return "manual";
}

std::optional<ResponseSource> parse_response_source(std::string_view s) {
  if (s == "accepted-suggestion") return ResponseSource::kAcceptedSuggestion;
  if (s == "edited") return ResponseSource::kEdited;
  if (s == "manual") return ResponseSource::kManual;
  return std::nullopt;
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::kSessionCreated: return "session_created";
    case EventKind::kMessageAppended: return "message_appended";
    case EventKind::kSuggestionIssued: return "suggestion_issued";
    case EventKind::kResponseRecorded: return "response_recorded";
    case EventKind::kSessionClosed: return "session_closed";
  }
  return "session_created";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (auto k : {EventKind::kSessionCreated, EventKind::kMessageAppended, EventKind::kSuggestionIssued,
                 EventKind::kResponseRecorded, EventKind::kSessionClosed})
    if (event_kind_name(k) == s) return k;
  return std::nullopt;
}

std::vector<Utterance> Session::utterances() const {
  std::vector<Utterance> out;
  out.reserve(messages.size());
  for (const auto& m : messages) out.push_back(m.utterance);
  return out;
}

std::string session_json(const Session& s, std::span<const SlotQuestion> questions) {
  if (questions.empty()) questions = default_questions();
  ojson j;
  j["session_id"] = s.session_id;
  j["org_id"] = s.org_id;
  j["category"] = s.category.name();
  j["anonymous"] = s.anonymous;
  j["status"] = status_name(s.status);
  j["created_at"] = s.created_at.to_string();
  j["last_activity"] = s.last_activity.to_string();
  auto msgs = ojson::array();
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    const auto& m = s.messages[i];
    ojson mj;
    mj["index"] = i;
    mj["speaker"] = speaker_name(m.utterance.speaker);
    mj["text"] = m.utterance.text;
    mj["ts"] = m.utterance.ts.to_string();
    mj["emotion"] = label_json(m.emotion);
    if (m.support) mj["support"] = m.support->is_support;
    if (m.utterance.speaker == Speaker::kDispatcher)
      mj["intent"] = m.intent ? ojson(m.intent->name()) : ojson(nullptr);
    if (m.source) mj["source"] = response_source_name(*m.source);
    msgs.push_back(std::move(mj));
  }
  j["messages"] = std::move(msgs);
  j["polarity"] = s.polarity_trace.empty() ? ojson(nullptr) : ojson(s.polarity_trace.back().value);
  auto trace = ojson::array();
  for (const auto& p : s.polarity_trace) trace.push_back(p.value);
  j["polarity_trace"] = std::move(trace);
  ojson slots = ojson::object();
  for (auto slot : all_slots()) {
    auto arr = ojson::array();
    for (const auto& a : s.state.answers(slot))
      arr.push_back({{"text", a.text}, {"utterance_index", a.utterance_index}, {"score", a.score}});
    slots[std::string(slot_name(slot))] = std::move(arr);
  }
  j["slots"] = std::move(slots);
  j["last_processed"] = s.state.last_processed() ? ojson(*s.state.last_processed()) : ojson(nullptr);
  if (s.category.is_excluded()) {
    j["next_question"] = nullptr;
  } else {
    auto nq = next_question(s.state, s.category, questions);
    j["next_question"] = nq ? ojson{{"slot", slot_name(nq->slot)}, {"question", nq->question}}
                            : ojson(nullptr);
  }
  j["suggestions_issued"] = s.suggestions_issued;
  return j.dump();
}

Session parse_session(std::string_view text) {
  try {
    const json j = json::parse(text);
    Session s;
    s.session_id = j.at("session_id").get<std::string>();
    s.org_id = j.at("org_id").get<std::string>();
    s.category = TipCategory::parse(j.at("category").get<std::string>());
    s.anonymous = j.at("anonymous").get<bool>();
    auto status = j.at("status").get<std::string>();
    if (status != "open" && status != "closed") throw ValidationError("bad status " + status);
    s.status = status == "open" ? SessionStatus::kOpen : SessionStatus::kClosed;
    s.created_at = ts_field(j, "created_at");
    s.last_activity = ts_field(j, "last_activity");
    std::vector<Emotion> user;
    for (const auto& mj : j.at("messages")) {
      Message m;
      auto sp = parse_speaker(mj.at("speaker").get<std::string>());
      if (!sp) throw ValidationError("bad speaker");
      m.utterance.speaker = *sp;
      m.utterance.text = mj.at("text").get<std::string>();
      m.utterance.ts = ts_field(mj, "ts");
      m.emotion = parse_label(mj.at("emotion"));
      if (m.utterance.speaker == Speaker::kDispatcher) {
        m.support = detect_emotional_support(m.emotion.emotion);
        if (mj.contains("intent") && mj["intent"].is_string())
          m.intent = DispatcherIntent::parse(mj["intent"].get<std::string>());
      }
      if (mj.contains("source")) m.source = parse_response_source(mj["source"].get<std::string>());
      s.messages.push_back(std::move(m));
    }
    std::size_t n_user = 0;
    for (const auto& v : j.at("polarity_trace")) {
      ++n_user;
      s.polarity_trace.push_back({v.get<double>(), n_user});
    }
    std::array<std::vector<SlotAnswer>, kSlotCount> answers;
    for (auto slot : all_slots()) {
      for (const auto& a : j.at("slots").at(std::string(slot_name(slot))))
        answers[static_cast<std::size_t>(slot)].push_back(
            {a.at("text").get<std::string>(), a.at("utterance_index").get<std::size_t>(),
             a.at("score").get<double>()});
    }
    std::optional<std::size_t> last;
    if (!j.at("last_processed").is_null()) last = j["last_processed"].get<std::size_t>();
    s.state = state_from_parts(std::move(answers), last);
    s.suggestions_issued = j.at("suggestions_issued").get<std::size_t>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed session: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Event log

std::string EventRecord::to_json() const {
  ojson j;
  j["seq"] = seq;
  j["ts"] = ts.to_string();
  j["session_id"] = session_id;
  j["kind"] = event_kind_name(kind);
  j["payload"] = ojson::parse(payload);
  return j.dump();
}

EventRecord EventRecord::parse(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(line_no, "", e.what());
  }
  EventRecord r;
  try {
    r.seq = j.at("seq").get<std::uint64_t>();
    auto ts = Timestamp::parse(j.at("ts").get<std::string>());
    if (!ts) throw ParseError(line_no, "ts", "invalid timestamp");
    r.ts = *ts;
    r.session_id = j.at("session_id").get<std::string>();
    auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw ParseError(line_no, "kind", "unknown event kind");
    r.kind = *kind;
    if (!j.at("payload").is_object()) throw ParseError(line_no, "payload", "not an object");
    r.payload = ojson::parse(j["payload"].dump()).dump();
  } catch (const json::exception& e) {
    throw ParseError(line_no, "", e.what());
  }
  return r;
}

EventLog::EventLog(const std::string& path, bool fsync) : fsync_(fsync) {
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw IoError("cannot open event log " + path);
}

EventLog::~EventLog() {
  if (file_) std::fclose(file_);
}

EventRecord EventLog::append(std::string session_id, EventKind kind, std::string payload, Timestamp ts) {
  std::lock_guard lock(mu_);
  EventRecord rec{seq_ + 1, std::move(session_id), kind, std::move(payload), ts};
  if (file_) {
    const std::string line = rec.to_json() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
      throw IoError("event log write failed");
    if (fsync_ && ::fsync(::fileno(file_)) != 0) throw IoError("event log fsync failed");
  }
  seq_ = rec.seq;
  ++count_;
  return rec;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

void EventLog::reset_seq(std::uint64_t seq) {
  std::lock_guard lock(mu_);
  seq_ = seq;
}

std::vector<EventRecord> EventLog::read(const std::string& path, std::uintmax_t* valid_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event log " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  std::vector<EventRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::uintmax_t good = 0;
  while (pos < data.size()) {
    ++line_no;
    const auto nl = data.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string_view line(data.data() + pos, (terminated ? nl : data.size()) - pos);
    const std::size_t next = terminated ? nl + 1 : data.size();
    if (text::trim(line).empty()) {
      pos = next;
      good = next;
      continue;
    }
    EventRecord rec;
    try {
      rec = EventRecord::parse(line, line_no);
    } catch (const ParseError&) {
      if (!terminated) break;  // torn tail from an interrupted append
      throw;
    }
    const std::uint64_t expect = out.empty() ? rec.seq : out.back().seq + 1;
    if (out.empty() ? rec.seq == 0 : rec.seq != expect)
      throw ParseError(line_no, "seq", "sequence number " + std::to_string(rec.seq) + " out of order");
    out.push_back(std::move(rec));
    pos = next;
    good = next;
  }
  if (valid_bytes) *valid_bytes = good;
  return out;
}

// ---------------------------------------------------------------------------
// Service

Service::Service(ServiceOptions options, ServiceBackends backends)
    : options_(std::move(options)), backends_(backends) {
  std::uint64_t seq = 0;
  if (!options_.data_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options_.data_dir, ec);
    if (ec) throw IoError("cannot create data dir " + options_.data_dir + ": " + ec.message());
    const fs::path snap = fs::path(options_.data_dir) / "snapshot.json";
    if (fs::exists(snap)) {
      std::ifstream in(snap);
      std::stringstream ss;
      ss << in.rdbuf();
      json j;
      try {
        j = json::parse(ss.str());
        if (j.at("format_version").get<int>() != 1) throw ValidationError("unsupported snapshot version");
        seq = j.at("seq").get<std::uint64_t>();
        next_id_ = j.at("next_id").get<std::uint64_t>();
        for (const auto& sj : j.at("sessions")) {
          auto s = std::make_shared<const Session>(parse_session(sj.dump()));
          auto e = std::make_unique<Entry>();
          e->current = s;
          sessions_.emplace(s->session_id, std::move(e));
        }
      } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed snapshot: ") + e.what());
      }
    }
    const fs::path log_path = fs::path(options_.data_dir) / "events.jsonl";
    if (fs::exists(log_path)) {
      std::uintmax_t good = 0;
      auto records = EventLog::read(log_path.string(), &good);
      if (good < fs::file_size(log_path)) fs::resize_file(log_path, good);
      for (const auto& rec : records) {
        if (rec.seq <= seq) continue;
        replay(rec);
        seq = rec.seq;
      }
    }
    log_ = std::make_unique<EventLog>(log_path.string(), options_.fsync);
  } else {
    log_ = std::make_unique<EventLog>();
  }
  log_->reset_seq(seq);
  if (options_.corpus) corpus_labels_ = annotate_corpus(*options_.corpus, classifier());
}

Service::~Service() = default;

const EmotionClassifier& Service::classifier() const {
  return backends_.classifier ? *backends_.classifier : LexiconClassifier::bundled();
}

const QaBackend& Service::qa() const {
  return backends_.qa ? *backends_.qa : PatternQaBackend::bundled();
}

Timestamp Service::now() const {
  if (options_.clock) return options_.clock();
  return Timestamp(std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()));
}

void Service::replay(const EventRecord& rec) {
  if (rec.kind == EventKind::kSessionCreated) {
    auto e = std::make_unique<Entry>();
    e->current = std::make_shared<const Session>(apply_event({}, rec));
    const auto& id = rec.session_id;
    if (id.rfind("s-", 0) == 0) next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(2)) + 1);
    if (!sessions_.emplace(id, std::move(e)).second)
      throw ValidationError("event " + std::to_string(rec.seq) + ": duplicate session " + id);
    return;
  }
  auto it = sessions_.find(rec.session_id);
  if (it == sessions_.end())
    throw ValidationError("event " + std::to_string(rec.seq) + ": unknown session " + rec.session_id);
  it->second->current = std::make_shared<const Session>(apply_event(*it->second->current, rec));
}

Service::Entry& Service::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("session " + id + " not found");
  return *it->second;
}

std::shared_ptr<const Session> Service::load(const Entry& e) const {
  std::lock_guard lock(e.ptr);
  return e.current;
}

void Service::publish(Entry& e, std::shared_ptr<const Session> s) {
  {
    std::lock_guard lock(e.ptr);
    e.current = std::move(s);
  }
  std::lock_guard lock(notify_mu_);
  notify_cv_.notify_all();
}

std::shared_ptr<const Session> Service::commit(Entry& e, const std::string& id, EventKind kind,
                                               std::string payload) {
  std::shared_ptr<const Session> next;
  {
    std::shared_lock commit_lock(commit_mu_);
    auto rec = log_->append(id, kind, std::move(payload), now());
    next = std::make_shared<const Session>(apply_event(*load(e), rec));
    publish(e, next);
  }
  maybe_snapshot();
  return next;
}

void Service::maybe_snapshot() {
  if (options_.snapshot_every == 0 || options_.data_dir.empty()) return;
  if (log_->size() % options_.snapshot_every == 0) snapshot();
}

void Service::snapshot() {
  if (options_.data_dir.empty()) return;
  std::lock_guard snap_lock(snapshot_mu_);
  ojson j;
  {
    std::unique_lock commit_lock(commit_mu_);
    std::shared_lock lock(sessions_mu_);
    j["format_version"] = 1;
    j["seq"] = log_->last_seq();
    j["next_id"] = next_id_;
    auto arr = ojson::array();
    for (const auto& [id, e] : sessions_) arr.push_back(ojson::parse(session_json(*load(*e))));
    j["sessions"] = std::move(arr);
  }
  const fs::path dir(options_.data_dir);
  const fs::path tmp = dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write snapshot");
    out << j.dump() << '\n';
    if (!out) throw IoError("snapshot write failed");
  }
  fs::rename(tmp, dir / "snapshot.json");
}

std::string Service::create_session(const std::string& org_id, std::string_view category,
                                    bool anonymous) {
  if (text::trim(org_id).empty()) throw ValidationError("org_id must be non-empty");
  const auto cat = TipCategory::parse(category);
  if (cat.is_excluded()) throw ValidationError("category " + std::string(category) + " is excluded");
  ojson payload{{"org_id", org_id}, {"category", cat.name()}, {"anonymous", anonymous}};
  std::string id;
  {
    std::shared_lock commit_lock(commit_mu_);
    std::unique_lock lock(sessions_mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s-%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
    auto rec = log_->append(id, EventKind::kSessionCreated, payload.dump(), now());
    auto e = std::make_unique<Entry>();
    e->current = std::make_shared<const Session>(apply_event({}, rec));
    sessions_.emplace(id, std::move(e));
  }
  maybe_snapshot();
  return id;
}

std::string Service::add_message(const std::string& session_id, Speaker speaker,
                                 const std::string& text, std::optional<Timestamp> ts,
                                 std::optional<ResponseSource> source) {
  if (text::trim(text).empty()) throw ValidationError("text must be non-empty");
  auto& e = find(session_id);
  std::lock_guard write(e.write);
  const auto cur = load(e);
  if (cur->status == SessionStatus::kClosed)
    throw ConflictError("session " + session_id + " is closed");
  const Timestamp at = ts ? *ts : now();
  if (!cur->messages.empty() && at < cur->messages.back().utterance.ts)
    throw ValidationError("message timestamp precedes the previous message");

  const std::vector<std::string> texts{text};
  const auto labels = classifier().classify_batch(texts);
  if (labels.size() != 1) throw BackendError("classifier returned " + std::to_string(labels.size()) + " labels", false);

  ojson payload;
  payload["speaker"] = speaker_name(speaker);
  payload["text"] = text;
  payload["ts"] = at.to_string();
  payload["emotion"] = label_json(labels.front());
  if (source) payload["source"] = response_source_name(*source);
  if (speaker == Speaker::kDispatcher) {
    auto intent = classify_intent(text);
    payload["intent"] = intent ? ojson(intent->name()) : ojson(nullptr);
  } else {
    auto history = cur->utterances();
    history.push_back({speaker, text, at});
    const auto next = update_state(cur->state, history, options_.assist.questions, qa());
    auto answers = ojson::array();
    for (auto slot : all_slots()) {
      const auto& before = cur->state.answers(slot);
      const auto& after = next.answers(slot);
      for (std::size_t i = before.size(); i < after.size(); ++i) answers.push_back(answer_json(slot, after[i]));
    }
    payload["answers"] = std::move(answers);
  }
  auto kind = source ? EventKind::kResponseRecorded : EventKind::kMessageAppended;
  return session_json(*commit(e, session_id, kind, payload.dump()), options_.assist.questions);
}

std::string Service::append_message(const std::string& session_id, Speaker speaker,
                                    const std::string& text, std::optional<Timestamp> ts) {
  return add_message(session_id, speaker, text, ts, std::nullopt);
}

std::string Service::record_response(const std::string& session_id, const std::string& text,
                                     ResponseSource source) {
  return add_message(session_id, Speaker::kDispatcher, text, std::nullopt, source);
}

std::string Service::get_suggestions(const std::string& session_id, std::size_t n) {
  if (n == 0 || n > 10) throw ValidationError("n must be between 1 and 10");
  auto& e = find(session_id);
  std::lock_guard write(e.write);
  const auto cur = load(e);
  if (cur->status == SessionStatus::kClosed) throw ConflictError("session " + session_id + " is closed");
  if (cur->messages.empty()) throw ConflictError("nothing to answer: session is empty");
  if (cur->messages.back().utterance.speaker != Speaker::kUser)
    throw ConflictError("nothing to answer: last turn is from the dispatcher");

  const auto utterances = cur->utterances();
  SuggestionRequest req;
  req.session_id = session_id;
  req.category = cur->category;
  req.utterances = utterances;
  req.state = &cur->state;
  AssistBackends ab{backends_.generation, backends_.summary, &classifier()};
  AssistConfig cfg = options_.assist;
  cfg.candidates = n;
  const auto bundle = suggest_response(req, backends_.index, ab, cfg);

  ojson j;
  j["session_id"] = session_id;
  j["degraded"] = bundle.degraded;
  auto cands = ojson::array();
  for (const auto& c : bundle.candidates) cands.push_back(candidate_json(c, cfg.questions));
  j["candidates"] = std::move(cands);
  j["retrieved_doc"] = bundle.retrieved_doc ? ojson(*bundle.retrieved_doc) : ojson(nullptr);
  j["summary"] = {{"text", bundle.summary.text},
                  {"source", summary_source_name(bundle.summary.source)},
                  {"backend_failed", bundle.summary.backend_failed}};
  j["warnings"] = bundle.warnings;
  const std::string body = j.dump();
  commit(e, session_id, EventKind::kSuggestionIssued, body);
  return body;
}

std::string Service::close_session(const std::string& session_id) {
  auto& e = find(session_id);
  std::lock_guard write(e.write);
  if (load(e)->status == SessionStatus::kClosed)
    throw ConflictError("session " + session_id + " is closed");
  return session_json(*commit(e, session_id, EventKind::kSessionClosed, "{}"), options_.assist.questions);
}

std::shared_ptr<const Session> Service::session(const std::string& session_id) const {
  return load(find(session_id));
}

std::string Service::session_summary(const std::string& session_id) const {
  return session_json(*session(session_id), options_.assist.questions);
}

std::vector<std::shared_ptr<const Session>> Service::all_sessions() const {
  std::shared_lock lock(sessions_mu_);
  std::vector<std::shared_ptr<const Session>> out;
  out.reserve(sessions_.size());
  for (const auto& [id, e] : sessions_) out.push_back(load(*e));
  return out;
}

std::vector<std::string> Service::session_ids() const {
  std::shared_lock lock(sessions_mu_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

std::string Service::list_sessions(const Filters& filters) const {
  auto sessions = all_sessions();
  std::stable_sort(sessions.begin(), sessions.end(), [](const auto& a, const auto& b) {
    if (a->last_activity != b->last_activity) return a->last_activity > b->last_activity;
    return a->session_id > b->session_id;
  });
  auto rows = ojson::array();
  for (const auto& s : sessions) {
    if (!category_matches(filters, s->category.name())) continue;
    if (filters.status && *filters.status != s->status) continue;
    ojson r;
    r["session_id"] = s->session_id;
    r["org_id"] = s->org_id;
    r["category"] = s->category.name();
    r["anonymous"] = s->anonymous;
    r["status"] = status_name(s->status);
    r["created_at"] = s->created_at.to_string();
    r["last_activity"] = s->last_activity.to_string();
    r["message_count"] = s->messages.size();
    r["polarity"] = s->polarity_trace.empty() ? ojson(nullptr) : ojson(s->polarity_trace.back().value);
    rows.push_back(std::move(r));
  }
  return ojson{{"sessions", std::move(rows)}}.dump();
}

bool Service::wait_for_messages(const std::string& session_id, std::size_t after,
                                std::chrono::milliseconds timeout) const {
  const auto& e = find(session_id);
  std::unique_lock lock(notify_mu_);
  return notify_cv_.wait_for(lock, timeout, [&] { return load(e)->messages.size() > after; });
}

// ---------------------------------------------------------------------------
// Analytics

namespace {

struct Item {
  std::string id;
  std::string origin;  // sessions | corpus
  std::string category;
  int hour = 0;
  LabeledConversation labels;
  std::vector<std::string> sources;  // per utterance
};

std::string group_key(std::string_view group_by, const Item& item, const std::string& source) {
  if (group_by == "category") return item.category;
  if (group_by == "hour") return eval::hour_label(item.hour);
  if (group_by == "source") return source;
  return "Total";
}

}  // namespace

std::string Service::analytics(std::string_view kind, std::string_view group_by,
                               const Filters& filters) const {
  if (filters.origin != "all" && filters.origin != "sessions" && filters.origin != "corpus")
    throw ValidationError("origin must be all, sessions or corpus");
  std::vector<Item> items;
  if (filters.origin != "corpus") {
    for (const auto& s : all_sessions()) {
      if (!category_matches(filters, s->category.name())) continue;
      if (filters.status && *filters.status != s->status) continue;
      Item it{s->session_id, "sessions", s->category.name(), s->created_at.local_hour(), {}, {}};
      for (const auto& m : s->messages) {
        it.labels.emplace_back(m.utterance.speaker, m.emotion.emotion);
        it.sources.emplace_back(m.source ? std::string(response_source_name(*m.source)) : "unattributed");
      }
      items.push_back(std::move(it));
    }
  }
  if (filters.origin != "sessions" && options_.corpus && !filters.status) {
    const auto& incidents = options_.corpus->incidents();
    for (std::size_t i = 0; i < incidents.size(); ++i) {
      const auto& inc = incidents[i];
      if (!category_matches(filters, inc.category.name())) continue;
      Item it{inc.incident_id, "corpus", inc.category.name(), inc.created_at.local_hour(),
              labeled_conversation(inc, corpus_labels_[i]),
              std::vector<std::string>(inc.utterances.size(), "corpus")};
      items.push_back(std::move(it));
    }
  }

  const auto mapping = SentimentMapping::standard();
  ojson out;
  out["kind"] = kind;
  out["group_by"] = group_by;
  auto rows = ojson::array();

  if (kind == "support-rate") {
    if (!group_by.empty() && group_by != "category" && group_by != "hour" && group_by != "source" &&
        group_by != "total")
      throw ValidationError("support-rate group_by must be category, hour, source or total");
    struct Acc {
      std::size_t n = 0, hits = 0;
      std::map<std::string, std::pair<std::size_t, std::size_t>> by_source;
    };
    std::map<std::string, Acc> acc;
    for (const auto& it : items) {
      for (std::size_t u = 0; u < it.labels.size(); ++u) {
        if (it.labels[u].first != Speaker::kDispatcher) continue;
        const bool hit = detect_emotional_support(it.labels[u].second).is_support;
        auto& a = acc[group_key(group_by, it, it.sources[u])];
        ++a.n;
        a.hits += hit;
        auto& bs = a.by_source[it.sources[u]];
        ++bs.first;
        bs.second += hit;
      }
    }
    // Hour tables always carry all 24 buckets once there is any data.
    if (group_by == "hour" && !acc.empty()) {
      for (int h = 0; h < 24; ++h) acc.try_emplace(eval::hour_label(h));
    }
    for (const auto& [group, a] : acc) {
      ojson r;
      r["group"] = group;
      r["n"] = a.n;
      r["support_rate"] = a.n > 0 ? ojson(static_cast<double>(a.hits) / static_cast<double>(a.n))
                                  : ojson(nullptr);
      ojson by = ojson::object();
      for (const auto& [src, c] : a.by_source)
        by[src] = {{"n", c.first}, {"support_rate", static_cast<double>(c.second) / c.first}};
      r["by_source"] = std::move(by);
      rows.push_back(std::move(r));
    }
  } else if (kind == "polarity") {
    if (group_by.empty() || group_by == "session") {
      for (const auto& it : items) {
        std::vector<Emotion> user;
        for (const auto& [sp, e] : it.labels)
          if (sp == Speaker::kUser) user.push_back(e);
        if (user.empty()) continue;
        const auto p = polarity_score(user, mapping);
        rows.push_back({{"id", it.id},
                        {"origin", it.origin},
                        {"category", it.category},
                        {"polarity", p.value},
                        {"n_user_utterances", p.n_user_utterances}});
      }
    } else if (group_by == "category" || group_by == "hour") {
      std::map<std::string, std::pair<std::size_t, double>> acc;
      for (const auto& it : items) {
        std::vector<Emotion> user;
        for (const auto& [sp, e] : it.labels)
          if (sp == Speaker::kUser) user.push_back(e);
        if (user.empty()) continue;
        auto& a = acc[group_key(group_by, it, {})];
        ++a.first;
        a.second += polarity_score(user, mapping).value;
      }
      for (const auto& [group, a] : acc)
        rows.push_back({{"group", group}, {"n", a.first}, {"mean_polarity", a.second / a.first}});
    } else {
      throw ValidationError("polarity group_by must be session, category or hour");
    }
  } else if (kind == "stage-sentiment") {
    if (!group_by.empty() && group_by != "stage")
      throw ValidationError("stage-sentiment group_by must be stage");
    std::vector<LabeledConversation> convs;
    bool any_user = false;
    for (const auto& it : items) {
      if (it.labels.empty()) continue;
      convs.push_back(it.labels);
      for (const auto& [sp, _] : it.labels) any_user = any_user || sp == Speaker::kUser;
    }
    if (!any_user) {
      out["rows"] = std::move(rows);
      return out.dump();
    }
    const auto table = stage_sentiment(convs, mapping);
    for (std::size_t st = 0; st < 3; ++st) {
      if (!table.rows[st]) continue;
      const auto& r = *table.rows[st];
      rows.push_back({{"stage", kStageNames[st]},
                      {"n", r.n},
                      {"negative", r.negative},
                      {"neutral", r.neutral},
                      {"positive", r.positive}});
    }
  } else {
    throw ValidationError("unknown analytics kind " + std::string(kind));
  }
  out["rows"] = std::move(rows);
  return out.dump();
}

}  // namespace safechat::service
