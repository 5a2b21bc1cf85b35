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

#include "safechat/cli.h"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "safechat/analysis.h"
#include "safechat/assist.h"
#include "safechat/backends.h"
#include "safechat/corpus.h"
#include "safechat/emotion.h"
#include "safechat/error.h"
#include "safechat/eval.h"
#include "safechat/events.h"
#include "safechat/server.h"
#include "safechat/service.h"
#include "safechat/stats.h"
#include "safechat/synth.h"

namespace safechat::cli {
namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::string log_level = "info";
  std::string data_dir;
  std::size_t jobs = 1;
  std::string classifier_url;
  int timeout_ms = 10000;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception
// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Output stream for a path, "-" meaning stdout.
class Output {
 public:
  Output(const std::string& path, std::ostream& stdout_stream) {
    if (path == "-") {
      stream_ = &stdout_stream;
    } else {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot open " + path + " for writing");
      stream_ = &file_;
    }
    path_ = path;
  }
  ~Output() noexcept(false) {
    stream_->flush();
    if (!*stream_ && std::uncaught_exceptions() == 0) throw IoError("write failed: " + path_);
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
  std::string path_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

std::vector<std::size_t> by_incident_id(const Corpus& corpus) {
  std::vector<std::size_t> order(corpus.incident_count());
  std::iota(order.begin(), order.end(), 0);
  const auto& inc = corpus.incidents();
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return inc[a].incident_id < inc[b].incident_id; });
  return order;
}

std::unique_ptr<EmotionClassifier> make_classifier(const Globals& g) {
  if (g.classifier_url.empty()) return nullptr;
  backends::HttpOptions opts;
  opts.timeout = std::chrono::milliseconds(g.timeout_ms);
  return std::make_unique<backends::HttpClassifier>(backends::Endpoint::parse(g.classifier_url), opts);
}

const EmotionClassifier& classifier_or_lexicon(const std::unique_ptr<EmotionClassifier>& c) {
  if (c) return *c;
  return LexiconClassifier::bundled();
}

// {"incident_id", "labels": [{"label", "confidence"}]} per line.
std::string labels_jsonl(const Corpus& corpus, const CorpusLabels& labels) {
  std::ostringstream os;
  for (auto i : by_incident_id(corpus)) {
    ojson j;
    j["incident_id"] = corpus.incidents()[i].incident_id;
    auto arr = ojson::array();
    for (const auto& l : labels[i])
      arr.push_back({{"label", emotion_name(l.emotion)}, {"confidence", l.confidence}});
    j["labels"] = std::move(arr);
    os << j.dump() << '\n';
  }
  return os.str();
}

CorpusLabels read_labels(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels file " + path);
  std::map<std::string, std::vector<EmotionLabel>> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<EmotionLabel> labels;
      for (const auto& l : j.at("labels")) {
        auto e = parse_emotion(l.at("label").get<std::string>());
        if (!e) throw ParseError(line_no, "labels", "unknown emotion label");
        labels.push_back({*e, l.value("confidence", 1.0)});
      }
      by_id[j.at("incident_id").get<std::string>()] = std::move(labels);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, "", e.what());
    }
  }
  CorpusLabels out;
  for (const auto& inc : corpus.incidents()) {
    auto it = by_id.find(inc.incident_id);
    if (it == by_id.end()) throw ValidationError("labels missing for incident " + inc.incident_id);
    if (it->second.size() != inc.utterances.size())
      throw ValidationError("label count mismatch for incident " + inc.incident_id);
    out.push_back(std::move(it->second));
  }
  return out;
}

CorpusLabels labels_for(const Corpus& corpus, const std::string& labels_path, const Globals& g) {
  if (!labels_path.empty()) return read_labels(labels_path, corpus);
  auto c = make_classifier(g);
  return annotate_corpus(corpus, classifier_or_lexicon(c), {64, g.jobs});
}

ojson state_json(const DialogueState& state) {
  ojson slots = ojson::object();
  for (auto slot : all_slots()) {
    auto arr = ojson::array();
    for (const auto& a : state.answers(slot))
      arr.push_back({{"text", a.text}, {"utterance_index", a.utterance_index}, {"score", a.score}});
    slots[std::string(slot_name(slot))] = std::move(arr);
  }
  return slots;
}

ojson test_json(const stats::TestResult& t) {
  ojson j;
  j["kind"] = stats::test_kind_name(t.kind);
  j["statistic"] = t.statistic;
  j["df1"] = t.df1;
  j["df2"] = t.df2 ? ojson(*t.df2) : ojson(nullptr);
  j["p_value"] = t.p_value;
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

struct IngestArgs {
  std::string in, out, report, cleaning;
  bool no_language = false;
};

int cmd_ingest(const IngestArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  const std::string cfg_path = !a.cleaning.empty() ? a.cleaning : g.config;
  CleaningConfig cfg = cfg_path.empty() ? CleaningConfig{} : CleaningConfig::load(cfg_path);
  if (a.no_language) cfg.filter_language = false;
  auto result = clean_corpus(corpus, cfg);
  {
    std::vector<Incident> sorted;
    for (auto i : by_incident_id(result.corpus)) sorted.push_back(result.corpus.incidents()[i]);
    Output o(a.out, out);
    write_corpus(Corpus(std::move(sorted)), *o);
  }
  ojson rep;
  rep["input"] = result.report.input;
  rep["kept"] = result.report.kept;
  rep["removed"] = result.report.removed_total();
  ojson by = ojson::object();
  for (const auto& [rule, n] : result.report.removed_by_rule) by[rule] = n;
  rep["removed_by_rule"] = std::move(by);
  if (a.report.empty()) {
    (a.out == "-" ? std::cerr : out) << rep.dump() << '\n';
  } else {
    write_file(a.report, rep.dump() + "\n");
  }
  return kExitOk;
}

int cmd_classify(const std::string& in, const std::string& out_path, const Globals& g,
                 std::ostream& out) {
  auto corpus = load_corpus(in);
  auto labels = labels_for(corpus, {}, g);
  Output o(out_path, out);
  *o << labels_jsonl(corpus, labels);
  return kExitOk;
}

struct ScoreArgs {
  std::string in, labels, out;
  bool confusion_negative = false;
};

int cmd_score(const ScoreArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  auto labels = labels_for(corpus, a.labels, g);
  const auto mapping = SentimentMapping::standard(a.confusion_negative);
  Output o(a.out, out);
  for (auto i : by_incident_id(corpus)) {
    const auto& inc = corpus.incidents()[i];
    const auto p = incident_polarity(inc, labels[i], mapping);
    ojson j;
    j["incident_id"] = inc.incident_id;
    j["category"] = inc.category.name();
    j["n_user_utterances"] = p.n_user_utterances;
    j["polarity"] = p.n_user_utterances ? ojson(p.value) : ojson(nullptr);
    *o << j.dump() << '\n';
  }
  return kExitOk;
}

struct ExtractArgs {
  std::string in, out, questions, qa_url;
};

int cmd_extract(const ExtractArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  std::string overrides;
  if (!a.questions.empty()) {
    std::ifstream qin(a.questions);
    if (!qin) throw IoError("cannot open " + a.questions);
    std::stringstream ss;
    ss << qin.rdbuf();
    overrides = ss.str();
  }
  const auto questions = build_slot_questions(overrides);
  std::unique_ptr<QaBackend> http;
  if (!a.qa_url.empty()) {
    backends::HttpOptions opts;
    opts.timeout = std::chrono::milliseconds(g.timeout_ms);
    http = std::make_unique<backends::HttpQa>(backends::Endpoint::parse(a.qa_url), opts);
  }
  const QaBackend& qa = http ? *http : static_cast<const QaBackend&>(PatternQaBackend::bundled());
  const auto order = by_incident_id(corpus);
  std::vector<std::string> lines(order.size());
  parallel_for(order.size(), g.jobs, [&](std::size_t k) {
    const auto& inc = corpus.incidents()[order[k]];
    const auto state = replay_state(inc.utterances, questions, qa);
    ojson j;
    j["incident_id"] = inc.incident_id;
    j["category"] = inc.category.name();
    j["slots"] = state_json(state);
    if (!inc.category.is_excluded()) {
      auto nq = next_question(state, inc.category, questions);
      j["next_question"] = nq ? ojson{{"slot", slot_name(nq->slot)}, {"question", nq->question}}
                              : ojson(nullptr);
    }
    lines[k] = j.dump();
  });
  Output o(a.out, out);
  for (const auto& l : lines) *o << l << '\n';
  return kExitOk;
}

struct StatsArgs {
  std::string in, labels, orgs, out_dir;
  bool confusion_negative = false;
};

int cmd_stats(const StatsArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  auto labels = labels_for(corpus, a.labels, g);
  std::optional<analysis::OrgTable> orgs;
  if (!a.orgs.empty()) orgs = analysis::load_orgs(a.orgs);
  const auto mapping = SentimentMapping::standard(a.confusion_negative);
  const auto features = analysis::incident_features(corpus, labels, mapping, SupportSet::standard(),
                                                    orgs ? &*orgs : nullptr);
  const auto records = analysis::to_records(features);
  ensure_dir(a.out_dir);
  ojson summary;
  summary["incidents"] = features.size();
  summary["records"] = records.size();
  auto models = ojson::array();
  auto emit = [&](const analysis::FittedModel& m) {
    write_file(fs::path(a.out_dir) / (m.name + ".csv"), stats::regression_csv(m.fit));
    ojson mj;
    mj["name"] = m.name;
    mj["kind"] = m.fit.kind == stats::ModelKind::kOls ? "ols" : "logistic";
    mj["n"] = m.fit.n;
    mj["clusters"] = m.fit.n_clusters;
    mj["converged"] = m.fit.converged;
    mj["separation"] = m.fit.separation;
    mj["diagnostics"] = m.fit.diagnostics;
    models.push_back(std::move(mj));
  };
  for (int model = 1; model <= 3; ++model) emit(analysis::fit_negativity(records, model));
  for (int model = 1; model <= 3; ++model) emit(analysis::fit_support(records, model));
  summary["models"] = std::move(models);
  const auto tests = analysis::in_text_tests(corpus, labels, mapping, features);
  write_file(fs::path(a.out_dir) / "tests.csv", analysis::tests_csv(tests));
  ojson tj = ojson::object();
  for (const auto& t : tests) tj[t.name] = test_json(t.result);
  summary["tests"] = std::move(tj);
  write_file(fs::path(a.out_dir) / "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct IndexArgs {
  std::string in, out, summary_url;
  double k1 = 1.2, b = 0.75, summary_weight = 1.0, history_weight = 1.0;
};

std::unique_ptr<SummaryBackend> make_summary(const std::string& url, const Globals& g) {
  if (url.empty()) return nullptr;
  backends::HttpOptions opts;
  opts.timeout = std::chrono::milliseconds(g.timeout_ms);
  return std::make_unique<backends::HttpSummary>(backends::Endpoint::parse(url), opts);
}

int cmd_index(const IndexArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  auto summary = make_summary(a.summary_url, g);
  const auto order = by_incident_id(corpus);
  std::vector<std::optional<IndexedDocument>> docs(order.size());
  parallel_for(order.size(), g.jobs, [&](std::size_t k) {
    const auto& inc = corpus.incidents()[order[k]];
    if (inc.count(Speaker::kUser) == 0) return;
    docs[k] = IndexedDocument{inc.incident_id, summarize_scenario(inc, summary.get()).text,
                              to_turns(inc.utterances)};
  });
  std::vector<IndexedDocument> kept;
  for (auto& d : docs)
    if (d) kept.push_back(std::move(*d));
  const auto index = RetrievalIndex::build(std::move(kept), {a.k1, a.b, a.summary_weight, a.history_weight});
  index.save(a.out);
  out << ojson{{"documents", index.size()}, {"path", a.out}}.dump() << '\n';
  return kExitOk;
}

struct SuggestArgs {
  std::string in, index, out, generation_url, summary_url;
  std::size_t max_tokens = 256;
};

int cmd_suggest(const SuggestArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  std::optional<RetrievalIndex> index;
  if (!a.index.empty()) index = RetrievalIndex::load(a.index);
  backends::HttpOptions opts;
  opts.timeout = std::chrono::milliseconds(g.timeout_ms);
  std::unique_ptr<GenerationBackend> gen;
  if (!a.generation_url.empty())
    gen = std::make_unique<backends::HttpGeneration>(backends::Endpoint::parse(a.generation_url), opts);
  auto summary = make_summary(a.summary_url, g);
  auto classifier = make_classifier(g);
  const auto questions = build_slot_questions();
  const auto order = by_incident_id(corpus);
  std::vector<std::vector<eval::ModelOutput>> outputs(order.size());
  std::atomic<std::size_t> degraded{0};
  parallel_for(order.size(), g.jobs, [&](std::size_t k) {
    const auto& inc = corpus.incidents()[order[k]];
    for (std::size_t t = 0; t < inc.utterances.size(); ++t) {
      if (inc.utterances[t].speaker != Speaker::kDispatcher) continue;
      std::size_t end = t;
      while (end > 0 && inc.utterances[end - 1].speaker == Speaker::kDispatcher) --end;
      std::span<const Utterance> prefix(inc.utterances.data(), end);
      std::string text;
      if (prefix.empty()) {
        text = template_fallback(DialogueState{}, inc.category, questions);
      } else {
        const auto state = replay_state(prefix, questions, PatternQaBackend::bundled());
        SuggestionRequest req{inc.incident_id, inc.category, prefix, &state};
        AssistConfig cfg;
        cfg.max_tokens = a.max_tokens;
        cfg.exclude_doc = inc.incident_id;
        AssistBackends ab{gen.get(), summary.get(), classifier.get()};
        const auto bundle = suggest_response(req, index ? &*index : nullptr, ab, cfg);
        if (bundle.degraded && gen) ++degraded;
        text = bundle.candidates.front().text;
      }
      outputs[k].push_back({inc.incident_id, t, std::move(text)});
    }
  });
  std::vector<eval::ModelOutput> flat;
  for (auto& v : outputs)
    for (auto& o : v) flat.push_back(std::move(o));
  {
    Output o(a.out, out);
    eval::write_model_outputs(flat, *o);
  }
  if (degraded > 0)
    std::cerr << "safechat: warning[backend]: " << degraded << " suggestions fell back to templates\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string in, model, out_dir;
  std::size_t min_n = 5;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
  auto corpus = load_corpus(a.in);
  const auto outputs = eval::load_model_outputs(a.model);
  const auto aligned = eval::align_outputs(corpus, outputs);
  auto classifier = make_classifier(g);
  const auto& cls = classifier_or_lexicon(classifier);
  const auto pairs = eval::support_pairs(aligned, cls);
  ensure_dir(a.out_dir);
  const auto sim = eval::similarity_by_category(aligned);
  write_file(fs::path(a.out_dir) / "similarity_by_category.csv", eval::similarity_table_csv(sim));
  const auto by_cat = eval::compare_support(pairs, eval::GroupBy::kCategory, a.min_n);
  const auto by_hour = eval::compare_support(pairs, eval::GroupBy::kHour, a.min_n);
  write_file(fs::path(a.out_dir) / "support_by_category.csv", eval::support_table_csv(by_cat));
  write_file(fs::path(a.out_dir) / "support_by_hour.csv", eval::support_table_csv(by_hour));

  ojson summary;
  summary["turns"] = aligned.size();
  const auto& total = sim.back();
  summary["rouge_l_f1"] = total.rouge_l_f1;
  summary["embed_f1"] = total.embed_f1;
  summary["support"] = {{"human_rate", by_cat.total.human_rate},
                        {"model_rate", by_cat.total.model_rate},
                        {"t", by_cat.total.t_statistic ? ojson(*by_cat.total.t_statistic) : ojson(nullptr)},
                        {"p_value", by_cat.total.p_value ? ojson(*by_cat.total.p_value) : ojson(nullptr)}};
  const auto [human, model] = eval::hourly_rates(pairs);
  try {
    const auto tc = eval::temporal_consistency(human, model);
    auto disp = [](const eval::Dispersion& d) {
      return ojson{{"hours", d.hours}, {"mean", d.mean}, {"sd", d.sd}, {"mean_abs_deviation", d.mean_abs_deviation}};
    };
    summary["temporal_consistency"] = {{"levene", test_json(tc.levene)},
                                       {"human", disp(tc.human)},
                                       {"model", disp(tc.model)}};
  } catch (const ValidationError& e) {
    summary["temporal_consistency"] = {{"skipped", e.what()}};
  }
  write_file(fs::path(a.out_dir) / "summary.json", summary.dump(2) + "\n");
  out << eval::render_support_table(by_cat);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct SynthArgs {
  synth::SynthConfig cfg;
  std::string out = "-";
  std::string orgs_out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto corpus = synth::generate(a.cfg);
  {
    Output o(a.out, out);
    write_corpus(corpus.corpus, *o);
  }
  if (!a.orgs_out.empty()) {
    std::ostringstream os;
    analysis::write_orgs(corpus.orgs, os);
    write_file(a.orgs_out, os.str());
  }
  return kExitOk;
}

// SIGINT/SIGTERM stop the server; the waiting thread is the only consumer.
int cmd_serve(const std::string& config_path, std::optional<int> port_override, const Globals& g,
              std::ostream& out) {
  auto cfg = config_path.empty() ? server::ServerConfig{} : server::ServerConfig::load(config_path);
  cfg.apply_env([](const char* name) { return std::getenv(name); });
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  if (port_override) cfg.port = *port_override;
  if (!g.classifier_url.empty()) cfg.classifier_url = g.classifier_url;

  backends::HttpOptions opts;
  opts.timeout = cfg.backend_timeout;
  std::unique_ptr<EmotionClassifier> classifier;
  std::unique_ptr<GenerationBackend> generation;
  std::unique_ptr<SummaryBackend> summary;
  std::unique_ptr<QaBackend> qa;
  if (!cfg.classifier_url.empty())
    classifier = std::make_unique<backends::HttpClassifier>(backends::Endpoint::parse(cfg.classifier_url), opts);
  if (!cfg.generation_url.empty())
    generation = std::make_unique<backends::HttpGeneration>(backends::Endpoint::parse(cfg.generation_url), opts);
  if (!cfg.summary_url.empty())
    summary = std::make_unique<backends::HttpSummary>(backends::Endpoint::parse(cfg.summary_url), opts);
  if (!cfg.qa_url.empty()) qa = std::make_unique<backends::HttpQa>(backends::Endpoint::parse(cfg.qa_url), opts);
  std::optional<RetrievalIndex> index;
  if (!cfg.index_path.empty()) index = RetrievalIndex::load(cfg.index_path);

  service::ServiceOptions sopts;
  sopts.data_dir = cfg.data_dir;
  sopts.fsync = cfg.fsync;
  sopts.snapshot_every = cfg.snapshot_every;
  if (!cfg.corpus_path.empty()) sopts.corpus = load_corpus(cfg.corpus_path);
  service::Service svc(std::move(sopts), {classifier.get(), qa.get(), generation.get(), summary.get(),
                                          index ? &*index : nullptr});

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  server::HttpApi api(svc, {cfg.token, cfg.static_dir, std::chrono::milliseconds(30000)});
  const int port = api.bind(cfg.bind, cfg.port);
  out << ojson{{"listening", cfg.bind + ":" + std::to_string(port)}, {"data_dir", cfg.data_dir}}.dump()
      << std::endl;
  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    api.stop();
  });
  api.run();
  // Unblock the waiter if the server stopped on its own.
  if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  svc.snapshot();
  return kExitOk;
}

int report(std::ostream& err, std::string_view kind, std::string_view message, int code) {
  err << "safechat: error[" << kind << "]: " << message << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crisis-chat analysis pipelines and the dispatcher assistance service", "safechat"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Config file (cleaning config for ingest, server config for serve)");
  app.add_option("--log-level", g.log_level, "Log level")->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  app.add_option("--data-dir", g.data_dir, "Service data directory");
  app.add_option("--jobs,-j", g.jobs, "Worker threads for per-incident work")->check(CLI::Range(1, 256));
  app.add_option("--classifier-url", g.classifier_url, "Emotion classifier backend (lexicon when unset)");
  app.add_option("--timeout-ms", g.timeout_ms, "Backend timeout in milliseconds")->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse and clean a corpus; prints the cleaning report");
  c_ingest->add_option("--in", ingest.in, "Input corpus JSONL")->required();
  c_ingest->add_option("--out", ingest.out, "Cleaned corpus JSONL ('-' for stdout)")->required();
  c_ingest->add_option("--report", ingest.report, "Write the cleaning report here instead of stdout");
  c_ingest->add_option("--cleaning", ingest.cleaning, "Cleaning config (JSON or TOML)");
  c_ingest->add_flag("--no-language-filter", ingest.no_language, "Keep non-English incidents");

  std::string classify_in, classify_out;
  auto* c_classify = app.add_subcommand("classify", "Emotion label per utterance (JSONL)");
  c_classify->add_option("--in", classify_in, "Corpus JSONL")->required();
  c_classify->add_option("--out", classify_out, "Labels JSONL")->required();

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Polarity score per incident (JSONL)");
  c_score->add_option("--in", score.in, "Corpus JSONL")->required();
  c_score->add_option("--labels", score.labels, "Labels JSONL from classify");
  c_score->add_option("--out", score.out, "Scores JSONL")->required();
  c_score->add_flag("--confusion-negative", score.confusion_negative, "Count confusion as negative");

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Event slot table per incident (JSONL)");
  c_extract->add_option("--in", extract.in, "Corpus JSONL")->required();
  c_extract->add_option("--out", extract.out, "Slots JSONL")->required();
  c_extract->add_option("--questions", extract.questions, "Slot question overrides (JSON)");
  c_extract->add_option("--qa-url", extract.qa_url, "Question answering backend (patterns when unset)");

  StatsArgs st;
  auto* c_stats = app.add_subcommand("stats", "Regression and test tables as CSV");
  c_stats->add_option("--in", st.in, "Corpus JSONL")->required();
  c_stats->add_option("--labels", st.labels, "Labels JSONL from classify");
  c_stats->add_option("--orgs", st.orgs, "Organization adoption dates JSONL");
  c_stats->add_option("--out-dir", st.out_dir, "Output directory")->required();
  c_stats->add_flag("--confusion-negative", st.confusion_negative, "Count confusion as negative");

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "Build the retrieval index");
  c_index->add_option("--in", ix.in, "Corpus JSONL")->required();
  c_index->add_option("--out", ix.out, "Index snapshot (JSON)")->required();
  c_index->add_option("--summary-url", ix.summary_url, "Summary backend (truncation baseline when unset)");
  c_index->add_option("--k1", ix.k1, "BM25 k1")->check(CLI::NonNegativeNumber);
  c_index->add_option("--b", ix.b, "BM25 b")->check(CLI::Range(0.0, 1.0));
  c_index->add_option("--summary-weight", ix.summary_weight, "Summary term weight")->check(CLI::NonNegativeNumber);
  c_index->add_option("--history-weight", ix.history_weight, "Dialogue term weight")->check(CLI::NonNegativeNumber);

  SuggestArgs sg;
  auto* c_suggest = app.add_subcommand("suggest", "Model suggestion for every dispatcher turn (JSONL)");
  c_suggest->add_option("--in", sg.in, "Held-out corpus JSONL")->required();
  c_suggest->add_option("--index", sg.index, "Retrieval index snapshot");
  c_suggest->add_option("--out", sg.out, "Model outputs JSONL")->required();
  c_suggest->add_option("--generation-url", sg.generation_url, "Generation backend (templates when unset)");
  c_suggest->add_option("--summary-url", sg.summary_url, "Summary backend");
  c_suggest->add_option("--max-tokens", sg.max_tokens, "Generation budget")->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* c_evaluate = app.add_subcommand("evaluate", "Similarity and support tables");
  c_evaluate->add_option("--in", ev.in, "Corpus JSONL")->required();
  c_evaluate->add_option("--model", ev.model, "Model outputs JSONL")->required();
  c_evaluate->add_option("--out-dir", ev.out_dir, "Output directory")->required();
  c_evaluate->add_option("--min-n", ev.min_n, "Smallest group that gets a t-test")->check(CLI::PositiveNumber);

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  c_synth->add_option("--seed", sy.cfg.seed, "RNG seed");
  c_synth->add_option("--incidents", sy.cfg.incidents, "Incident count")->check(CLI::PositiveNumber);
  c_synth->add_option("--orgs", sy.cfg.orgs, "Organization count")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", sy.out, "Corpus JSONL ('-' for stdout)");
  c_synth->add_option("--orgs-out", sy.orgs_out, "Organization adoption dates JSONL");
  c_synth->add_option("--negative-rate", sy.cfg.negative_rate, "Negative share of user turns")
      ->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--mental-health-negative-rate", sy.cfg.mental_health_negative_rate,
                      "Negative share of user turns in Mental Health incidents")
      ->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--support-intercept", sy.cfg.support_intercept, "Support log-odds at zero years");
  c_synth->add_option("--support-years-slope", sy.cfg.support_years_slope,
                      "Change in support log-odds per year in use");

  std::string serve_config;
  std::optional<int> serve_port;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
  c_serve->add_option("--server-config", serve_config, "Server config (JSON); environment overrides apply");
  c_serve->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report(err, "usage", e.what(), kExitValidation);
    err << app.help();
    return kExitValidation;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, g, out);
    if (c_classify->parsed()) return cmd_classify(classify_in, classify_out, g, out);
    if (c_score->parsed()) return cmd_score(score, g, out);
    if (c_extract->parsed()) return cmd_extract(extract, g, out);
    if (c_stats->parsed()) return cmd_stats(st, g, out);
    if (c_index->parsed()) return cmd_index(ix, g, out);
    if (c_suggest->parsed()) return cmd_suggest(sg, g, out);
    if (c_evaluate->parsed()) return cmd_evaluate(ev, g, out);
    if (c_synth->parsed()) return cmd_synth(sy, out);
    if (c_serve->parsed()) return cmd_serve(serve_config.empty() ? g.config : serve_config, serve_port, g, out);
  } catch (const ParseError& e) {
    return report(err, "parse", e.what(), kExitValidation);
  } catch (const ValidationError& e) {
    return report(err, "validation", e.what(), kExitValidation);
  } catch (const NotFoundError& e) {
    return report(err, "not_found", e.what(), kExitValidation);
  } catch (const ConflictError& e) {
    return report(err, "conflict", e.what(), kExitValidation);
  } catch (const IoError& e) {
    return report(err, "io", e.what(), kExitIo);
  } catch (const BackendError& e) {
    return report(err, "backend", e.what(), kExitIo);
  } catch (const fs::filesystem_error& e) {
    return report(err, "io", e.what(), kExitIo);
  } catch (const std::exception& e) {
    return report(err, "internal", e.what(), kExitValidation);
  }
  return report(err, "usage", "no subcommand", kExitValidation);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace safechat::cli
