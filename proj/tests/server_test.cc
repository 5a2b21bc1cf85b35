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

#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "safechat/backends.h"
#include "safechat/error.h"
#include "safechat/server.h"
#include "service_workload.h"

namespace safechat::server {
namespace {

using nlohmann::json;

// A running API over an in-memory service.
class Harness {
 public:
  explicit Harness(ApiOptions api = {}, service::ServiceBackends backends = {}) {
    service::ServiceOptions o;
    o.clock = testing::stepping_clock();
    svc_ = std::make_unique<service::Service>(std::move(o), backends);
    api_ = std::make_unique<HttpApi>(*svc_, std::move(api));
    port_ = api_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { api_->run(); });
    while (!api_->running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  ~Harness() {
    api_->stop();
    thread_.join();
  }

  httplib::Client client(const std::string& token = {}) const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    if (!token.empty()) c.set_bearer_token_auth(token);
    return c;
  }
  service::Service& svc() { return *svc_; }

 private:
  std::unique_ptr<service::Service> svc_;
  std::unique_ptr<HttpApi> api_;
  int port_ = 0;
  std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto res = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(res) << path;
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " " << res->body;
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect) {
  auto res = c.Get(path);
  EXPECT_TRUE(res) << path;
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << " " << res->body;
  return json::parse(res->body);
}

TEST(Api, FullSessionLifecycle) {
  Harness h;
  auto c = h.client();
  EXPECT_EQ(get(c, "/v1/health", 200)["status"], "ok");

  const auto created =
      post(c, "/v1/sessions", {{"org_id", "org-1"}, {"category", "Theft/Lost Item"}}, 201);
  const std::string id = created["session_id"];
  EXPECT_EQ(created["status"], "open");
  EXPECT_EQ(created["anonymous"], false);

  auto s = post(c, "/v1/sessions/" + id + "/messages",
                {{"speaker", "user"}, {"text", "Someone stole my bike"}}, 200);
  EXPECT_EQ(s["polarity_trace"].size(), 1u);
  EXPECT_EQ(s["slots"]["TARGET_OBJECT"][0]["text"], "my bike");

  const auto sug = get(c, "/v1/sessions/" + id + "/suggestions?n=2", 200);
  EXPECT_TRUE(sug["degraded"].get<bool>());
  ASSERT_GE(sug["candidates"].size(), 1u);
  for (const char* key : {"text", "source", "emotion", "support", "next_slot", "next_question", "intent"}) {
    EXPECT_TRUE(sug["candidates"][0].contains(key)) << key;
  }
  const std::string text = sug["candidates"][0]["text"];

  s = post(c, "/v1/sessions/" + id + "/responses", {{"text", text}, {"source", "accepted-suggestion"}},
           200);
  EXPECT_EQ(s["messages"][1]["source"], "accepted-suggestion");
  EXPECT_EQ(s["suggestions_issued"], 1);

  EXPECT_EQ(get(c, "/v1/sessions/" + id, 200), s);
  const auto list = get(c, "/v1/sessions?status=open", 200);
  ASSERT_EQ(list["sessions"].size(), 1u);
  EXPECT_EQ(list["sessions"][0]["message_count"], 2);

  s = post(c, "/v1/sessions/" + id + "/close", json::object(), 200);
  EXPECT_EQ(s["status"], "closed");
  const auto err = post(c, "/v1/sessions/" + id + "/messages", {{"text", "late"}}, 409);
  EXPECT_EQ(err["error"]["code"], "conflict");

  const auto a = get(c, "/v1/analytics?kind=support-rate&group_by=source", 200);
  EXPECT_EQ(a["kind"], "support-rate");
  ASSERT_EQ(a["rows"].size(), 1u);
  EXPECT_EQ(a["rows"][0]["group"], "accepted-suggestion");
}

TEST(Api, ErrorStatuses) {
  Harness h;
  auto c = h.client();
  auto e = post(c, "/v1/sessions", {{"org_id", "o"}, {"category", "Misc"}}, 422);
  EXPECT_EQ(e["error"]["code"], "validation");
  e = post(c, "/v1/sessions", {{"category", "Hazard"}}, 422);
  EXPECT_NE(e["error"]["message"].get<std::string>().find("org_id"), std::string::npos);
  auto res = c.Post("/v1/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "bad_request");
  res = c.Post("/v1/sessions", "[1,2]", "application/json");
  EXPECT_EQ(res->status, 400);

  e = get(c, "/v1/sessions/s-000999", 404);
  EXPECT_EQ(e["error"]["code"], "not_found");
  post(c, "/v1/sessions/s-000999/messages", {{"text", "x"}}, 404);

  const std::string id = post(c, "/v1/sessions", {{"org_id", "o"}, {"category", "Hazard"}}, 201)["session_id"];
  e = get(c, "/v1/sessions/" + id + "/suggestions", 409);
  EXPECT_NE(e["error"]["message"].get<std::string>().find("nothing to answer"), std::string::npos);
  post(c, "/v1/sessions/" + id + "/messages", {{"speaker", "robot"}, {"text", "x"}}, 422);
  post(c, "/v1/sessions/" + id + "/messages", {{"text", 5}}, 422);
  post(c, "/v1/sessions/" + id + "/messages", {{"text", "x"}, {"ts", "yesterday"}}, 422);
  post(c, "/v1/sessions/" + id + "/responses", {{"text", "x"}, {"source", "bot"}}, 422);
  get(c, "/v1/sessions/" + id + "/suggestions?n=abc", 422);
  get(c, "/v1/analytics", 422);
  get(c, "/v1/analytics?kind=bogus", 422);
  get(c, "/v1/sessions?status=pending", 422);
}

TEST(Api, BearerTokenGuardsV1) {
  ApiOptions opts;
  opts.token = "s3cret";
  Harness h(opts);
  auto anon = h.client();
  EXPECT_EQ(get(anon, "/v1/health", 200)["status"], "ok");
  auto e = get(anon, "/v1/sessions", 401);
  EXPECT_EQ(e["error"]["code"], "unauthorized");
  auto wrong = h.client("nope");
  get(wrong, "/v1/sessions", 401);
  auto ok = h.client("s3cret");
  EXPECT_TRUE(get(ok, "/v1/sessions", 200)["sessions"].empty());
  post(ok, "/v1/sessions", {{"org_id", "o"}, {"category", "Hazard"}}, 201);
}

TEST(Api, LongPollWakesOnNewMessage) {
  Harness h;
  auto c = h.client();
  const std::string id = post(c, "/v1/sessions", {{"org_id", "o"}, {"category", "Hazard"}}, 201)["session_id"];
  auto quick = get(c, "/v1/sessions/" + id + "/wait?after=0&timeout_ms=10", 200);
  EXPECT_FALSE(quick["changed"].get<bool>());
  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    h.svc().append_message(id, Speaker::kUser, "hello");
  });
  auto c2 = h.client();
  const auto woke = get(c2, "/v1/sessions/" + id + "/wait?after=0&timeout_ms=5000", 200);
  writer.join();
  EXPECT_TRUE(woke["changed"].get<bool>());
  EXPECT_EQ(woke["session"]["messages"].size(), 1u);
}

TEST(Api, ReadEndpointsDoNotMutate) {
  Harness h;
  testing::run_workload(h.svc(), 12, 150);
  const auto size = h.svc().log_size();
  auto c = h.client();
  get(c, "/v1/health", 200);
  get(c, "/v1/sessions", 200);
  for (const auto& id : h.svc().session_ids()) get(c, "/v1/sessions/" + id, 200);
  get(c, "/v1/analytics?kind=polarity&group_by=category", 200);
  get(c, "/v1/analytics?kind=stage-sentiment", 200);
  get(c, "/v1/analytics?kind=support-rate&group_by=hour", 200);
  EXPECT_EQ(h.svc().log_size(), size);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, FileThenEnvironment) {
  auto c = ServerConfig::parse(
      R"({"bind": "0.0.0.0", "port": 9000, "token": "t", "backend_timeout_ms": 250, "snapshot_every": 5})");
  EXPECT_EQ(c.bind, "0.0.0.0");
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.backend_timeout, std::chrono::milliseconds(250));
  const std::map<std::string, std::string> env = {{"SAFECHAT_PORT", "9100"},
                                                  {"SAFECHAT_DATA_DIR", "/tmp/x"},
                                                  {"SAFECHAT_GENERATION_URL", "http://h:1/gen"}};
  c.apply_env([&](const char* k) -> const char* {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.data_dir, "/tmp/x");
  EXPECT_EQ(c.generation_url, "http://h:1/gen");
  EXPECT_EQ(c.token, "t");
  EXPECT_THROW(ServerConfig::parse(R"({"colour": "blue"})"), ValidationError);
  EXPECT_THROW(ServerConfig::parse(R"({"port": 70000})"), ValidationError);
  EXPECT_THROW(c.apply_env([](const char* k) -> const char* {
                 return std::string_view(k) == "SAFECHAT_PORT" ? "eighty" : nullptr;
               }),
               ValidationError);
}

// ---------------------------------------------------------------------------
// HTTP model backends

class FakeBackend {
 public:
  FakeBackend() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    while (!server_.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  ~FakeBackend() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(Backends, EndpointParsing) {
  const auto e = backends::Endpoint::parse("http://localhost:8081/v1/classify");
  EXPECT_EQ(e.host, "localhost");
  EXPECT_EQ(e.port, 8081);
  EXPECT_EQ(e.path, "/v1/classify");
  EXPECT_EQ(backends::Endpoint::parse("http://h").port, 80);
  EXPECT_EQ(backends::Endpoint::parse("http://h").path, "/");
  EXPECT_THROW(backends::Endpoint::parse("ftp://h"), ValidationError);
  EXPECT_THROW(backends::Endpoint::parse("http://h:notaport/"), ValidationError);
}

TEST(Backends, WireFormats) {
  FakeBackend fake;
  std::atomic<int> generation_calls{0};
  fake.server().Post("/classify", [](const httplib::Request& req, httplib::Response& res) {
    const auto j = json::parse(req.body);
    json labels = json::array();
    for (const auto& t : j.at("texts")) {
      labels.push_back({{"label", t.get<std::string>().find("sorry") != std::string::npos ? "caring" : "neutral"},
                        {"confidence", 0.8}});
    }
    res.set_content(json{{"labels", labels}}.dump(), "application/json");
  });
  fake.server().Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    ++generation_calls;
    const auto j = json::parse(req.body);
    EXPECT_TRUE(j.at("prompt").get<std::string>().ends_with("Dispatcher:"));
    EXPECT_EQ(j.at("max_tokens"), 64);
    res.set_content(R"({"text": "I'm so sorry. Where are you?"})", "application/json");
  });
  fake.server().Post("/summarize", [](const httplib::Request& req, httplib::Response& res) {
    const auto j = json::parse(req.body);
    EXPECT_EQ(j.at("utterances")[0].at("speaker"), "user");
    res.set_content(R"({"summary": "A bike theft"})", "application/json");
  });
  fake.server().Post("/qa", [](const httplib::Request& req, httplib::Response& res) {
    const auto j = json::parse(req.body);
    EXPECT_TRUE(j.contains("question"));
    res.set_content(R"({"spans": [{"text": "my bike", "score": 0.9, "utterance_index": 0}]})",
                    "application/json");
  });

  const backends::HttpClassifier cls(backends::Endpoint::parse(fake.url("/classify")));
  const std::vector<std::string> texts = {"so sorry", "ok"};
  const auto labels = cls.classify_batch(texts);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].emotion, Emotion::kCaring);
  EXPECT_DOUBLE_EQ(labels[1].confidence, 0.8);

  const backends::HttpGeneration gen(backends::Endpoint::parse(fake.url("/generate")));
  EXPECT_EQ(gen.generate("...\nDispatcher:", 64), "I'm so sorry. Where are you?");

  const backends::HttpSummary sum(backends::Endpoint::parse(fake.url("/summarize")));
  const std::vector<Utterance> utts = {{Speaker::kUser, "my bike", Timestamp::from_civil(2019, 1, 1)}};
  EXPECT_EQ(sum.summarize(utts), "A bike theft");

  const backends::HttpQa qa(backends::Endpoint::parse(fake.url("/qa")));
  const auto spans = qa.answer(build_slot_questions().front(), utts);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].text, "my bike");
  EXPECT_DOUBLE_EQ(spans[0].score, 0.9);
}

TEST(Backends, FailureClassification) {
  FakeBackend fake;
  fake.server().Post("/500", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  fake.server().Post("/400", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  fake.server().Post("/junk", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  fake.server().Post("/short", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"labels": []})", "application/json");
  });
  auto retryable = [](auto&& fn) {
    try {
      fn();
    } catch (const BackendError& e) {
      return std::optional<bool>(e.retryable());
    }
    return std::optional<bool>();
  };
  const std::vector<std::string> texts = {"x"};
  auto classify = [&](const std::string& path) {
    return retryable([&] { backends::HttpClassifier(backends::Endpoint::parse(fake.url(path))).classify_batch(texts); });
  };
  EXPECT_EQ(classify("/500"), std::optional<bool>(true));
  EXPECT_EQ(classify("/400"), std::optional<bool>(false));
  EXPECT_EQ(classify("/junk"), std::optional<bool>(false));
  EXPECT_EQ(classify("/short"), std::optional<bool>(false));
  // Nothing listens on port 1.
  backends::HttpOptions quick;
  quick.timeout = std::chrono::milliseconds(200);
  EXPECT_EQ(retryable([&] {
              backends::HttpGeneration(backends::Endpoint::parse("http://127.0.0.1:1/g"), quick)
                  .generate("p", 1);
            }),
            std::optional<bool>(true));
}

TEST(Backends, OfflineGenerationKeepsApiAvailable) {
  backends::HttpOptions quick;
  quick.timeout = std::chrono::milliseconds(200);
  const backends::HttpGeneration gen(backends::Endpoint::parse("http://127.0.0.1:1/generate"), quick);
  service::ServiceBackends b;
  b.generation = &gen;
  Harness h({}, b);
  auto c = h.client();
  const std::string id =
      post(c, "/v1/sessions", {{"org_id", "o"}, {"category", "Noise Disturbance"}}, 201)["session_id"];
  post(c, "/v1/sessions/" + id + "/messages", {{"text", "loud music"}}, 200);
  const auto sug = get(c, "/v1/sessions/" + id + "/suggestions", 200);
  EXPECT_TRUE(sug["degraded"].get<bool>());
  ASSERT_EQ(sug["candidates"].size(), 1u);
  EXPECT_EQ(sug["candidates"][0]["text"],
            "Thank you for reporting this. Can you tell me where this is happening?");
}

}  // namespace
}  // namespace safechat::server
