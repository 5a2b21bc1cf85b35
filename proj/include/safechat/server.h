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

// The /v1 JSON-over-HTTP API in front of service::Service.
//
//   GET  /v1/health
//   POST /v1/sessions                      {"org_id", "category", "anonymous"}
//   GET  /v1/sessions?status=&category=
//   GET  /v1/sessions/{id}
//   POST /v1/sessions/{id}/messages        {"speaker", "text", "ts"?}
//   GET  /v1/sessions/{id}/suggestions?n=k
//   POST /v1/sessions/{id}/responses       {"text", "source"}
//   POST /v1/sessions/{id}/close
//   GET  /v1/sessions/{id}/wait?after=n&timeout_ms=t
//   GET  /v1/analytics?kind=&group_by=&category=&status=&origin=
//
// Errors carry {"error": {"code", "message"}} with 400 (malformed body),
// 401, 404, 409, 422 (validation) or 502 (backend).

#ifndef SAFECHAT_SERVER_H_
#define SAFECHAT_SERVER_H_

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "safechat/service.h"

namespace httplib {
class Server;
}

namespace safechat::server {

struct ServerConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "safechat-data";
  std::string token;       // bearer token; empty disables the check
  std::string static_dir;  // console assets served at /
  std::string classifier_url;
  std::string generation_url;
  std::string summary_url;
  std::string qa_url;
  std::chrono::milliseconds backend_timeout{10000};
  std::string index_path;   // retrieval index snapshot
  std::string corpus_path;  // historical corpus for analytics
  bool fsync = false;
  std::size_t snapshot_every = 1000;

  // JSON object with the keys above (backend_timeout_ms for the timeout).
  static ServerConfig parse(std::string_view json_text);
  static ServerConfig load(const std::string& path);
  // SAFECHAT_BIND, SAFECHAT_PORT, SAFECHAT_DATA_DIR, SAFECHAT_TOKEN,
  // SAFECHAT_STATIC_DIR, SAFECHAT_CLASSIFIER_URL, SAFECHAT_GENERATION_URL,
  // SAFECHAT_SUMMARY_URL, SAFECHAT_QA_URL, SAFECHAT_BACKEND_TIMEOUT_MS,
  // SAFECHAT_INDEX, SAFECHAT_CORPUS.
  void apply_env(const std::function<const char*(const char*)>& getenv);
};

struct ApiOptions {
  std::string token;
  std::string static_dir;
  std::chrono::milliseconds max_wait{30000};
};

class HttpApi {
 public:
  HttpApi(service::Service& service, ApiOptions options);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();
  bool running() const;

 private:
  void install_routes();

  service::Service& service_;
  ApiOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace safechat::server

#endif  // SAFECHAT_SERVER_H_
