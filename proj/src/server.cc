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

#include "safechat/server.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "safechat/error.h"

namespace safechat::server {
namespace {

using nlohmann::json;

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_json(httplib::Response& res, const std::string& body, int status = 200) {
  res.status = status;
  res.set_content(body, "application/json");
}

json body_object(const httplib::Request& req) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception& e) {
    throw BadRequest(std::string("malformed JSON body: ") + e.what());
  }
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

template <typename T>
T required(const json& j, const char* name) {
  if (!j.contains(name)) throw ValidationError(std::string("missing field ") + name);
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field ") + name + " has the wrong type");
  }
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto v = req.get_param_value(name);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValidationError(std::string("query parameter ") + name + " must be a non-negative integer");
  return out;
}

service::Filters filters_from(const httplib::Request& req) {
  service::Filters f;
  if (req.has_param("category")) f.category = req.get_param_value("category");
  if (req.has_param("status")) {
    const auto s = req.get_param_value("status");
    if (s == "open") f.status = service::SessionStatus::kOpen;
    else if (s == "closed") f.status = service::SessionStatus::kClosed;
    else throw ValidationError("status must be open or closed");
  }
  if (req.has_param("origin")) f.origin = req.get_param_value("origin");
  return f;
}

// Runs a handler and maps library errors onto HTTP statuses.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const BadRequest& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, "validation", e.what());
    } catch (const BackendError& e) {
      send_error(res, 502, "backend", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

ServerConfig ServerConfig::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed server config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("server config must be a JSON object");
  ServerConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "bind") c.bind = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else if (key == "data_dir") c.data_dir = v.get<std::string>();
      else if (key == "token") c.token = v.get<std::string>();
      else if (key == "static_dir") c.static_dir = v.get<std::string>();
      else if (key == "classifier_url") c.classifier_url = v.get<std::string>();
      else if (key == "generation_url") c.generation_url = v.get<std::string>();
      else if (key == "summary_url") c.summary_url = v.get<std::string>();
      else if (key == "qa_url") c.qa_url = v.get<std::string>();
      else if (key == "backend_timeout_ms") c.backend_timeout = std::chrono::milliseconds(v.get<long long>());
      else if (key == "index_path") c.index_path = v.get<std::string>();
      else if (key == "corpus_path") c.corpus_path = v.get<std::string>();
      else if (key == "fsync") c.fsync = v.get<bool>();
      else if (key == "snapshot_every") c.snapshot_every = v.get<std::size_t>();
      else throw ValidationError("unknown server config key " + key);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad server config value: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) throw ValidationError("port out of range");
  if (c.backend_timeout.count() <= 0) throw ValidationError("backend_timeout_ms must be positive");
  return c;
}

ServerConfig ServerConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open server config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ServerConfig::apply_env(const std::function<const char*(const char*)>& getenv) {
  auto str = [&](const char* name, std::string& field) {
    if (const char* v = getenv(name)) field = v;
  };
  auto num = [&](const char* name) -> std::optional<long long> {
    const char* v = getenv(name);
    if (!v) return std::nullopt;
    const std::string_view s(v);
    long long out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ValidationError(std::string(name) + " must be an integer");
    return out;
  };
  str("SAFECHAT_BIND", bind);
  if (auto p = num("SAFECHAT_PORT")) {
    if (*p < 0 || *p > 65535) throw ValidationError("SAFECHAT_PORT out of range");
    port = static_cast<int>(*p);
  }
  str("SAFECHAT_DATA_DIR", data_dir);
  str("SAFECHAT_TOKEN", token);
  str("SAFECHAT_STATIC_DIR", static_dir);
  str("SAFECHAT_CLASSIFIER_URL", classifier_url);
  str("SAFECHAT_GENERATION_URL", generation_url);
  str("SAFECHAT_SUMMARY_URL", summary_url);
  str("SAFECHAT_QA_URL", qa_url);
  if (auto t = num("SAFECHAT_BACKEND_TIMEOUT_MS")) {
    if (*t <= 0) throw ValidationError("SAFECHAT_BACKEND_TIMEOUT_MS must be positive");
    backend_timeout = std::chrono::milliseconds(*t);
  }
  str("SAFECHAT_INDEX", index_path);
  str("SAFECHAT_CORPUS", corpus_path);
}

HttpApi::HttpApi(service::Service& service, ApiOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpApi::~HttpApi() { stop(); }

void HttpApi::install_routes() {
  auto& s = *server_;
  auto& svc = service_;
  const auto token = options_.token;
  s.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.path.rfind("/v1/", 0) != 0 || req.path == "/v1/health")
      return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") != "Bearer " + token) {
      send_error(res, 401, "unauthorized", "missing or invalid bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.Get("/v1/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json j{{"status", "ok"}, {"seq", svc.last_seq()}, {"sessions", svc.session_ids().size()}};
    send_json(res, j.dump());
  }));

  s.Post("/v1/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_object(req);
    const auto id = svc.create_session(required<std::string>(body, "org_id"),
                                       required<std::string>(body, "category"),
                                       body.contains("anonymous") ? required<bool>(body, "anonymous") : false);
    send_json(res, svc.session_summary(id), 201);
  }));

  s.Get("/v1/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, svc.list_sessions(filters_from(req)));
  }));

  s.Get(R"(/v1/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, svc.session_summary(req.matches[1]));
  }));

  s.Post(R"(/v1/sessions/([^/]+)/messages)",
         guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_object(req);
           auto speaker = Speaker::kUser;
           if (body.contains("speaker")) {
             auto sp = parse_speaker(required<std::string>(body, "speaker"));
             if (!sp) throw ValidationError("speaker must be user or dispatcher");
             speaker = *sp;
           }
           std::optional<Timestamp> ts;
           if (body.contains("ts") && !body["ts"].is_null()) {
             ts = Timestamp::parse(required<std::string>(body, "ts"));
             if (!ts) throw ValidationError("invalid ts");
           }
           send_json(res, svc.append_message(req.matches[1], speaker, required<std::string>(body, "text"), ts));
         }));

  s.Get(R"(/v1/sessions/([^/]+)/suggestions)",
        guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          send_json(res, svc.get_suggestions(req.matches[1], size_param(req, "n", 1)));
        }));

  s.Post(R"(/v1/sessions/([^/]+)/responses)",
         guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_object(req);
           auto source = service::parse_response_source(required<std::string>(body, "source"));
           if (!source) throw ValidationError("source must be accepted-suggestion, edited or manual");
           send_json(res, svc.record_response(req.matches[1], required<std::string>(body, "text"), *source));
         }));

  s.Post(R"(/v1/sessions/([^/]+)/close)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, svc.close_session(req.matches[1]));
  }));

  const auto max_wait = options_.max_wait;
  s.Get(R"(/v1/sessions/([^/]+)/wait)",
        guarded([&svc, max_wait](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          const auto after = size_param(req, "after", 0);
          const auto timeout = std::min<std::chrono::milliseconds>(
              std::chrono::milliseconds(size_param(req, "timeout_ms", 25000)), max_wait);
          const bool changed = svc.wait_for_messages(id, after, timeout);
          send_json(res, "{\"changed\":" + std::string(changed ? "true" : "false") +
                             ",\"session\":" + svc.session_summary(id) + "}");
        }));

  s.Get("/v1/analytics", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("kind")) throw ValidationError("missing query parameter kind");
    send_json(res, svc.analytics(req.get_param_value("kind"), req.get_param_value("group_by"),
                                 filters_from(req)));
  }));

  if (!options_.static_dir.empty() && !s.set_mount_point("/", options_.static_dir))
    throw IoError("static directory not found: " + options_.static_dir);
}

int HttpApi::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpApi::run() { server_->listen_after_bind(); }

void HttpApi::stop() {
  if (server_) server_->stop();
}

bool HttpApi::running() const { return server_->is_running(); }

}  // namespace safechat::server
