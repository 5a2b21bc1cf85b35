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

#include "safechat/backends.h"

#include <charconv>

#include "httplib.h"
#include "json.hpp"
#include "safechat/error.h"

namespace safechat::backends {
namespace {

using nlohmann::json;

json decode(const std::string& body, std::string_view what) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw BackendError(std::string(what) + ": response is not an object", false);
    return j;
  } catch (const json::exception& e) {
    throw BackendError(std::string(what) + ": malformed response: " + e.what(), false);
  }
}

template <typename T>
T field(const json& j, const char* name, std::string_view what) {
  if (!j.contains(name)) throw BackendError(std::string(what) + ": missing field " + name, false);
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw BackendError(std::string(what) + ": bad field " + name, false);
  }
}

}  // namespace

Endpoint Endpoint::parse(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme)
    throw ValidationError("backend URL must start with http://: " + std::string(url));
  url.remove_prefix(kScheme.size());
  Endpoint ep;
  auto slash = url.find('/');
  std::string_view authority = url.substr(0, slash);
  ep.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    auto port = authority.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), ep.port);
    if (ec != std::errc() || ptr != port.data() + port.size() || ep.port <= 0 || ep.port > 65535)
      throw ValidationError("bad port in backend URL: " + std::string(port));
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw ValidationError("backend URL has no host");
  ep.host = std::string(authority);
  return ep;
}

std::string post_json(const Endpoint& endpoint, const std::string& body, const HttpOptions& options) {
  httplib::Client client(endpoint.host, endpoint.port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!options.bearer_token.empty())
    headers.emplace("Authorization", "Bearer " + options.bearer_token);
  auto res = client.Post(endpoint.path, headers, body, "application/json");
  const std::string where = endpoint.host + ":" + std::to_string(endpoint.port) + endpoint.path;
  if (!res) throw BackendError(where + ": " + httplib::to_string(res.error()), true);
  if (res->status >= 500)
    throw BackendError(where + ": HTTP " + std::to_string(res->status), true);
  if (res->status >= 300)
    throw BackendError(where + ": HTTP " + std::to_string(res->status), false);
  return res->body;
}

std::vector<EmotionLabel> HttpClassifier::classify_batch(std::span<const std::string> texts) const {
  json req{{"texts", json::array()}};
  for (const auto& t : texts) req["texts"].push_back(t);
  json res = decode(post_json(endpoint_, req.dump(), options_), "classifier");
  auto labels = field<json>(res, "labels", "classifier");
  if (!labels.is_array() || labels.size() != texts.size())
    throw BackendError("classifier: expected " + std::to_string(texts.size()) + " labels", false);
  std::vector<EmotionLabel> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto name = field<std::string>(l, "label", "classifier");
    auto e = parse_emotion(name);
    if (!e) throw BackendError("classifier: unknown label " + name, false);
    double conf = l.contains("confidence") ? field<double>(l, "confidence", "classifier") : 1.0;
    if (!(conf >= 0.0 && conf <= 1.0)) throw BackendError("classifier: confidence out of range", false);
    out.push_back({*e, conf});
  }
  return out;
}

std::string HttpGeneration::generate(const std::string& prompt, std::size_t max_tokens) const {
  json req{{"prompt", prompt}, {"max_tokens", max_tokens}};
  json res = decode(post_json(endpoint_, req.dump(), options_), "generation");
  return field<std::string>(res, "text", "generation");
}

std::string HttpSummary::summarize(std::span<const Utterance> utterances) const {
  json req{{"utterances", json::array()}};
  for (const auto& u : utterances)
    req["utterances"].push_back({{"speaker", speaker_name(u.speaker)}, {"text", u.text}});
  json res = decode(post_json(endpoint_, req.dump(), options_), "summary");
  return field<std::string>(res, "summary", "summary");
}

std::vector<QaSpan> HttpQa::answer(const SlotQuestion& question,
                                   std::span<const Utterance> history) const {
  json req{{"question", question.question}, {"slot", slot_name(question.slot)}, {"texts", json::array()}};
  for (const auto& u : history) req["texts"].push_back(u.text);
  json res = decode(post_json(endpoint_, req.dump(), options_), "qa");
  auto spans = field<json>(res, "spans", "qa");
  if (!spans.is_array()) throw BackendError("qa: spans is not an array", false);
  std::vector<QaSpan> out;
  for (const auto& s : spans) {
    QaSpan span;
    span.text = field<std::string>(s, "text", "qa");
    span.score = field<double>(s, "score", "qa");
    span.utterance_index = field<std::size_t>(s, "utterance_index", "qa");
    if (span.utterance_index >= history.size())
      throw BackendError("qa: utterance_index out of range", false);
    out.push_back(std::move(span));
  }
  return out;
}

}  // namespace safechat::backends
