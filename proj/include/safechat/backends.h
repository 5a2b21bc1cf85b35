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

// JSON-over-HTTP clients for the model backends. Connect failures, timeouts
// and 5xx responses raise retryable BackendErrors; 4xx responses and
// malformed bodies raise fatal ones.
//
//   classifier  POST {"texts": [...]}            -> {"labels": [{"label", "confidence"}]}
//   generation  POST {"prompt", "max_tokens"}    -> {"text"}
//   summary     POST {"utterances": [{"speaker", "text"}]} -> {"summary"}
//   qa          POST {"question", "texts": [...]} -> {"spans": [{"text", "score", "utterance_index"}]}

#ifndef SAFECHAT_BACKENDS_H_
#define SAFECHAT_BACKENDS_H_

#include <chrono>
#include <string>
#include <string_view>

#include "safechat/assist.h"
#include "safechat/emotion.h"
#include "safechat/events.h"

namespace safechat::backends {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";

  // "http://host[:port][/path]". Throws ValidationError otherwise.
  static Endpoint parse(std::string_view url);
};

struct HttpOptions {
  std::chrono::milliseconds timeout{10000};
  std::string bearer_token;
};

// Posts `body` and returns the decoded JSON response text.
std::string post_json(const Endpoint& endpoint, const std::string& body,
                      const HttpOptions& options = {});

class HttpClassifier : public EmotionClassifier {
 public:
  explicit HttpClassifier(Endpoint endpoint, HttpOptions options = {})
      : endpoint_(std::move(endpoint)), options_(std::move(options)) {}
  std::vector<EmotionLabel> classify_batch(std::span<const std::string> texts) const override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

class HttpGeneration : public GenerationBackend {
 public:
  explicit HttpGeneration(Endpoint endpoint, HttpOptions options = {})
      : endpoint_(std::move(endpoint)), options_(std::move(options)) {}
  std::string generate(const std::string& prompt, std::size_t max_tokens) const override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

class HttpSummary : public SummaryBackend {
 public:
  explicit HttpSummary(Endpoint endpoint, HttpOptions options = {})
      : endpoint_(std::move(endpoint)), options_(std::move(options)) {}
  std::string summarize(std::span<const Utterance> utterances) const override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

class HttpQa : public QaBackend {
 public:
  explicit HttpQa(Endpoint endpoint, HttpOptions options = {})
      : endpoint_(std::move(endpoint)), options_(std::move(options)) {}
  std::vector<QaSpan> answer(const SlotQuestion& question,
                             std::span<const Utterance> history) const override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

}  // namespace safechat::backends

#endif  // SAFECHAT_BACKENDS_H_
