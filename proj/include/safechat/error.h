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

#ifndef SAFECHAT_ERROR_H_
#define SAFECHAT_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace safechat {

// Base of every error raised by the library. The CLI maps the subclasses onto
// exit codes and the service maps them onto HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or value constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A corpus or config line could not be decoded.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, std::string field, const std::string& detail)
      : ValidationError("line " + std::to_string(line) + ": " + detail),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

// Failure talking to a model backend. Retryable errors are transport-level
// (connect failure, timeout, 5xx); fatal ones are protocol violations.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace safechat

#endif  // SAFECHAT_ERROR_H_
