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

#ifndef SAFECHAT_TIMESTAMP_H_
#define SAFECHAT_TIMESTAMP_H_

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace safechat {

// An RFC 3339 instant. The UTC offset the value was written with is kept so
// that "local" hour-of-day analyses use the organization's clock as stored and
// so that serialization round-trips.
class Timestamp {
 public:
  using TimePoint = std::chrono::sys_time<std::chrono::milliseconds>;

  Timestamp() = default;
  explicit Timestamp(TimePoint utc, int offset_minutes = 0)
      : utc_(utc), offset_minutes_(offset_minutes) {}

  // Accepts YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM); 't'/'z'/' ' tolerated.
  static std::optional<Timestamp> parse(std::string_view text);
  static Timestamp from_civil(int year, unsigned month, unsigned day,
                              int hour = 0, int minute = 0, int second = 0);

  std::string to_string() const;

  TimePoint utc() const { return utc_; }
  int offset_minutes() const { return offset_minutes_; }

  // Wall-clock fields in the stored offset.
  int local_hour() const;
  int local_minute() const;
  int year() const;

  Timestamp plus_seconds(long long seconds) const;

  bool operator==(const Timestamp&) const = default;
  // Ordering is by instant only.
  std::weak_ordering operator<=>(const Timestamp& other) const {
    return utc_ <=> other.utc_;
  }

 private:
  std::chrono::sys_time<std::chrono::milliseconds> local() const {
    return utc_ + std::chrono::minutes(offset_minutes_);
  }

  TimePoint utc_{};
  int offset_minutes_ = 0;
};

}  // namespace safechat

#endif  // SAFECHAT_TIMESTAMP_H_
