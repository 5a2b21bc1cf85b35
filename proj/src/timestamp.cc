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

#include "safechat/timestamp.h"

#include <cstdio>

namespace safechat {

namespace {

using namespace std::chrono;

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int* out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  *out = v;
  return true;
}

}  // namespace

std::optional<Timestamp> Timestamp::parse(std::string_view s) {
  int y, mo, d, h, mi, sec;
  if (s.size() < 20) return std::nullopt;
  if (!read_digits(s, 0, 4, &y) || s[4] != '-' || !read_digits(s, 5, 2, &mo) ||
      s[7] != '-' || !read_digits(s, 8, 2, &d)) {
    return std::nullopt;
  }
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return std::nullopt;
  if (!read_digits(s, 11, 2, &h) || s[13] != ':' ||
      !read_digits(s, 14, 2, &mi) || s[16] != ':' ||
      !read_digits(s, 17, 2, &sec)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    int scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      millis += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    if (!read_digits(s, pos + 1, 2, &oh) || pos + 3 >= s.size() ||
        s[pos + 3] != ':' || !read_digits(s, pos + 4, 2, &om)) {
      return std::nullopt;
    }
    if (oh > 23 || om > 59) return std::nullopt;
    offset = (oh * 60 + om) * (s[pos] == '-' ? -1 : 1);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  year_month_day ymd{std::chrono::year{y}, month{static_cast<unsigned>(mo)},
                     day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  auto local_tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} +
                  milliseconds{millis};
  return Timestamp(local_tp - minutes{offset}, offset);
}

Timestamp Timestamp::from_civil(int y, unsigned mo, unsigned d, int h, int mi,
                                int sec) {
  auto tp = sys_days{year_month_day{std::chrono::year{y}, month{mo}, day{d}}} + hours{h} +
            minutes{mi} + seconds{sec};
  return Timestamp(time_point_cast<milliseconds>(tp), 0);
}

std::string Timestamp::to_string() const {
  auto lt = local();
  auto dp = floor<days>(lt);
  year_month_day ymd{dp};
  hh_mm_ss tod{lt - dp};
  char buf[48];
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d",
                        static_cast<int>(ymd.year()),
                        static_cast<unsigned>(ymd.month()),
                        static_cast<unsigned>(ymd.day()),
                        static_cast<int>(tod.hours().count()),
                        static_cast<int>(tod.minutes().count()),
                        static_cast<int>(tod.seconds().count()));
  std::string out(buf, static_cast<std::size_t>(n));
  auto ms = tod.subseconds().count();
  if (ms != 0) {
    std::snprintf(buf, sizeof buf, ".%03d", static_cast<int>(ms));
    out += buf;
  }
  if (offset_minutes_ == 0) {
    out += 'Z';
  } else {
    int a = offset_minutes_ < 0 ? -offset_minutes_ : offset_minutes_;
    std::snprintf(buf, sizeof buf, "%c%02d:%02d",
                  offset_minutes_ < 0 ? '-' : '+', a / 60, a % 60);
    out += buf;
  }
  return out;
}

int Timestamp::local_hour() const {
  auto lt = local();
  return static_cast<int>(hh_mm_ss{lt - floor<days>(lt)}.hours().count());
}

int Timestamp::local_minute() const {
  auto lt = local();
  return static_cast<int>(hh_mm_ss{lt - floor<days>(lt)}.minutes().count());
}

int Timestamp::year() const {
  return static_cast<int>(year_month_day{floor<days>(local())}.year());
}

Timestamp Timestamp::plus_seconds(long long s) const {
  return Timestamp(utc_ + seconds{s}, offset_minutes_);
}

}  // namespace safechat
