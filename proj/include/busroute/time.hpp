#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace busroute {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Duration = std::chrono::milliseconds;

/// Parses `YYYY-MM-DDTHH:MM[:SS[.fff]][Z|±HH:MM]` (a space is accepted in place
/// of `T`). Returns nullopt on malformed input. Times without a zone are UTC.
std::optional<Timestamp> parse_iso8601(std::string_view s);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`, with `.fff` when milliseconds are
/// non-zero.
std::string format_iso8601(Timestamp t);

inline Duration hours_to_duration(double h) {
  return Duration{static_cast<Duration::rep>(std::llround(h * 3'600'000.0))};
}

/// Half-open interval [begin, end).
struct TimeWindow {
  Timestamp begin = Timestamp::min();
  Timestamp end = Timestamp::max();

  bool contains(Timestamp t) const { return t >= begin && t < end; }
  bool empty() const { return end <= begin; }
  bool bounded() const {
    return begin != Timestamp::min() && end != Timestamp::max();
  }

  static TimeWindow all() { return {}; }
};

}  // namespace busroute
