#pragma once

// Shared primitives: error type, warning sink, seeded generators, timestamps.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace vissoc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Warnings never change control flow; they go to a replaceable sink.

using WarningSink = std::function<void(std::string_view)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) {
    std::fprintf(stderr, "warning: %.*s\n", static_cast<int>(msg.size()), msg.data());
  };
  return sink;
}

inline void warn(std::string_view msg) {
  if (auto& sink = warning_sink()) sink(msg);
}

// Installs a sink for the lifetime of the guard.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(WarningSink sink) : saved_(std::exchange(warning_sink(), std::move(sink))) {}
  ~ScopedWarningSink() { warning_sink() = std::move(saved_); }
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  WarningSink saved_;
};

// ---------------------------------------------------------------------------
// Random numbers. Every stochastic routine takes an explicit seed or Rng&.

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-dependent mix of a base seed with any number of integer tags.
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
  std::uint64_t s = splitmix64(base);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Timestamps: whole seconds since the Unix epoch, UTC.

struct Timestamp {
  std::int64_t seconds = 0;

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
  friend constexpr Timestamp operator+(Timestamp t, std::int64_t s) { return {t.seconds + s}; }
  friend constexpr std::int64_t operator-(Timestamp a, Timestamp b) { return a.seconds - b.seconds; }
};

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kSecondsPerDay = 86400;

// Parses "YYYY-MM-DDTHH:MM:SSZ" (a "+00:00" suffix is also accepted).
inline Timestamp parse_timestamp(std::string_view s) {
  auto fail = [&]() -> Timestamp { throw Error("invalid ISO-8601 UTC timestamp '" + std::string(s) + "'"); };
  auto digits = [&](std::size_t pos, std::size_t n) -> int {
    if (pos + n > s.size()) fail();
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
    fail();
  const auto tail = s.substr(19);
  if (tail != "Z" && tail != "+00:00") fail();
  const int year = digits(0, 4), month = digits(5, 2), day = digits(8, 2);
  const int hour = digits(11, 2), minute = digits(14, 2), second = digits(17, 2);
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) fail();
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return {static_cast<std::int64_t>(days) * kSecondsPerDay + hour * 3600 + minute * 60 + second};
}

inline std::string format_timestamp(Timestamp t) {
  std::int64_t days = t.seconds / kSecondsPerDay;
  std::int64_t rem = t.seconds % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

// Half-open [begin, end).
struct TimeWindow {
  Timestamp begin;
  Timestamp end;
  [[nodiscard]] constexpr bool contains(Timestamp t) const { return begin <= t && t < end; }
};

// Index of the window_days-long half-open window containing t, counted from origin.
constexpr std::int64_t window_index(Timestamp t, Timestamp origin, int window_days) {
  const std::int64_t width = static_cast<std::int64_t>(window_days) * kSecondsPerDay;
  const std::int64_t d = t - origin;
  return d >= 0 ? d / width : -((-d + width - 1) / width);
}

}  // namespace vissoc
