#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace vissoc;

TEST(Timestamp, ParsesAndFormatsUtc) {
  const auto t = parse_timestamp("2025-01-01T00:00:00Z");
  EXPECT_EQ(t.seconds, 1735689600);
  EXPECT_EQ(format_timestamp(t), "2025-01-01T00:00:00Z");
  EXPECT_EQ(parse_timestamp("2025-01-01T00:00:00+00:00"), t);
  EXPECT_EQ(parse_timestamp("2024-02-29 23:59:59Z").seconds, parse_timestamp("2024-03-01T00:00:00Z").seconds - 1);
}

TEST(Timestamp, RejectsMalformedInput) {
  EXPECT_THROW(parse_timestamp("2025-01-01"), Error);
  EXPECT_THROW(parse_timestamp("2025-13-01T00:00:00Z"), Error);
  EXPECT_THROW(parse_timestamp("2025-02-30T00:00:00Z"), Error);
  EXPECT_THROW(parse_timestamp("2025-01-01T00:00:00+02:00"), Error);
  EXPECT_THROW(parse_timestamp("2025-01-01T24:00:00Z"), Error);
}

TEST(Timestamp, FormatRoundTripsOverManyInstants) {
  Rng rng(3);
  std::uniform_int_distribution<std::int64_t> u(-2'000'000'000LL, 4'000'000'000LL);
  for (int i = 0; i < 500; ++i) {
    const Timestamp t{u(rng)};
    EXPECT_EQ(parse_timestamp(format_timestamp(t)), t);
  }
}

TEST(WindowIndex, HalfOpenDays) {
  const Timestamp origin{1000};
  EXPECT_EQ(window_index(origin, origin, 3), 0);
  EXPECT_EQ(window_index(origin + (3 * kSecondsPerDay - 1), origin, 3), 0);
  EXPECT_EQ(window_index(origin + 3 * kSecondsPerDay, origin, 3), 1);
  EXPECT_EQ(window_index(Timestamp{999}, origin, 3), -1);
  EXPECT_EQ(window_index(origin + (-3 * kSecondsPerDay), origin, 3), -1);
  EXPECT_EQ(window_index(origin + (-3 * kSecondsPerDay - 1), origin, 3), -2);
}

TEST(TimeWindow, ContainsIsHalfOpen) {
  const TimeWindow w{Timestamp{10}, Timestamp{20}};
  EXPECT_TRUE(w.contains(Timestamp{10}));
  EXPECT_TRUE(w.contains(Timestamp{19}));
  EXPECT_FALSE(w.contains(Timestamp{20}));
  EXPECT_FALSE(w.contains(Timestamp{9}));
}

TEST(Seeds, DeriveSeedIsDeterministicAndTagSensitive) {
  EXPECT_EQ(derive_seed(42, 1, 2), derive_seed(42, 1, 2));
  EXPECT_NE(derive_seed(42, 1, 2), derive_seed(42, 2, 1));
  EXPECT_NE(derive_seed(42, 1), derive_seed(43, 1));
  EXPECT_EQ(hash_string("abc"), hash_string("abc"));
  EXPECT_NE(hash_string("abc"), hash_string("abd"));
}

TEST(Warnings, ScopedSinkCapturesAndRestores) {
  std::vector<std::string> seen;
  {
    ScopedWarningSink guard([&](std::string_view m) { seen.emplace_back(m); });
    warn("first");
    {
      std::vector<std::string> inner;
      ScopedWarningSink nested([&](std::string_view m) { inner.emplace_back(m); });
      warn("second");
      EXPECT_EQ(inner.size(), 1u);
    }
    warn("third");
  }
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0], "first");
  EXPECT_EQ(seen[1], "third");
}

TEST(Lexicon, FoldsDiacriticsAndSplitsOnNonLetters) {
  const auto t = tokenize("So CLICHÉD, derivative...and boring!");
  const std::vector<std::string> want{"so", "cliched", "derivative", "and", "boring"};
  EXPECT_EQ(t, want);
}

TEST(Lexicon, CriticalCommentNeedsExactToken) {
  EXPECT_TRUE(is_critical_comment("so derivative and boring"));
  EXPECT_TRUE(is_critical_comment("Clichéd."));
  EXPECT_FALSE(is_critical_comment("derivatives are calculus"));
  EXPECT_FALSE(is_critical_comment("lovely colours"));
  EXPECT_FALSE(is_critical_comment(""));
}

TEST(Lexicon, EveryTermIsDetectedAlone) {
  for (auto term : kAdversarialLexicon) EXPECT_TRUE(is_critical_comment(std::string(term))) << term;
}
