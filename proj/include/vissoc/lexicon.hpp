#pragma once

// Critical-comment lexicon and the tokenizer used to match it.

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace vissoc {

inline constexpr std::array<std::string_view, 20> kAdversarialLexicon = {
    "boring",    "derivative", "predictable", "generic",   "uninspired", "cliched",  "mediocre",
    "unimaginative", "trite",  "hackneyed",   "overplayed", "overdone",  "safe",     "timid",
    "conventional",  "lazy",   "formulaic",   "stagnant",  "redundant",  "superficial"};

namespace detail {

// ASCII base letter for U+00C0..U+017F, or 0 when the code point has none.
inline char fold_latin(char32_t cp) {
  static constexpr std::string_view latin1 =  // U+00C0..U+00FF
      "AAAAAAACEEEEIIII"
      "DNOOOOO OUUUUYTs"
      "aaaaaaaceeeeiiii"
      "dnooooo ouuuuyty";
  static constexpr std::string_view ext_a =  // U+0100..U+017F
      "AaAaAaCcCcCcCcDd"
      "DdEeEeEeEeEeGgGg"
      "GgGgHhHhIiIiIiIi"
      "IiJjJjKkkLlLlLlL"
      "lLlNnNnNnnNnOoOo"
      "OoOoRrRrRrSsSsSs"
      "SsTtTtTtUuUuUuUu"
      "UuUuWwYyYZzZzZzs";
  char c = 0;
  if (cp >= 0xC0 && cp <= 0xFF) c = latin1[cp - 0xC0];
  else if (cp >= 0x100 && cp <= 0x17F) c = ext_a[cp - 0x100];
  return c == ' ' ? 0 : c;
}

}  // namespace detail

/// Lowercases, folds Latin diacritics to their base letters and splits on
/// every non-alphabetic character. Other non-ASCII code points are kept
/// inside tokens verbatim.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) cur.push_back(static_cast<char>(c | 0x20));
      else flush();
      ++i;
      continue;
    }
    std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
    len = std::min(len, text.size() - i);
    char32_t cp = 0;
    if (len == 2) cp = ((c & 0x1F) << 6) | (static_cast<unsigned char>(text[i + 1]) & 0x3F);
    else if (len == 3)
      cp = ((c & 0x0F) << 12) | ((static_cast<unsigned char>(text[i + 1]) & 0x3F) << 6) |
           (static_cast<unsigned char>(text[i + 2]) & 0x3F);
    // Combining diacritical marks vanish; folded letters join the token.
    if (cp >= 0x300 && cp <= 0x36F) {
      i += len;
      continue;
    }
    if (const char base = detail::fold_latin(cp)) {
      cur.push_back(static_cast<char>(base | 0x20));
    } else if (cp == 0xD7 || cp == 0xF7 || (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0xA0 && cp <= 0xBF)) {
      flush();  // multiplication/division signs, general punctuation, Latin-1 symbols
    } else {
      cur.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return tokens;
}

/// True when any token of `text` is a lexicon term (exact match, no stemming).
inline bool is_critical_comment(std::string_view text) {
  for (const auto& t : tokenize(text))
    if (std::find(kAdversarialLexicon.begin(), kAdversarialLexicon.end(), t) != kAdversarialLexicon.end()) return true;
  return false;
}

}  // namespace vissoc
