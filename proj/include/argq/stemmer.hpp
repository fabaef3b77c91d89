#pragma once

// English Snowball (Porter2) stemmer.

#include <array>
#include <string>
#include <string_view>

namespace argq {

namespace porter2 {

inline bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

inline bool ends_with(const std::string& w, std::string_view s) {
  return w.size() >= s.size() && std::string_view(w).substr(w.size() - s.size()) == s;
}

inline bool is_double(const std::string& w) {
  if (w.size() < 2) return false;
  const char c = w.back();
  if (c != w[w.size() - 2]) return false;
  return c == 'b' || c == 'd' || c == 'f' || c == 'g' || c == 'm' || c == 'n' || c == 'p' || c == 'r' || c == 't';
}

inline bool valid_li_ending(char c) {
  return c == 'c' || c == 'd' || c == 'e' || c == 'g' || c == 'h' || c == 'k' || c == 'm' || c == 'n' || c == 'r' ||
         c == 't';
}

// Start of the region after the first non-vowel following a vowel, at or
// after `from`.
inline std::size_t region_after(const std::string& w, std::size_t from) {
  for (std::size_t i = from + 1; i < w.size(); ++i)
    if (!is_vowel(w[i]) && is_vowel(w[i - 1])) return i + 1;
  return w.size();
}

// Short syllable ending at position `end` (exclusive).
inline bool ends_short_syllable(const std::string& w, std::size_t end) {
  if (end == 2) return is_vowel(w[0]) && !is_vowel(w[1]);
  if (end >= 3) {
    const char a = w[end - 3], b = w[end - 2], c = w[end - 1];
    return !is_vowel(a) && is_vowel(b) && !is_vowel(c) && c != 'w' && c != 'x' && c != 'Y';
  }
  return false;
}

struct Word {
  std::string w;
  std::size_t r1 = 0, r2 = 0;

  bool in_r1(std::size_t suffix_len) const { return w.size() - suffix_len >= r1; }
  bool in_r2(std::size_t suffix_len) const { return w.size() - suffix_len >= r2; }
  bool has_vowel_before(std::size_t suffix_len) const {
    for (std::size_t i = 0; i + suffix_len < w.size(); ++i)
      if (is_vowel(w[i])) return true;
    return false;
  }
  void replace(std::size_t suffix_len, std::string_view with) {
    w.resize(w.size() - suffix_len);
    w += with;
  }
  bool is_short() const { return r1 >= w.size() && ends_short_syllable(w, w.size()); }
};

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
};

inline void step0(Word& x) {
  for (std::string_view s : {"'s'", "'s", "'"})
    if (ends_with(x.w, s)) {
      x.replace(s.size(), "");
      return;
    }
}

inline void step1a(Word& x) {
  auto& w = x.w;
  if (ends_with(w, "sses")) {
    x.replace(4, "ss");
  } else if (ends_with(w, "ied") || ends_with(w, "ies")) {
    x.replace(3, w.size() > 4 ? "i" : "ie");
  } else if (ends_with(w, "us") || ends_with(w, "ss")) {
    // unchanged
  } else if (ends_with(w, "s")) {
    // Delete if a vowel occurs before the letter preceding the s.
    for (std::size_t i = 0; i + 2 < w.size(); ++i)
      if (is_vowel(w[i])) {
        x.replace(1, "");
        break;
      }
  }
}

inline void step1b(Word& x) {
  auto& w = x.w;
  static constexpr std::array<std::string_view, 6> suffixes = {"eedly", "ingly", "edly", "eed", "ing", "ed"};
  for (std::string_view s : suffixes) {
    if (!ends_with(w, s)) continue;
    if (s == "eed" || s == "eedly") {
      if (x.in_r1(s.size())) x.replace(s.size(), "ee");
      return;
    }
    if (!x.has_vowel_before(s.size())) return;
    x.replace(s.size(), "");
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) w += 'e';
    else if (is_double(w)) w.pop_back();
    else if (x.is_short()) w += 'e';
    return;
  }
}

inline void step1c(Word& x) {
  auto& w = x.w;
  if (w.size() > 2 && (w.back() == 'y' || w.back() == 'Y') && !is_vowel(w[w.size() - 2])) w.back() = 'i';
}

inline void step2(Word& x) {
  static constexpr std::array<Rule, 24> rules = {{
      {"ization", "ize"}, {"ational", "ate"}, {"fulness", "ful"}, {"ousness", "ous"}, {"iveness", "ive"},
      {"tional", "tion"}, {"biliti", "ble"},  {"lessli", "less"}, {"entli", "ent"},  {"ation", "ate"},
      {"alism", "al"},    {"aliti", "al"},    {"ousli", "ous"},   {"iviti", "ive"},  {"fulli", "ful"},
      {"enci", "ence"},   {"anci", "ance"},   {"abli", "able"},   {"izer", "ize"},   {"ator", "ate"},
      {"alli", "al"},     {"bli", "ble"},     {"ogi", "og"},      {"li", ""},
  }};
  for (const auto& r : rules) {
    if (!ends_with(x.w, r.suffix)) continue;
    if (!x.in_r1(r.suffix.size())) return;
    const std::size_t stem = x.w.size() - r.suffix.size();
    if (r.suffix == "ogi") {
      if (stem > 0 && x.w[stem - 1] == 'l') x.replace(3, "og");
    } else if (r.suffix == "li") {
      if (stem > 0 && valid_li_ending(x.w[stem - 1])) x.replace(2, "");
    } else {
      x.replace(r.suffix.size(), r.replacement);
    }
    return;
  }
}

inline void step3(Word& x) {
  static constexpr std::array<Rule, 9> rules = {{
      {"ational", "ate"}, {"tional", "tion"}, {"alize", "al"}, {"icate", "ic"}, {"iciti", "ic"},
      {"ative", ""},      {"ical", "ic"},     {"ness", ""},    {"ful", ""},
  }};
  for (const auto& r : rules) {
    if (!ends_with(x.w, r.suffix)) continue;
    if (!x.in_r1(r.suffix.size())) return;
    if (r.suffix == "ative") {
      if (x.in_r2(5)) x.replace(5, "");
    } else {
      x.replace(r.suffix.size(), r.replacement);
    }
    return;
  }
}

inline void step4(Word& x) {
  static constexpr std::array<std::string_view, 18> suffixes = {
      "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
      "ate",   "iti",  "ous",  "ive",  "ize",  "ion",  "al",  "er",  "ic"};
  for (std::string_view s : suffixes) {
    if (!ends_with(x.w, s)) continue;
    if (!x.in_r2(s.size())) return;
    if (s == "ion") {
      const std::size_t stem = x.w.size() - 3;
      if (stem > 0 && (x.w[stem - 1] == 's' || x.w[stem - 1] == 't')) x.replace(3, "");
    } else {
      x.replace(s.size(), "");
    }
    return;
  }
}

inline void step5(Word& x) {
  auto& w = x.w;
  if (w.empty()) return;
  if (w.back() == 'e') {
    if (x.in_r2(1) || (x.in_r1(1) && !ends_short_syllable(w, w.size() - 1))) w.pop_back();
  } else if (w.back() == 'l') {
    if (x.in_r2(1) && w.size() >= 2 && w[w.size() - 2] == 'l') w.pop_back();
  }
}

inline const std::string* exception1(const std::string& w) {
  static const std::array<std::pair<std::string, std::string>, 18> table = {{
      {"skis", "ski"},    {"skies", "sky"},   {"dying", "die"},   {"lying", "lie"},    {"tying", "tie"},
      {"idly", "idl"},    {"gently", "gentl"}, {"ugly", "ugli"},  {"early", "earli"},  {"only", "onli"},
      {"singly", "singl"}, {"sky", "sky"},    {"news", "news"},   {"howe", "howe"},    {"atlas", "atlas"},
      {"cosmos", "cosmos"}, {"bias", "bias"}, {"andes", "andes"},
  }};
  for (const auto& [k, v] : table)
    if (k == w) return &v;
  return nullptr;
}

inline bool exception2(const std::string& w) {
  for (std::string_view s : {"inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed"})
    if (w == s) return true;
  return false;
}

}  // namespace porter2

// Expects a lowercase token. Tokens of two letters or fewer and tokens with
// non-alphabetic characters (other than apostrophes) pass through unchanged.
inline std::string stem(std::string_view token) {
  using namespace porter2;
  std::string w(token);
  if (w.size() <= 2) return w;
  for (char c : w)
    if (!((c >= 'a' && c <= 'z') || c == '\'')) return w;
  if (const std::string* e = exception1(w)) return *e;

  if (w[0] == '\'') w.erase(0, 1);
  if (w.empty()) return w;
  if (w[0] == 'y') w[0] = 'Y';
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] == 'y' && is_vowel(w[i - 1])) w[i] = 'Y';

  Word x{w, 0, 0};
  if (w.rfind("gener", 0) == 0 || w.rfind("arsen", 0) == 0) x.r1 = 5;
  else if (w.rfind("commun", 0) == 0) x.r1 = 6;
  else x.r1 = region_after(w, 0);
  x.r2 = x.r1 < w.size() ? region_after(w, x.r1) : w.size();
  if (x.r2 < x.r1) x.r2 = x.r1;

  step0(x);
  step1a(x);
  if (exception2(x.w)) return x.w;
  step1b(x);
  step1c(x);
  step2(x);
  step3(x);
  step4(x);
  step5(x);
  for (char& c : x.w)
    if (c == 'Y') c = 'y';
  return x.w;
}

}  // namespace argq
