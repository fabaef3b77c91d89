#pragma once

// Shared vocabulary types and the error hierarchy used across argq.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace argq {

enum class Task { validity, novelty };
enum class Label { negative, positive };
enum class Confidence { very_confident, confident, majority, defeasible, unknown };
enum class Split { train, dev, test };

inline constexpr Task kTasks[] = {Task::validity, Task::novelty};

// Every error carries a stable category string; the CLI prints it as the
// machine-parseable prefix of its one-line error message.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define ARGQ_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

ARGQ_DEFINE_ERROR(SchemaError, "schema")
ARGQ_DEFINE_ERROR(ValueError, "value")
ARGQ_DEFINE_ERROR(ConfigError, "config")
ARGQ_DEFINE_ERROR(DataError, "data")
ARGQ_DEFINE_ERROR(CoverageError, "coverage")
ARGQ_DEFINE_ERROR(ParseError, "parse")
ARGQ_DEFINE_ERROR(ProviderError, "provider")
ARGQ_DEFINE_ERROR(CacheMissError, "cache-miss")
ARGQ_DEFINE_ERROR(TrainingError, "training")
ARGQ_DEFINE_ERROR(IoError, "io")
ARGQ_DEFINE_ERROR(UsageError, "usage")

#undef ARGQ_DEFINE_ERROR

inline std::string to_string(Task t) {
  return t == Task::validity ? "validity" : "novelty";
}

inline std::string to_string(Label l) {
  return l == Label::positive ? "positive" : "negative";
}

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

inline std::string to_string(Confidence c) {
  switch (c) {
    case Confidence::very_confident: return "very-confident";
    case Confidence::confident: return "confident";
    case Confidence::majority: return "majority";
    case Confidence::defeasible: return "defeasible";
    case Confidence::unknown: return "unknown";
  }
  return "unknown";
}

inline Task parse_task(std::string_view s) {
  if (s == "validity") return Task::validity;
  if (s == "novelty") return Task::novelty;
  throw ParseError("unknown task '" + std::string(s) + "'");
}

inline Label parse_label(std::string_view s) {
  if (s == "positive") return Label::positive;
  if (s == "negative") return Label::negative;
  throw ParseError("unknown label '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

inline std::string trim(std::string_view s) {
  auto b = s.begin(), e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Free-text confidence tag to enum. Accepts the common spellings seen in
// annotation exports ("very confident", "Very-Confident", "very_confident").
inline Confidence parse_confidence(std::string_view raw) {
  std::string s = lowercase(trim(raw));
  std::replace(s.begin(), s.end(), '_', '-');
  std::replace(s.begin(), s.end(), ' ', '-');
  if (s == "very-confident") return Confidence::very_confident;
  if (s == "confident") return Confidence::confident;
  if (s == "majority") return Confidence::majority;
  if (s == "defeasible") return Confidence::defeasible;
  if (s.empty() || s == "unknown") return Confidence::unknown;
  throw ValueError("unknown confidence value '" + std::string(raw) + "'");
}

// 64-bit FNV-1a; used for token hashing and stable seeds, never for security.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace argq
