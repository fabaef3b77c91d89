#pragma once

// Shared-task corpus: loading delimited files, the tri-valued to binary label
// mapping, class statistics, topic overlap and contrastive triplet mining.

#include <array>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "argq/common.hpp"
#include "argq/delimited.hpp"

namespace argq {

inline Label map_label(int raw, Task task) {
  switch (raw) {
    case 1: return Label::positive;
    case 0:   // defeasibly valid / somewhat novel
    case -1: return Label::negative;
    default:
      throw ValueError("raw " + to_string(task) + " label " + std::to_string(raw) +
                       " outside {-1, 0, 1}");
  }
}

struct ArgumentInstance {
  std::string id;
  std::string topic;
  std::string premise;
  std::string conclusion;
  int validity_raw = -1;
  int novelty_raw = -1;
  Confidence validity_confidence = Confidence::unknown;
  Confidence novelty_confidence = Confidence::unknown;
  Split split = Split::train;

  int raw(Task t) const { return t == Task::validity ? validity_raw : novelty_raw; }
  Label label(Task t) const { return map_label(raw(t), t); }
  Confidence confidence(Task t) const {
    return t == Task::validity ? validity_confidence : novelty_confidence;
  }
};

using Corpus = std::vector<ArgumentInstance>;

// Column names in the input header. An empty `id` or confidence name means
// the column is not expected.
struct ColumnMap {
  std::string id = "id";
  std::string topic = "topic";
  std::string premise = "Premise";
  std::string conclusion = "Conclusion";
  std::string validity = "Validity";
  std::string validity_confidence = "Validity-Confidence";
  std::string novelty = "Novelty";
  std::string novelty_confidence = "Novelty-Confidence";
  // Cell text -> raw label. Consulted before integer parsing, so exports that
  // spell labels out ("defeasible", "somewhat") can be loaded.
  std::map<std::string, int> value_map;
};

namespace detail {

inline int parse_raw_label(const std::string& cell, const ColumnMap& cols, std::size_t row,
                           const std::string& column) {
  std::string s = trim(cell);
  if (auto it = cols.value_map.find(s); it != cols.value_map.end()) s = std::to_string(it->second);
  // Exports sometimes write labels as floats ("1.0").
  char* end = nullptr;
  double v = s.empty() ? 2.0 : std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || (v != -1.0 && v != 0.0 && v != 1.0))
    throw ValueError("row " + std::to_string(row) + ": " + column + " value '" + cell +
                     "' outside {-1, 0, 1}");
  return static_cast<int>(v);
}

}  // namespace detail

// Label columns may be missing only under `optional`, for inference on
// unlabeled files; absent labels keep the default (negative).
enum class LabelColumns { required, optional };

inline Corpus parse_corpus(const delimited::Table& table, const ColumnMap& cols, Split split,
                           LabelColumns labels = LabelColumns::required) {
  auto require = [&](const std::string& name) {
    long idx = table.column(name);
    if (idx < 0) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(idx);
  };
  auto optional = [&](const std::string& name) {
    return name.empty() ? -1L : table.column(name);
  };
  const std::size_t topic = require(cols.topic);
  const std::size_t premise = require(cols.premise);
  const std::size_t conclusion = require(cols.conclusion);
  const bool need = labels == LabelColumns::required;
  const long validity = need ? static_cast<long>(require(cols.validity)) : optional(cols.validity);
  const long novelty = need ? static_cast<long>(require(cols.novelty)) : optional(cols.novelty);
  const long id = optional(cols.id);
  const long vconf = optional(cols.validity_confidence);
  const long nconf = optional(cols.novelty_confidence);

  Corpus out;
  out.reserve(table.rows.size());
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto cell = [&](std::size_t c) -> const std::string& {
      static const std::string empty;
      return c < row.size() ? row[c] : empty;
    };
    ArgumentInstance inst;
    inst.split = split;
    inst.id = id >= 0 ? trim(cell(static_cast<std::size_t>(id))) : std::to_string(r);
    if (inst.id.empty()) inst.id = std::to_string(r);
    inst.topic = trim(cell(topic));
    inst.premise = trim(cell(premise));
    inst.conclusion = trim(cell(conclusion));
    if (inst.premise.empty()) throw ValueError("row " + std::to_string(r) + ": empty premise");
    if (inst.conclusion.empty()) throw ValueError("row " + std::to_string(r) + ": empty conclusion");
    if (validity >= 0)
      inst.validity_raw = detail::parse_raw_label(cell(static_cast<std::size_t>(validity)), cols, r, cols.validity);
    if (novelty >= 0)
      inst.novelty_raw = detail::parse_raw_label(cell(static_cast<std::size_t>(novelty)), cols, r, cols.novelty);
    try {
      if (vconf >= 0) inst.validity_confidence = parse_confidence(cell(static_cast<std::size_t>(vconf)));
      if (nconf >= 0) inst.novelty_confidence = parse_confidence(cell(static_cast<std::size_t>(nconf)));
    } catch (const ValueError& e) {
      throw ValueError("row " + std::to_string(r) + ": " + e.what());
    }
    if (!seen.insert(inst.id).second)
      throw ValueError("row " + std::to_string(r) + ": duplicate id '" + inst.id + "'");
    out.push_back(std::move(inst));
  }
  return out;
}

inline Corpus load_corpus(const std::filesystem::path& path, const ColumnMap& cols, Split split,
                          LabelColumns labels = LabelColumns::required) {
  if (!std::filesystem::exists(path)) throw IoError("corpus file '" + path.string() + "' does not exist");
  return parse_corpus(delimited::read(path), cols, split, labels);
}

// Writes a corpus in the default column layout (round-trips through load_corpus).
inline std::string format_corpus(const Corpus& corpus, const ColumnMap& cols = {}) {
  std::string out = delimited::format_row({cols.id.empty() ? "id" : cols.id, cols.topic, cols.premise,
                                           cols.conclusion, cols.validity, cols.validity_confidence,
                                           cols.novelty, cols.novelty_confidence});
  for (const auto& i : corpus)
    out += delimited::format_row({i.id, i.topic, i.premise, i.conclusion, std::to_string(i.validity_raw),
                                  to_string(i.validity_confidence), std::to_string(i.novelty_raw),
                                  to_string(i.novelty_confidence)});
  return out;
}

// Counts ordered (non-valid & non-novel, non-valid & novel, valid & non-novel, valid & novel).
struct ClassDistribution {
  std::array<std::size_t, 4> counts{};

  std::size_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  bool operator==(const ClassDistribution&) const = default;
};

inline std::size_t joint_class(Label validity, Label novelty) {
  return (validity == Label::positive ? 2u : 0u) + (novelty == Label::positive ? 1u : 0u);
}

inline ClassDistribution class_distribution(const Corpus& instances) {
  ClassDistribution d;
  for (const auto& i : instances) ++d.counts[joint_class(i.label(Task::validity), i.label(Task::novelty))];
  return d;
}

inline std::set<std::string> unique_topics(const Corpus& instances) {
  std::set<std::string> topics;
  for (const auto& i : instances) topics.insert(trim(i.topic));
  return topics;
}

inline std::size_t topic_overlap(const Corpus& a, const Corpus& b) {
  const auto ta = unique_topics(a);
  const auto tb = unique_topics(b);
  std::size_t n = 0;
  for (const auto& t : ta) n += tb.count(t);
  return n;
}

struct TripletExample {
  std::string anchor;
  std::string positive;
  std::string negative;
  std::string topic;

  bool operator==(const TripletExample&) const = default;
};

// Groups by (topic, exact premise) in first-appearance order and emits every
// (novel conclusion, non-novel conclusion) pair within a group.
inline std::vector<TripletExample> extract_triplets(const Corpus& instances) {
  struct Group {
    std::string topic, premise;
    std::vector<std::string> positives, negatives;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& i : instances) {
    auto key = std::make_pair(i.topic, i.premise);
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back({i.topic, i.premise, {}, {}});
    auto& g = groups[it->second];
    (i.label(Task::novelty) == Label::positive ? g.positives : g.negatives).push_back(i.conclusion);
  }
  std::vector<TripletExample> out;
  for (const auto& g : groups)
    for (const auto& p : g.positives)
      for (const auto& n : g.negatives)
        if (p != n) out.push_back({g.premise, p, n, g.topic});
  return out;
}

}  // namespace argq
