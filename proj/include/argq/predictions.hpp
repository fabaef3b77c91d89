#pragma once

// Prediction records, their delimited file format and per-task mixing.
//
// File layout (comma-delimited, UTF-8):
//   instance_id,task,value,source,flagged
//   17,validity,positive,gpt3,false
// Rows are written sorted by (instance_id, task, source).

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "argq/common.hpp"
#include "argq/delimited.hpp"

namespace argq {

struct Prediction {
  std::string instance_id;
  Task task = Task::validity;
  Label value = Label::negative;
  std::string source;
  bool flagged = false;  // parser fell back to the default label

  bool operator==(const Prediction&) const = default;
};

inline bool prediction_order(const Prediction& a, const Prediction& b) {
  return std::tie(a.instance_id, a.task, a.source) < std::tie(b.instance_id, b.task, b.source);
}

class PredictionSet {
 public:
  PredictionSet() = default;
  explicit PredictionSet(std::vector<Prediction> rows) : rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end(), prediction_order);
    check_unique();
  }

  const std::vector<Prediction>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  void add(Prediction p) {
    auto pos = std::lower_bound(rows_.begin(), rows_.end(), p, prediction_order);
    if (pos != rows_.end() && !prediction_order(p, *pos))
      throw DataError("duplicate prediction (" + p.instance_id + ", " + to_string(p.task) + ", " + p.source + ")");
    rows_.insert(pos, std::move(p));
  }

  PredictionSet only(Task task) const {
    PredictionSet out;
    for (const auto& r : rows_)
      if (r.task == task) out.rows_.push_back(r);
    return out;
  }

  std::set<std::string> ids(Task task) const {
    std::set<std::string> s;
    for (const auto& r : rows_)
      if (r.task == task) s.insert(r.instance_id);
    return s;
  }

  std::set<std::string> sources(Task task) const {
    std::set<std::string> s;
    for (const auto& r : rows_)
      if (r.task == task) s.insert(r.source);
    return s;
  }

  // Set-level name: the common source, or "mix(a,b)" when validity and
  // novelty rows come from different single sources.
  std::string name() const {
    auto join = [](const std::set<std::string>& s) {
      std::string out;
      for (const auto& x : s) out += (out.empty() ? "" : "+") + x;
      return out;
    };
    const auto v = sources(Task::validity), n = sources(Task::novelty);
    if (v.empty()) return join(n);
    if (n.empty() || v == n) return join(v);
    return "mix(" + join(v) + "," + join(n) + ")";
  }

  std::size_t flagged_count(Task task) const {
    return static_cast<std::size_t>(std::count_if(
        rows_.begin(), rows_.end(), [&](const Prediction& p) { return p.task == task && p.flagged; }));
  }

  bool operator==(const PredictionSet&) const = default;

 private:
  void check_unique() const {
    for (std::size_t i = 1; i < rows_.size(); ++i)
      if (!prediction_order(rows_[i - 1], rows_[i]))
        throw DataError("duplicate prediction (" + rows_[i].instance_id + ", " + to_string(rows_[i].task) +
                        ", " + rows_[i].source + ")");
  }

  std::vector<Prediction> rows_;
};

inline std::string format_predictions(const PredictionSet& set) {
  std::string out = "instance_id,task,value,source,flagged\n";
  for (const auto& r : set.rows())
    out += delimited::format_row({r.instance_id, to_string(r.task), to_string(r.value), r.source,
                                  r.flagged ? "true" : "false"});
  return out;
}

inline PredictionSet parse_predictions(std::string_view text) {
  const auto table = delimited::parse(text);
  const std::vector<std::string> expected = {"instance_id", "task", "value", "source", "flagged"};
  if (table.header != expected)
    throw ParseError("line 1: prediction header must be 'instance_id,task,value,source,flagged'");
  std::vector<Prediction> rows;
  std::set<std::tuple<std::string, Task, std::string>> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "line " + std::to_string(table.lines[r]) + ": ";
    if (row.size() != expected.size())
      throw ParseError(where + "expected 5 fields, found " + std::to_string(row.size()));
    Prediction p;
    p.instance_id = row[0];
    p.source = row[3];
    try {
      p.task = parse_task(row[1]);
      p.value = parse_label(row[2]);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (row[4] == "true" || row[4] == "1") p.flagged = true;
    else if (row[4] == "false" || row[4] == "0") p.flagged = false;
    else throw ParseError(where + "flagged must be true or false, got '" + row[4] + "'");
    if (p.instance_id.empty()) throw ParseError(where + "empty instance_id");
    if (!seen.emplace(p.instance_id, p.task, p.source).second)
      throw ParseError(where + "duplicate (instance_id, task, source) (" + p.instance_id + ", " +
                       to_string(p.task) + ", " + p.source + ")");
    rows.push_back(std::move(p));
  }
  return PredictionSet(std::move(rows));
}

inline void save_predictions(const std::filesystem::path& path, const PredictionSet& set) {
  delimited::write_atomic(path, format_predictions(set));
}

inline PredictionSet load_predictions(const std::filesystem::path& path) {
  return parse_predictions(delimited::read_file(path));
}

// Validity rows from `validity_set`, novelty rows from `novelty_set`. Both
// must cover the same instance ids.
inline PredictionSet mix(const PredictionSet& validity_set, const PredictionSet& novelty_set) {
  const auto v = validity_set.ids(Task::validity);
  const auto n = novelty_set.ids(Task::novelty);
  if (v != n) {
    std::vector<std::string> missing;
    std::set_symmetric_difference(v.begin(), v.end(), n.begin(), n.end(), std::back_inserter(missing));
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw CoverageError("validity and novelty predictions cover different ids: " + list);
  }
  std::vector<Prediction> rows;
  for (const auto& r : validity_set.rows())
    if (r.task == Task::validity) rows.push_back(r);
  for (const auto& r : novelty_set.rows())
    if (r.task == Task::novelty) rows.push_back(r);
  return PredictionSet(std::move(rows));
}

}  // namespace argq
