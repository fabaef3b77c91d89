#pragma once

// Scoring and error analysis over prediction sets.
//
// Confusion matrices are indexed [true][predicted] with the negative class
// first. Precision, recall and F1 use the zero-division-is-zero convention.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "argq/common.hpp"
#include "argq/corpus.hpp"
#include "argq/predictions.hpp"
#include "json.hpp"

namespace argq {

template <std::size_t N>
struct Confusion {
  std::array<std::array<std::size_t, N>, N> counts{};

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return t;
  }
  std::size_t row_sum(std::size_t c) const {
    return std::accumulate(counts[c].begin(), counts[c].end(), std::size_t{0});
  }
  std::size_t column_sum(std::size_t c) const {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[c];
    return s;
  }
  bool operator==(const Confusion&) const = default;
};

using ConfusionMatrix = Confusion<2>;
using JointConfusion = Confusion<4>;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // true count (row sum)
};

template <std::size_t N>
std::array<ClassScores, N> prf(const Confusion<N>& m) {
  std::array<ClassScores, N> out{};
  for (std::size_t c = 0; c < N; ++c) {
    const double tp = static_cast<double>(m.counts[c][c]);
    const std::size_t predicted = m.column_sum(c), actual = m.row_sum(c);
    auto& s = out[c];
    s.support = actual;
    s.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

// Unweighted mean of per-class F1 over the classes that occur in either the
// gold labels or the predictions. A class absent from both carries no
// information and is left out, so a perfect prediction always scores 1.
template <std::size_t N>
double macro_f1(const Confusion<N>& m) {
  const auto scores = prf(m);
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < N; ++c) {
    if (m.row_sum(c) == 0 && m.column_sum(c) == 0) continue;
    sum += scores[c].f1;
    ++classes;
  }
  return classes ? sum / static_cast<double>(classes) : 0.0;
}

inline std::size_t label_index(Label l) { return l == Label::positive ? 1 : 0; }

namespace detail {

// (instance id, task) -> prediction, rejecting ambiguous coverage.
inline std::unordered_map<std::string, const Prediction*> index_predictions(const PredictionSet& preds,
                                                                            Task task) {
  std::unordered_map<std::string, const Prediction*> idx;
  for (const auto& p : preds.rows()) {
    if (p.task != task) continue;
    if (!idx.emplace(p.instance_id, &p).second)
      throw CoverageError("instance '" + p.instance_id + "' has several " + to_string(task) +
                          " predictions (sources disagree on ownership)");
  }
  return idx;
}

inline std::vector<const Prediction*> align(const PredictionSet& preds, const Corpus& golds, Task task) {
  const auto idx = index_predictions(preds, task);
  std::vector<const Prediction*> out;
  std::vector<std::string> missing;
  out.reserve(golds.size());
  for (const auto& g : golds) {
    auto it = idx.find(g.id);
    if (it == idx.end()) missing.push_back(g.id);
    else out.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    throw CoverageError(std::to_string(missing.size()) + " gold instances lack a " + to_string(task) +
                        " prediction: " + list);
  }
  return out;
}

}  // namespace detail

inline ConfusionMatrix confusion(const PredictionSet& preds, const Corpus& golds, Task task) {
  const auto aligned = detail::align(preds, golds, task);
  ConfusionMatrix m;
  for (std::size_t i = 0; i < golds.size(); ++i)
    ++m.counts[label_index(golds[i].label(task))][label_index(aligned[i]->value)];
  return m;
}

// Four joint classes (validity x novelty) in ClassDistribution order.
inline JointConfusion joint_confusion(const PredictionSet& preds, const Corpus& golds) {
  const auto v = detail::align(preds, golds, Task::validity);
  const auto n = detail::align(preds, golds, Task::novelty);
  JointConfusion m;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto truth = joint_class(golds[i].label(Task::validity), golds[i].label(Task::novelty));
    const auto guess = joint_class(v[i]->value, n[i]->value);
    ++m.counts[truth][guess];
  }
  return m;
}

// Combined-score definitions, selected by key and recorded in every report.
using CombinedMetric = std::function<double(const PredictionSet&, const Corpus&)>;

inline const std::map<std::string, CombinedMetric>& combined_metrics() {
  static const std::map<std::string, CombinedMetric> registry = {
      {"joint-macro-f1",
       [](const PredictionSet& p, const Corpus& g) { return macro_f1(joint_confusion(p, g)); }},
      {"mean-task-macro-f1",
       [](const PredictionSet& p, const Corpus& g) {
         return 0.5 * (macro_f1(confusion(p, g, Task::validity)) + macro_f1(confusion(p, g, Task::novelty)));
       }},
  };
  return registry;
}

inline constexpr const char* kDefaultCombinedMetric = "joint-macro-f1";

inline double combined_score(const PredictionSet& preds, const Corpus& golds,
                             const std::string& metric = kDefaultCombinedMetric) {
  const auto& reg = combined_metrics();
  auto it = reg.find(metric);
  if (it == reg.end()) throw ConfigError("unknown combined metric '" + metric + "'");
  return it->second(preds, golds);
}

struct ConfidenceBucket {
  Confidence confidence = Confidence::unknown;
  double correct_fraction = 0.0;
  double error_fraction = 0.0;
  std::size_t count = 0;
};

// One bucket per confidence value that occurs, in enum order; `unknown` is
// always last when present.
inline std::vector<ConfidenceBucket> confidence_buckets(const PredictionSet& preds, const Corpus& golds,
                                                        Task task) {
  const auto aligned = detail::align(preds, golds, task);
  std::map<Confidence, std::pair<std::size_t, std::size_t>> tally;  // correct, total
  for (std::size_t i = 0; i < golds.size(); ++i) {
    auto& t = tally[golds[i].confidence(task)];
    t.first += aligned[i]->value == golds[i].label(task) ? 1 : 0;
    ++t.second;
  }
  std::vector<ConfidenceBucket> out;
  for (const auto& [conf, t] : tally) {
    const double n = static_cast<double>(t.second);
    out.push_back({conf, static_cast<double>(t.first) / n, static_cast<double>(t.second - t.first) / n, t.second});
  }
  return out;
}

struct TopicError {
  std::string topic;
  double error_rate = 0.0;
  std::size_t count = 0;
};

// Sorted by error rate descending, ties by topic. top_k = 0 keeps all.
inline std::vector<TopicError> topic_error_rates(const PredictionSet& preds, const Corpus& golds, Task task,
                                                 std::size_t top_k = 3) {
  const auto aligned = detail::align(preds, golds, task);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // errors, total
  for (std::size_t i = 0; i < golds.size(); ++i) {
    auto& t = tally[trim(golds[i].topic)];
    t.first += aligned[i]->value != golds[i].label(task) ? 1 : 0;
    ++t.second;
  }
  std::vector<TopicError> out;
  for (const auto& [topic, t] : tally)
    out.push_back({topic, static_cast<double>(t.first) / static_cast<double>(t.second), t.second});
  std::stable_sort(out.begin(), out.end(), [](const TopicError& a, const TopicError& b) {
    if (a.error_rate != b.error_rate) return a.error_rate > b.error_rate;
    return a.topic < b.topic;
  });
  if (top_k && out.size() > top_k) out.resize(top_k);
  return out;
}

// One training epoch as seen by model selection and seed analysis.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_combined_f1 = 0.0;
  double dev_validity_f1 = 0.0;
  double dev_novelty_f1 = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"train_loss", r.train_loss},
       {"dev_combined_f1", r.dev_combined_f1},
       {"dev_validity_f1", r.dev_validity_f1},
       {"dev_novelty_f1", r.dev_novelty_f1}};
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.dev_combined_f1 = j.at("dev_combined_f1").get<double>();
  r.dev_validity_f1 = j.value("dev_validity_f1", 0.0);
  r.dev_novelty_f1 = j.value("dev_novelty_f1", 0.0);
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  double final_combined_f1 = 0.0;
};

struct LossEnvelope {
  std::size_t epoch = 0;
  double min = 0.0, mean = 0.0, max = 0.0;
};

struct SeedSummary {
  std::size_t runs = 0;
  double mean_combined_f1 = 0.0;
  double std_combined_f1 = 0.0;  // sample standard deviation (n - 1)
  std::vector<LossEnvelope> loss;
};

inline SeedSummary seed_summary(const std::vector<SeedRun>& runs) {
  if (runs.size() < 2) throw ConfigError("seed summary needs at least 2 runs, got " + std::to_string(runs.size()));
  SeedSummary s;
  s.runs = runs.size();
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) s.mean_combined_f1 += r.final_combined_f1;
  s.mean_combined_f1 /= n;
  double ss = 0.0;
  for (const auto& r : runs) ss += (r.final_combined_f1 - s.mean_combined_f1) * (r.final_combined_f1 - s.mean_combined_f1);
  s.std_combined_f1 = std::sqrt(ss / (n - 1.0));
  std::size_t epochs = runs[0].history.size();
  for (const auto& r : runs) epochs = std::min(epochs, r.history.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    LossEnvelope env{runs[0].history[e].epoch, runs[0].history[e].train_loss, 0.0, runs[0].history[e].train_loss};
    for (const auto& r : runs) {
      const double l = r.history[e].train_loss;
      env.min = std::min(env.min, l);
      env.max = std::max(env.max, l);
      env.mean += l;
    }
    env.mean /= n;
    s.loss.push_back(env);
  }
  return s;
}

inline nlohmann::json to_json(const SeedSummary& s) {
  nlohmann::json loss = nlohmann::json::array();
  for (const auto& e : s.loss) loss.push_back({{"epoch", e.epoch}, {"min", e.min}, {"mean", e.mean}, {"max", e.max}});
  return {{"runs", s.runs},
          {"mean_combined_f1", s.mean_combined_f1},
          {"std_combined_f1", s.std_combined_f1},
          {"loss_envelope", loss}};
}

struct TaskReport {
  Task task = Task::validity;
  ConfusionMatrix confusion;
  std::array<ClassScores, 2> classes{};
  double macro_f1 = 0.0;
  std::vector<ConfidenceBucket> buckets;
  std::vector<TopicError> topics;
  std::size_t flagged = 0;
};

struct EvalReport {
  std::string name;
  std::string combined_metric = kDefaultCombinedMetric;
  double combined = 0.0;
  std::size_t instances = 0;
  std::vector<TaskReport> tasks;
};

inline EvalReport evaluate(const PredictionSet& preds, const Corpus& golds,
                           const std::string& metric = kDefaultCombinedMetric, std::size_t top_k = 3) {
  EvalReport r;
  r.name = preds.name();
  r.combined_metric = metric;
  r.combined = combined_score(preds, golds, metric);
  r.instances = golds.size();
  for (Task t : kTasks) {
    TaskReport tr;
    tr.task = t;
    tr.confusion = confusion(preds, golds, t);
    tr.classes = prf(tr.confusion);
    tr.macro_f1 = macro_f1(tr.confusion);
    tr.buckets = confidence_buckets(preds, golds, t);
    tr.topics = topic_error_rates(preds, golds, t, top_k);
    tr.flagged = preds.flagged_count(t);
    r.tasks.push_back(std::move(tr));
  }
  return r;
}

inline const TaskReport& task_report(const EvalReport& r, Task t) {
  for (const auto& tr : r.tasks)
    if (tr.task == t) return tr;
  throw DataError("report has no " + to_string(t) + " section");
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& tr : r.tasks) {
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < 2; ++c)
      classes[c ? "positive" : "negative"] = {{"precision", tr.classes[c].precision},
                                              {"recall", tr.classes[c].recall},
                                              {"f1", tr.classes[c].f1},
                                              {"support", tr.classes[c].support}};
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : tr.buckets)
      buckets.push_back({{"confidence", to_string(b.confidence)},
                         {"correct_fraction", b.correct_fraction},
                         {"error_fraction", b.error_fraction},
                         {"count", b.count}});
    nlohmann::json topics = nlohmann::json::array();
    for (const auto& t : tr.topics)
      topics.push_back({{"topic", t.topic}, {"error_rate", t.error_rate}, {"count", t.count}});
    const auto& m = tr.confusion.counts;
    tasks[to_string(tr.task)] = {{"confusion", {{m[0][0], m[0][1]}, {m[1][0], m[1][1]}}},
                                 {"classes", classes},
                                 {"macro_f1", tr.macro_f1},
                                 {"confidence_buckets", buckets},
                                 {"topic_error_rates", topics},
                                 {"flagged", tr.flagged}};
  }
  return {{"name", r.name},
          {"combined_metric", r.combined_metric},
          {"combined", r.combined},
          {"instances", r.instances},
          {"tasks", tasks}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.name = j.at("name").get<std::string>();
  r.combined_metric = j.at("combined_metric").get<std::string>();
  r.combined = j.at("combined").get<double>();
  r.instances = j.at("instances").get<std::size_t>();
  for (Task t : kTasks) {
    const auto& tj = j.at("tasks").at(to_string(t));
    TaskReport tr;
    tr.task = t;
    const auto m = tj.at("confusion");
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) tr.confusion.counts[a][b] = m.at(a).at(b).get<std::size_t>();
    tr.classes = prf(tr.confusion);
    tr.macro_f1 = tj.at("macro_f1").get<double>();
    for (const auto& b : tj.at("confidence_buckets"))
      tr.buckets.push_back({parse_confidence(b.at("confidence").get<std::string>()),
                            b.at("correct_fraction").get<double>(), b.at("error_fraction").get<double>(),
                            b.at("count").get<std::size_t>()});
    for (const auto& t2 : tj.at("topic_error_rates"))
      tr.topics.push_back({t2.at("topic").get<std::string>(), t2.at("error_rate").get<double>(),
                           t2.at("count").get<std::size_t>()});
    tr.flagged = tj.at("flagged").get<std::size_t>();
    r.tasks.push_back(std::move(tr));
  }
  return r;
}

inline std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "predictions: " << r.name << "  instances: " << r.instances << "\n";
  out << "combined (" << r.combined_metric << "): " << r.combined << "\n\n";
  for (const auto& tr : r.tasks) {
    const bool val = tr.task == Task::validity;
    const std::string neg = val ? "non-valid" : "non-novel", pos = val ? "valid" : "novel";
    out << to_string(tr.task) << "  macro F1 " << tr.macro_f1 << "  flagged " << tr.flagged << "\n";
    out << "  " << std::left << std::setw(10) << "" << std::right << std::setw(7) << "Prec." << std::setw(7)
        << "Rec." << std::setw(7) << "F1" << std::setw(9) << "Support" << "\n";
    for (std::size_t c = 0; c < 2; ++c)
      out << "  " << std::left << std::setw(10) << (c ? pos : neg) << std::right << std::setw(7)
          << tr.classes[c].precision << std::setw(7) << tr.classes[c].recall << std::setw(7) << tr.classes[c].f1
          << std::setw(9) << tr.classes[c].support << "\n";
    const auto& m = tr.confusion.counts;
    out << "  confusion (rows true, cols predicted; - then +): [[" << m[0][0] << ", " << m[0][1] << "], ["
        << m[1][0] << ", " << m[1][1] << "]]\n";
    out << "  confidence buckets:\n";
    for (const auto& b : tr.buckets)
      out << "    " << std::left << std::setw(15) << to_string(b.confidence) << std::right << " correct "
          << b.correct_fraction << "  error " << b.error_fraction << "  n=" << b.count << "\n";
    out << "  most error-prone topics:\n";
    for (const auto& t : tr.topics)
      out << "    " << t.topic << "  " << std::setprecision(1) << 100.0 * t.error_rate << "% of " << t.count
          << std::setprecision(3) << "\n";
    out << "\n";
  }
  return out.str();
}

}  // namespace argq
