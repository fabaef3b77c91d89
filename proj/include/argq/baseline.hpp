#pragma once

// Per-task linear SVM over L2-normalized TF-IDF features of stemmed
// "premise conclusion" text.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "argq/common.hpp"
#include "argq/corpus.hpp"
#include "argq/delimited.hpp"
#include "argq/encoder.hpp"
#include "argq/predictions.hpp"
#include "argq/random.hpp"
#include "argq/stemmer.hpp"
#include "json.hpp"

namespace argq {

// (column, value) pairs sorted by column.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline double sparse_dot(const SparseVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += w[i] * v;
  return s;
}

inline double l2_norm(const SparseVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += v * v;
  return std::sqrt(s);
}

inline std::vector<std::string> stemmed_terms(std::string_view document) {
  std::vector<std::string> terms;
  for (const auto& tok : tokenize(document)) terms.push_back(stem(tok));
  return terms;
}

class TfidfModel {
 public:
  // Smooth idf: ln((1 + N) / (1 + df)) + 1.
  static TfidfModel fit(const std::vector<std::string>& documents) {
    if (documents.empty()) throw ConfigError("TF-IDF needs at least one document");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : documents) {
      auto terms = stemmed_terms(doc);
      std::sort(terms.begin(), terms.end());
      terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
      for (const auto& t : terms) ++df[t];
    }
    TfidfModel m;
    m.document_count_ = documents.size();
    const double n = static_cast<double>(documents.size());
    for (const auto& [term, count] : df) {
      m.vocabulary_.emplace(term, static_cast<std::uint32_t>(m.terms_.size()));
      m.terms_.push_back(term);
      m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return m;
  }

  // Unseen terms are dropped; the result has L2 norm 1, or is empty.
  SparseVector transform(std::string_view document) const {
    std::map<std::uint32_t, double> tf;
    for (const auto& t : stemmed_terms(document))
      if (auto it = vocabulary_.find(t); it != vocabulary_.end()) tf[it->second] += 1.0;
    SparseVector x;
    for (const auto& [i, count] : tf) x.emplace_back(i, count * idf_[i]);
    const double norm = l2_norm(x);
    if (norm > 0.0)
      for (auto& [i, v] : x) v /= norm;
    return x;
  }

  std::size_t size() const { return terms_.size(); }
  std::size_t document_count() const { return document_count_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  long index(const std::string& term) const {
    auto it = vocabulary_.find(term);
    return it == vocabulary_.end() ? -1 : static_cast<long>(it->second);
  }

  nlohmann::json to_json() const {
    return {{"vocabulary", terms_}, {"idf", idf_}, {"document_count", document_count_}};
  }

  static TfidfModel from_json(const nlohmann::json& j) {
    TfidfModel m;
    m.terms_ = j.at("vocabulary").get<std::vector<std::string>>();
    m.idf_ = j.at("idf").get<std::vector<double>>();
    m.document_count_ = j.at("document_count").get<std::size_t>();
    if (m.terms_.size() != m.idf_.size()) throw ParseError("TF-IDF vocabulary and idf lengths differ");
    for (std::size_t i = 0; i < m.terms_.size(); ++i)
      m.vocabulary_.emplace(m.terms_[i], static_cast<std::uint32_t>(i));
    return m;
  }

 private:
  std::map<std::string, std::uint32_t> vocabulary_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::size_t document_count_ = 0;
};

struct LinearSvm {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  double objective = 0.0;
  // Primal objective of the running average iterate, sampled once per pass
  // over the data during the second half of training.
  std::vector<double> objective_trace;

  double decision(const SparseVector& x) const { return sparse_dot(x, weights) + bias; }
};

// (1/2)|w|^2 + C * sum_i max(0, 1 - y_i (w.x_i + b)), y in {-1, +1}.
inline double svm_objective(const std::vector<double>& w, double b, double C, const std::vector<SparseVector>& X,
                            const std::vector<int>& y) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i)
    hinge += std::max(0.0, 1.0 - y[i] * (sparse_dot(X[i], w) + b));
  return 0.5 * reg + C * hinge;
}

// Pegasos-style projected stochastic subgradient descent on the primal with
// step 1/(lambda t), lambda = 1/(C n). The bias is unregularized and takes
// the same step. Returns the average of the iterates over the second half of
// training.
inline LinearSvm svm_train(const std::vector<SparseVector>& X, const std::vector<int>& y, double C, std::size_t steps,
                           std::uint64_t seed, std::size_t dim = 0) {
  if (X.size() != y.size()) throw DataError("feature and label counts differ");
  if (!(C > 0.0)) throw ConfigError("SVM C must be positive");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw DataError("SVM labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) throw DataError("SVM training needs examples of both classes");
  for (const auto& x : X)
    for (const auto& [i, v] : x) dim = std::max<std::size_t>(dim, i + 1);
  if (steps == 0) steps = 50 * X.size();

  const std::size_t n = X.size();
  const double lambda = 1.0 / (C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(dim, 0.0), w_avg(dim, 0.0);
  double b = 0.0, b_avg = 0.0;
  std::size_t averaged = 0;
  const std::size_t tail_start = steps / 2;

  LinearSvm model;
  model.C = C;
  Rng rng(seed);
  std::vector<std::size_t> order = rng.permutation(n);
  for (std::size_t t = 1; t <= steps; ++t) {
    const std::size_t pos = (t - 1) % n;
    if (pos == 0 && t > 1) order = rng.permutation(n);
    const std::size_t i = order[pos];
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    const double margin = y[i] * (sparse_dot(X[i], w) + b);
    const double shrink = 1.0 - eta * lambda;
    for (double& v : w) v *= shrink;
    if (margin < 1.0) {
      for (const auto& [k, v] : X[i]) w[k] += eta * y[i] * v;
      b += eta * y[i];
    }
    double norm2 = 0.0;
    for (double v : w) norm2 += v * v;
    if (norm2 > radius * radius) {
      const double s = radius / std::sqrt(norm2);
      for (double& v : w) v *= s;
    }
    if (t > tail_start) {
      ++averaged;
      const double a = 1.0 / static_cast<double>(averaged);
      for (std::size_t k = 0; k < dim; ++k) w_avg[k] += a * (w[k] - w_avg[k]);
      b_avg += a * (b - b_avg);
      if (pos == n - 1) model.objective_trace.push_back(svm_objective(w_avg, b_avg, C, X, y));
    }
  }
  model.weights = std::move(w_avg);
  model.bias = b_avg;
  model.objective = svm_objective(model.weights, model.bias, C, X, y);
  return model;
}

inline nlohmann::json to_json(const LinearSvm& m) {
  return {{"weights", m.weights}, {"bias", m.bias}, {"C", m.C}, {"objective", m.objective}};
}

inline LinearSvm svm_from_json(const nlohmann::json& j) {
  LinearSvm m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.C = j.at("C").get<double>();
  m.objective = j.value("objective", 0.0);
  return m;
}

inline std::string baseline_document(const ArgumentInstance& i) { return i.premise + " " + i.conclusion; }

inline Prediction baseline_predict(const LinearSvm& model, const TfidfModel& tfidf, const ArgumentInstance& instance,
                                   Task task, const std::string& source = "svm") {
  const double score = model.decision(tfidf.transform(baseline_document(instance)));
  return {instance.id, task, score > 0.0 ? Label::positive : Label::negative, source, false};
}

struct BaselineConfig {
  double c_validity = 0.09;
  double c_novelty = 4.7;
  std::size_t steps_per_example = 50;
  std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const BaselineConfig& c) {
  j = {{"c_validity", c.c_validity}, {"c_novelty", c.c_novelty}, {"steps_per_example", c.steps_per_example},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, BaselineConfig& c) {
  c.c_validity = j.value("c_validity", c.c_validity);
  c.c_novelty = j.value("c_novelty", c.c_novelty);
  c.steps_per_example = j.value("steps_per_example", c.steps_per_example);
  c.seed = j.value("seed", c.seed);
}

struct BaselineModel {
  TfidfModel tfidf;
  LinearSvm validity;
  LinearSvm novelty;

  const LinearSvm& svm(Task t) const { return t == Task::validity ? validity : novelty; }
};

inline BaselineModel train_baseline(const Corpus& train, const BaselineConfig& config = {}) {
  std::vector<std::string> docs;
  for (const auto& i : train) docs.push_back(baseline_document(i));
  BaselineModel m;
  m.tfidf = TfidfModel::fit(docs);
  std::vector<SparseVector> X;
  for (const auto& d : docs) X.push_back(m.tfidf.transform(d));
  for (Task t : kTasks) {
    std::vector<int> y;
    for (const auto& i : train) y.push_back(i.label(t) == Label::positive ? 1 : -1);
    const double C = t == Task::validity ? config.c_validity : config.c_novelty;
    auto svm = svm_train(X, y, C, config.steps_per_example * X.size(), config.seed, m.tfidf.size());
    (t == Task::validity ? m.validity : m.novelty) = std::move(svm);
  }
  return m;
}

inline PredictionSet baseline_predict_all(const BaselineModel& m, const Corpus& instances,
                                          const std::string& source = "svm") {
  std::vector<Prediction> rows;
  for (Task t : kTasks)
    for (const auto& i : instances) rows.push_back(baseline_predict(m.svm(t), m.tfidf, i, t, source));
  return PredictionSet(std::move(rows));
}

inline nlohmann::json to_json(const BaselineModel& m) {
  return {{"format", "argq-baseline"}, {"version", 1}, {"tfidf", m.tfidf.to_json()},
          {"validity", to_json(m.validity)}, {"novelty", to_json(m.novelty)}};
}

inline BaselineModel baseline_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "argq-baseline") throw ParseError("not an argq baseline model");
  return {TfidfModel::from_json(j.at("tfidf")), svm_from_json(j.at("validity")), svm_from_json(j.at("novelty"))};
}

}  // namespace argq
