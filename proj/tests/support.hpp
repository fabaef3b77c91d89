#pragma once

// Test fixtures shared by the unit suites and the acceptance binary.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "argq/corpus.hpp"
#include "argq/evaluation.hpp"
#include "argq/predictions.hpp"
#include "argq/random.hpp"

namespace argq::testing {

using Matrix = std::array<std::array<std::size_t, 2>, 2>;

struct Fixture {
  Corpus golds;
  PredictionSet preds;
};

// (gold, predicted) label pairs realizing `m`, in random order.
inline std::vector<std::pair<Label, Label>> cells(const Matrix& m, Rng& rng) {
  std::vector<std::pair<Label, Label>> out;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t k = 0; k < m[t][p]; ++k)
        out.emplace_back(t ? Label::positive : Label::negative, p ? Label::positive : Label::negative);
  rng.shuffle(out);
  return out;
}

// Gold corpus and one prediction set whose per-task confusion matrices are
// exactly `validity` and `novelty`. Both must have the same total.
inline Fixture matrix_fixture(const Matrix& validity, const Matrix& novelty, std::uint64_t seed,
                              const std::string& source = "fixture", std::size_t topics = 5) {
  Rng rng(seed);
  const auto v = cells(validity, rng), n = cells(novelty, rng);
  if (v.size() != n.size()) throw ConfigError("fixture matrices differ in total");
  Fixture f;
  std::vector<Prediction> rows;
  static constexpr Confidence conf[] = {Confidence::majority, Confidence::confident, Confidence::very_confident};
  for (std::size_t i = 0; i < v.size(); ++i) {
    ArgumentInstance a;
    a.id = std::to_string(i);
    a.topic = "topic " + std::to_string(rng.below(topics));
    a.premise = "premise " + a.id;
    a.conclusion = "conclusion " + a.id;
    a.validity_raw = v[i].first == Label::positive ? 1 : (rng.bernoulli(0.5) ? 0 : -1);
    a.novelty_raw = n[i].first == Label::positive ? 1 : -1;
    a.validity_confidence = conf[rng.below(3)];
    a.novelty_confidence = conf[rng.below(3)];
    f.golds.push_back(std::move(a));
    rows.push_back({std::to_string(i), Task::validity, v[i].second, source, false});
    rows.push_back({std::to_string(i), Task::novelty, n[i].second, source, false});
  }
  f.preds = PredictionSet(std::move(rows));
  return f;
}

// Random predictions for `golds` from one source.
inline PredictionSet random_predictions(const Corpus& golds, Rng& rng, const std::string& source,
                                        double p_correct = 0.6) {
  std::vector<Prediction> rows;
  for (const auto& g : golds)
    for (Task t : kTasks) {
      Label l = g.label(t);
      if (!rng.bernoulli(p_correct)) l = rng.bernoulli(0.5) ? Label::positive : Label::negative;
      rows.push_back({g.id, t, l, source, false});
    }
  return PredictionSet(std::move(rows));
}

inline Matrix random_matrix(Rng& rng, std::size_t max_cell = 40) {
  Matrix m{};
  for (auto& row : m)
    for (auto& c : row) c = rng.below(max_cell + 1);
  return m;
}

// Published confusion matrices, [true][predicted], negative first.
inline constexpr Matrix kGptNovelty = {{{240, 54}, {181, 45}}};
inline constexpr Matrix kMtlNovelty = {{{265, 29}, {145, 81}}};
inline constexpr Matrix kGptValidity = {{{120, 86}, {59, 255}}};
inline constexpr Matrix kMtlValidity = {{{75, 131}, {18, 296}}};

inline ConfusionMatrix to_confusion(const Matrix& m) {
  ConfusionMatrix c;
  c.counts = m;
  return c;
}

// Prompt-selection fixtures.

inline ArgumentInstance inst(std::string id, Confidence vc, std::size_t length, int v, std::string topic = "Veal") {
  ArgumentInstance a;
  a.id = std::move(id);
  a.topic = std::move(topic);
  a.premise = std::string(length / 2, 'p');
  a.conclusion = std::string(length - length / 2, 'c');
  a.validity_raw = v;
  a.novelty_raw = -v;
  a.validity_confidence = vc;
  a.novelty_confidence = vc;
  return a;
}

// Hand ranking (validity): majority first, then length, then numeric id.
//   majority: 3 (20), 5 (20), 10 (20), 2 (30); confident: 4 (10), 6 (50);
//   very confident: 1; unknown: 7. Top four: 3, 5, 10, 2.
inline Corpus ranking_fixture() {
  return {inst("1", Confidence::very_confident, 8, 1),  inst("2", Confidence::majority, 30, 1),
          inst("3", Confidence::majority, 20, -1),      inst("4", Confidence::confident, 10, 1),
          inst("5", Confidence::majority, 20, 1),       inst("6", Confidence::confident, 50, -1),
          inst("7", Confidence::unknown, 5, 0),         inst("10", Confidence::majority, 20, -1)};
}

inline Corpus golden_fixture() {
  Corpus c;
  auto add = [&](std::string id, std::string topic, std::string p, std::string con, int v, int n, Confidence vc,
                 Confidence nc) {
    ArgumentInstance a;
    a.id = std::move(id);
    a.topic = std::move(topic);
    a.premise = std::move(p);
    a.conclusion = std::move(con);
    a.validity_raw = v;
    a.novelty_raw = n;
    a.validity_confidence = vc;
    a.novelty_confidence = nc;
    c.push_back(std::move(a));
  };
  using C = Confidence;
  add("11", "School uniforms", "Uniforms remove visible markers of income.",
      "Uniforms reduce bullying.", 1, 1, C::majority, C::confident);
  add("12", "School uniforms", "Uniforms remove visible markers of income.",
      "Uniforms remove visible markers of income.", 1, -1, C::majority, C::majority);
  add("13", "Nuclear energy", "Reactors emit almost no carbon during operation.",
      "Nuclear power is dangerous.", -1, 1, C::confident, C::majority);
  add("14", "Nuclear energy", "Waste storage remains unsolved.", "Storage costs grow.", 1, 1, C::very_confident,
      C::majority);
  add("15", "Zoos", "Zoos fund conservation.", "Zoos are good.", -1, -1, C::majority, C::very_confident);
  add("16", "Zoos", "Animals in zoos show stress behaviour.", "Captivity harms animals.", 1, 0, C::confident,
      C::confident);
  return c;
}

inline ArgumentInstance golden_target() {
  ArgumentInstance t;
  t.id = "t1";
  t.topic = "Video games";
  t.premise = "Games can improve spatial reasoning.";
  t.conclusion = "Video games have educational value.";
  return t;
}

}  // namespace argq::testing
