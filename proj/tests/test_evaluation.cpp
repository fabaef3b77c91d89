#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "argq/evaluation.hpp"
#include "support.hpp"

using namespace argq;
using namespace argq::testing;

namespace {

// Independent oracle: macro F1 over the classes seen in two label lists,
// computed by direct counting.
double oracle_macro_f1(const std::vector<int>& gold, const std::vector<int>& pred) {
  std::set<int> classes(gold.begin(), gold.end());
  classes.insert(pred.begin(), pred.end());
  double sum = 0.0;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c && pred[i] == c) ++tp;
      if (gold[i] != c && pred[i] == c) ++fp;
      if (gold[i] == c && pred[i] != c) ++fn;
    }
    const double p = tp + fp ? tp / (tp + fp) : 0.0, r = tp + fn ? tp / (tp + fn) : 0.0;
    sum += p + r ? 2 * p * r / (p + r) : 0.0;
  }
  return classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
}

}  // namespace

TEST(Prf, PublishedFixtures) {
  struct Case {
    Matrix m;
    double f_neg, f_pos, macro;
  };
  const Case cases[] = {
      {kGptNovelty, 0.671, 0.277, 0.474},
      {kMtlNovelty, 0.753, 0.482, 0.617},
      {kGptValidity, 0.623, 0.779, 0.701},
      {kMtlValidity, 0.502, 0.799, 0.650},
  };
  for (const auto& c : cases) {
    const auto s = prf(to_confusion(c.m));
    EXPECT_NEAR(s[0].f1, c.f_neg, 5e-4);
    EXPECT_NEAR(s[1].f1, c.f_pos, 5e-4);
    EXPECT_NEAR(macro_f1(to_confusion(c.m)), c.macro, 5e-4);
  }
  // Rounded per-task scores of the MTL submission.
  EXPECT_NEAR(macro_f1(to_confusion(kMtlValidity)), 0.65, 0.005);
  EXPECT_NEAR(macro_f1(to_confusion(kMtlNovelty)), 0.62, 0.005);
}

TEST(Prf, StandardPrecisionRecallDefinitions) {
  const auto s = prf(to_confusion(kGptNovelty));
  EXPECT_DOUBLE_EQ(s[1].precision, 45.0 / 99.0);
  EXPECT_DOUBLE_EQ(s[1].recall, 45.0 / 226.0);
  EXPECT_EQ(s[1].support, 226u);
  EXPECT_EQ(s[0].support, 294u);
}

TEST(Prf, ZeroDivisionIsZero) {
  // Everything predicted negative: the positive class gets 0 across the board.
  const auto s = prf(to_confusion({{{10, 0}, {5, 0}}}));
  EXPECT_EQ(s[1].precision, 0.0);
  EXPECT_EQ(s[1].recall, 0.0);
  EXPECT_EQ(s[1].f1, 0.0);
  EXPECT_EQ(prf(ConfusionMatrix{})[0].f1, 0.0);
  EXPECT_EQ(macro_f1(ConfusionMatrix{}), 0.0);
}

TEST(Prf, F1InUnitIntervalAndZeroWithoutDiagonal) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    Confusion<4> m;
    for (auto& row : m.counts)
      for (auto& c : row) c = rng.bernoulli(0.3) ? 0 : rng.below(30);
    const auto s = prf(m);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_GE(s[c].f1, 0.0);
      EXPECT_LE(s[c].f1, 1.0);
      if (m.counts[c][c] == 0) {
        EXPECT_EQ(s[c].f1, 0.0);
      }
    }
  }
}

TEST(MacroF1, InvariantUnderClassPermutation) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    Confusion<4> m;
    for (auto& row : m.counts)
      for (auto& c : row) c = rng.below(20);
    auto perm = rng.permutation(4);
    Confusion<4> q;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) q.counts[perm[a]][perm[b]] = m.counts[a][b];
    EXPECT_NEAR(macro_f1(m), macro_f1(q), 1e-12);
  }
}

TEST(MacroF1, PerfectPredictionScoresOneEvenWithAbsentClasses) {
  Confusion<4> m;
  m.counts[1][1] = 7;
  m.counts[3][3] = 2;
  EXPECT_DOUBLE_EQ(macro_f1(m), 1.0);
}

TEST(CombinedScore, MatchesBruteForceJointOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus golds = matrix_fixture({{{5, 0}, {0, 5}}}, {{{5, 0}, {0, 5}}}, trial).golds;
    const auto preds = random_predictions(golds, rng, "x", 0.5);
    std::vector<int> g, p;
    std::map<std::pair<std::string, Task>, Label> lookup;
    for (const auto& r : preds.rows()) lookup[{r.instance_id, r.task}] = r.value;
    for (const auto& i : golds) {
      g.push_back(2 * (i.label(Task::validity) == Label::positive) + (i.label(Task::novelty) == Label::positive));
      p.push_back(2 * (lookup[{i.id, Task::validity}] == Label::positive) +
                  (lookup[{i.id, Task::novelty}] == Label::positive));
    }
    EXPECT_NEAR(combined_score(preds, golds), oracle_macro_f1(g, p), 1e-12);
  }
}

TEST(CombinedScore, OneIffEveryInstanceJointlyCorrect) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto golds = matrix_fixture({{{4, 0}, {0, 4}}}, {{{3, 0}, {0, 5}}}, trial).golds;
    std::vector<Prediction> rows;
    for (const auto& g : golds)
      for (Task t : kTasks) rows.push_back({g.id, t, g.label(t), "gold", false});
    PredictionSet perfect(rows);
    EXPECT_DOUBLE_EQ(combined_score(perfect, golds), 1.0);
    // Flip one task for one instance.
    const std::size_t k = rng.below(rows.size());
    rows[k].value = rows[k].value == Label::positive ? Label::negative : Label::positive;
    EXPECT_LT(combined_score(PredictionSet(rows), golds), 1.0);
  }
}

TEST(CombinedScore, MetricRegistry) {
  const auto f = matrix_fixture(kMtlValidity, kMtlNovelty, 9);
  EXPECT_NEAR(combined_score(f.preds, f.golds, "mean-task-macro-f1"),
              0.5 * (macro_f1(to_confusion(kMtlValidity)) + macro_f1(to_confusion(kMtlNovelty))), 1e-12);
  EXPECT_THROW(combined_score(f.preds, f.golds, "organizer"), ConfigError);
  EXPECT_EQ(std::string(kDefaultCombinedMetric), "joint-macro-f1");
  // Joint scoring sits below both per-task scores on this fixture.
  const double joint = combined_score(f.preds, f.golds);
  EXPECT_LT(joint, macro_f1(to_confusion(kMtlValidity)));
  EXPECT_LT(joint, macro_f1(to_confusion(kMtlNovelty)));
}

TEST(Confusion, ReproducesFixtureMatrices) {
  const auto f = matrix_fixture(kGptValidity, kGptNovelty, 17);
  EXPECT_EQ(confusion(f.preds, f.golds, Task::validity).counts, kGptValidity);
  EXPECT_EQ(confusion(f.preds, f.golds, Task::novelty).counts, kGptNovelty);
  EXPECT_EQ(joint_confusion(f.preds, f.golds).total(), 520u);
}

TEST(Confusion, CoverageErrors) {
  auto f = matrix_fixture({{{2, 1}, {1, 2}}}, {{{2, 1}, {1, 2}}}, 5);
  auto rows = f.preds.rows();
  rows.erase(rows.begin());
  EXPECT_THROW(confusion(PredictionSet(rows), f.golds, Task::validity), CoverageError);
  auto extra = f.preds;
  extra.add({"0", Task::novelty, Label::positive, "other", false});
  EXPECT_THROW(confusion(extra, f.golds, Task::novelty), CoverageError);
}

TEST(ConfidenceBuckets, FractionsAndOrder) {
  Corpus golds;
  std::vector<Prediction> rows;
  const Confidence confs[] = {Confidence::unknown, Confidence::majority, Confidence::majority,
                              Confidence::very_confident, Confidence::majority};
  const bool correct[] = {true, false, true, true, true};
  for (std::size_t i = 0; i < 5; ++i) {
    ArgumentInstance a;
    a.id = std::to_string(i);
    a.validity_raw = 1;
    a.novelty_raw = 1;
    a.validity_confidence = confs[i];
    golds.push_back(a);
    rows.push_back({a.id, Task::validity, correct[i] ? Label::positive : Label::negative, "s", false});
  }
  const auto b = confidence_buckets(PredictionSet(rows), golds, Task::validity);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].confidence, Confidence::very_confident);
  EXPECT_EQ(b[1].confidence, Confidence::majority);
  EXPECT_EQ(b[1].count, 3u);
  EXPECT_DOUBLE_EQ(b[1].correct_fraction, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(b[1].error_fraction, 1.0 / 3.0);
  EXPECT_EQ(b[2].confidence, Confidence::unknown);
}

TEST(TopicErrorRates, SortedDescendingTiesByName) {
  Corpus golds;
  std::vector<Prediction> rows;
  const char* topics[] = {"b", "b", "a", "a", "c", "c", "d"};
  const bool wrong[] = {true, false, true, false, true, true, false};
  for (std::size_t i = 0; i < 7; ++i) {
    ArgumentInstance a;
    a.id = std::to_string(i);
    a.topic = topics[i];
    a.validity_raw = a.novelty_raw = 1;
    golds.push_back(a);
    rows.push_back({a.id, Task::novelty, wrong[i] ? Label::negative : Label::positive, "s", false});
  }
  const auto r = topic_error_rates(PredictionSet(rows), golds, Task::novelty);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].topic, "c");
  EXPECT_DOUBLE_EQ(r[0].error_rate, 1.0);
  EXPECT_EQ(r[1].topic, "a");
  EXPECT_EQ(r[2].topic, "b");
  EXPECT_EQ(topic_error_rates(PredictionSet(rows), golds, Task::novelty, 0).size(), 4u);
}

TEST(SeedSummary, MeanSampleStdAndEnvelope) {
  const double finals[] = {0.61, 0.58, 0.64, 0.60, 0.57};
  std::vector<SeedRun> runs;
  for (std::size_t i = 0; i < 5; ++i) {
    SeedRun r;
    r.seed = i;
    r.final_combined_f1 = finals[i];
    for (std::size_t e = 0; e < 3; ++e) r.history.push_back({e + 1, 1.0 / (e + 1) + 0.1 * i, 0, 0, 0});
    runs.push_back(r);
  }
  const auto s = seed_summary(runs);
  EXPECT_NEAR(s.mean_combined_f1, 0.6, 1e-12);
  EXPECT_NEAR(s.std_combined_f1, 0.02738612787525833, 1e-12);
  ASSERT_EQ(s.loss.size(), 3u);
  EXPECT_NEAR(s.loss[1].min, 0.5, 1e-12);
  EXPECT_NEAR(s.loss[1].max, 0.9, 1e-12);
  EXPECT_NEAR(s.loss[1].mean, 0.7, 1e-12);
  EXPECT_THROW(seed_summary({runs[0]}), ConfigError);
}

TEST(SeedSummary, IdenticalRunsHaveZeroSpread) {
  SeedRun r{0, {{1, 0.5, 0.7, 0.7, 0.7}}, 0.7};
  const auto s = seed_summary({r, r});
  EXPECT_EQ(s.std_combined_f1, 0.0);
  EXPECT_EQ(s.loss[0].min, s.loss[0].max);
}

TEST(Report, JsonRoundTripAndText) {
  const auto f = matrix_fixture(kMtlValidity, kGptNovelty, 3, "mtl");
  const auto r = evaluate(f.preds, f.golds);
  EXPECT_EQ(r.name, "mtl");
  EXPECT_EQ(r.instances, 520u);
  EXPECT_NEAR(task_report(r, Task::novelty).classes[0].f1, 0.671, 5e-4);
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  const auto text = to_text(r);
  EXPECT_NE(text.find("combined (joint-macro-f1)"), std::string::npos);
  EXPECT_NE(text.find("non-novel"), std::string::npos);
  EXPECT_NE(text.find("[[240, 54], [181, 45]]"), std::string::npos);
}
