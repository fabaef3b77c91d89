#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <regex>

#include "argq/argq.hpp"
#include "support.hpp"

using namespace argq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;  // stdout and stderr, interleaved
};

Result run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" ARGQ_CLI "' " + args + " 2>&1";
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

json read_json(const fs::path& p) { return json::parse(delimited::read_file(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("argq-cli-" + std::string(info->name()) + "-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& text) { delimited::write_atomic(dir_ / name, text); }

  // Small learnable corpus with config.
  void write_learnable(std::size_t epochs = 3) {
    write("train.csv", format_corpus(synthetic::separable_corpus(160, 1, Split::train)));
    write("dev.csv", format_corpus(synthetic::separable_corpus(60, 2, Split::dev)));
    write("test.csv", format_corpus(synthetic::separable_corpus(60, 3, Split::test)));
    const json cfg = {{"data", {{"train", "train.csv"}, {"dev", "dev.csv"}, {"test", "test.csv"}}},
                      {"train", {{"learning_rate", 0.01}, {"epochs", epochs}}},
                      {"prompt", {{"provider", "mock"}, {"mock", {{"default", "yes"}}}}}};
    write("config.json", cfg.dump(2));
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EvaluateReproducesFixtureScores) {
  const auto f = argq::testing::matrix_fixture(argq::testing::kGptValidity, argq::testing::kGptNovelty, 4, "gpt3");
  Corpus golds = f.golds;
  for (auto& g : golds) g.split = Split::test;
  write("test.csv", format_corpus(golds));
  write("preds.csv", format_predictions(f.preds));
  write("config.json", R"({"data": {"test": "test.csv"}})");
  const auto r = run_cli(dir_, "evaluate -c config.json --predictions preds.csv -o eval");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto report = report_from_json(read_json(dir_ / "eval/report.json"));
  const auto& nov = task_report(report, Task::novelty);
  EXPECT_NEAR(nov.classes[0].f1, 0.671, 5e-4);
  EXPECT_NEAR(nov.classes[1].f1, 0.277, 5e-4);
  EXPECT_NE(r.out.find("novelty  macro F1 0.474"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "eval/report.txt"));
}

TEST_F(CliTest, RunDirectoryHasConfigInputsAndManifest) {
  const auto f = argq::testing::matrix_fixture(argq::testing::kMtlValidity, argq::testing::kMtlNovelty, 9, "mtl");
  Corpus golds = f.golds;
  for (auto& g : golds) g.split = Split::test;
  write("test.csv", format_corpus(golds));
  write("preds.csv", format_predictions(f.preds));
  write("config.json", R"({"data": {"test": "test.csv"}, "seed": 3})");
  ASSERT_EQ(run_cli(dir_, "evaluate -c config.json --predictions preds.csv -o eval").status, 0);
  const auto cfg = read_json(dir_ / "eval/config.json");
  EXPECT_EQ(cfg.at("seed"), 3);
  EXPECT_EQ(cfg.at("train").at("seed"), 3);
  const auto inputs = read_json(dir_ / "eval/inputs.json");
  EXPECT_EQ(inputs.at("predictions").at("sha256"), file_sha256(dir_ / "preds.csv"));
  const auto manifest = read_json(dir_ / "eval/manifest.json");
  EXPECT_EQ(manifest.at("command"), "evaluate");
  EXPECT_EQ(manifest.at("outputs").at("report.json"), file_sha256(dir_ / "eval/report.json"));
  EXPECT_EQ(manifest.at("config_sha256"), file_sha256(dir_ / "eval/config.json"));
}

TEST_F(CliTest, MixTakesEachTaskFromItsFile) {
  const auto a = argq::testing::matrix_fixture(argq::testing::kMtlValidity, argq::testing::kMtlNovelty, 5, "mtl");
  const auto b = argq::testing::matrix_fixture(argq::testing::kGptValidity, argq::testing::kGptNovelty, 5, "gpt3");
  write("a.csv", format_predictions(a.preds));
  write("b.csv", format_predictions(b.preds));
  const auto r = run_cli(dir_, "mix --validity a.csv --novelty b.csv -o mixed");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto m = load_predictions(dir_ / "mixed/predictions.csv");
  ASSERT_EQ(m.size(), a.preds.size());
  std::map<std::pair<std::string, Task>, Label> expected;
  const auto va = a.preds.only(Task::validity), nb = b.preds.only(Task::novelty);
  for (const auto* set : {&va, &nb})
    for (const auto& p : set->rows()) expected[{p.instance_id, p.task}] = p.value;
  for (const auto& p : m.rows()) EXPECT_EQ(p.value, expected.at({p.instance_id, p.task}));
}

TEST_F(CliTest, TrainPredictEvaluatePipeline) {
  write_learnable();
  ASSERT_EQ(run_cli(dir_, "prepare-data -c config.json").status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "runs/prepare-data/data_stats.json"));
  auto r = run_cli(dir_, "train -c config.json");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"model.json", "history.json", "train_loss.dat", "dev_f1.dat"})
    EXPECT_TRUE(fs::exists(dir_ / "runs/train" / f)) << f;
  ASSERT_EQ(run_cli(dir_, "predict -c config.json --model runs/train/model.json").status, 0);
  r = run_cli(dir_, "evaluate -c config.json --predictions runs/predict/predictions.csv");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto report = report_from_json(read_json(dir_ / "runs/evaluate/report.json"));
  EXPECT_GT(report.combined, 0.8);
}

TEST_F(CliTest, RerunReproducesOutputsByteForByte) {
  write_learnable(2);
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run_cli(dir_, std::string("train -c config.json -o train-") + out).status, 0);
    ASSERT_EQ(run_cli(dir_, std::string("predict -c config.json --model train-") + out + "/model.json -o pred-" + out)
                  .status,
              0);
  }
  for (const char* f : {"train-%/model.json", "train-%/history.json", "pred-%/predictions.csv"}) {
    std::string a = f, b = f;
    a.replace(a.find('%'), 1, "a");
    b.replace(b.find('%'), 1, "b");
    EXPECT_EQ(delimited::read_file(dir_ / a), delimited::read_file(dir_ / b)) << f;
  }
  const auto ma = read_json(dir_ / "pred-a/manifest.json"), mb = read_json(dir_ / "pred-b/manifest.json");
  EXPECT_EQ(ma.at("outputs"), mb.at("outputs"));
}

TEST_F(CliTest, PredictWorksOnUnlabeledSplit) {
  write_learnable(1);
  ASSERT_EQ(run_cli(dir_, "train -c config.json").status, 0);
  write("test.csv", "topic,Premise,Conclusion\nT,p one,c one\nT,p two,c two\n");
  const auto r = run_cli(dir_, "predict -c config.json --model runs/train/model.json");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_predictions(dir_ / "runs/predict/predictions.csv").size(), 4u);
}

TEST_F(CliTest, BaselineAndPromptPredict) {
  write_learnable();
  auto r = run_cli(dir_, "baseline -c config.json");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_predictions(dir_ / "runs/baseline/predictions.csv").size(), 120u);
  r = run_cli(dir_, "prompt-predict -c config.json --task validity");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto p = load_predictions(dir_ / "runs/prompt-predict/predictions.csv");
  ASSERT_EQ(p.size(), 60u);
  for (const auto& row : p.rows()) EXPECT_EQ(row.value, Label::positive);
  // Second run is served from the cache even with the network provider off.
  r = run_cli(dir_, "prompt-predict -c config.json --task validity --provider replay-only -o again");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(delimited::read_file(dir_ / "again/predictions.csv"),
            delimited::read_file(dir_ / "runs/prompt-predict/predictions.csv"));
}

TEST_F(CliTest, SeedSweepIsDeterministic) {
  write_learnable(2);
  ASSERT_EQ(run_cli(dir_, "seed-sweep -c config.json --runs 1 -o one").status, 0);
  ASSERT_EQ(run_cli(dir_, "seed-sweep -c config.json --runs 1 -o two").status, 0);
  EXPECT_EQ(delimited::read_file(dir_ / "one/seed_summary.json"), delimited::read_file(dir_ / "two/seed_summary.json"));

  auto r = run_cli(dir_, "seed-sweep -c config.json --runs 3 --seed 7 -o three");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto s = read_json(dir_ / "three/seed_summary.json");
  EXPECT_EQ(s.at("runs"), 3);
  EXPECT_EQ(s.at("per_seed").at(2).at("seed"), 9);
  EXPECT_TRUE(fs::exists(dir_ / "three/seed-8/history.json"));
}

TEST_F(CliTest, ErrorsAreOneCategorizedLine) {
  const std::regex line(R"(error: [a-z-]+: [^\n]*\n)");
  write("config.json", R"({"data": {"test": "test.csv"}})");

  auto r = run_cli(dir_, "evaluate -c config.json --predictions missing.csv");
  EXPECT_EQ(r.status, 2);
  EXPECT_TRUE(std::regex_match(r.out, line)) << r.out;
  EXPECT_EQ(r.out.rfind("error: usage:", 0), 0u);

  r = run_cli(dir_, "evaluate");
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.out.rfind("error: usage:", 0), 0u) << r.out;

  write("bad.json", R"({"train": {"combined_metric": "joint-macro-f1"}, "combined_metric": "mean-task-macro-f1"})");
  r = run_cli(dir_, "prepare-data -c bad.json");
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(std::regex_match(r.out, line)) << r.out;
  EXPECT_EQ(r.out.rfind("error: config:", 0), 0u) << r.out;

  write("unknown.json", R"({"lerning_rate": 1})");
  r = run_cli(dir_, "prepare-data -c unknown.json");
  EXPECT_EQ(r.out.rfind("error: config:", 0), 0u) << r.out;

  write("test.csv", "topic,Premise\nT,p\n");
  write("p.csv", "instance_id,task,value,source,flagged\n0,validity,positive,x,false\n");
  r = run_cli(dir_, "evaluate -c config.json --predictions p.csv");
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(std::regex_match(r.out, line)) << r.out;
  EXPECT_EQ(r.out.rfind("error: schema:", 0), 0u) << r.out;

  write("p.csv", "instance_id,task,value,source,flagged\n0,validity,maybe,x,false\n");
  r = run_cli(dir_, "mix --validity p.csv --novelty p.csv");
  EXPECT_EQ(r.out.rfind("error: parse:", 0), 0u) << r.out;
}
