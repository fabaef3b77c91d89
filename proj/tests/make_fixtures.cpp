// Writes the bundled example corpus: three synthetic splits whose joint-class
// counts and topic overlaps match the reference data set, plus a run config.
//   make_fixtures <out-dir>

#include <filesystem>
#include <iostream>

#include "argq/argq.hpp"

using namespace argq;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <out-dir>\n";
    return 2;
  }
  const std::filesystem::path out = argv[1];
  std::filesystem::create_directories(out);

  // Dev topics are a subset of test topics; train topics are disjoint.
  const auto train_topics = synthetic::numbered_topics("train topic", 22);
  const auto shared = synthetic::numbered_topics("shared topic", 8);
  auto test_topics = shared;
  for (const auto& t : synthetic::numbered_topics("test topic", 7)) test_topics.push_back(t);

  const synthetic::SplitShape shapes[] = {
      {Split::train, {331, 18, 296, 105}, train_topics},
      {Split::dev, {33, 44, 87, 38}, shared},
      {Split::test, {110, 96, 184, 130}, test_topics},
  };
  std::uint64_t seed = 1;
  for (const auto& s : shapes)
    delimited::write_atomic(out / (to_string(s.split) + ".csv"), format_corpus(synthetic::shaped_split(s, seed++)));

  const nlohmann::json cfg = {
      {"data", {{"train", "train.csv"}, {"dev", "dev.csv"}, {"test", "test.csv"}}},
      {"train", {{"profile", "clteaml-2"}, {"learning_rate", 0.01}, {"epochs", 3}}},
      {"prompt", {{"provider", "mock"}, {"cache_dir", "prompt-cache"}}},
      {"output_dir", "runs"},
      {"seed", 0}};
  delimited::write_atomic(out / "config.json", cfg.dump(2) + "\n");
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}
