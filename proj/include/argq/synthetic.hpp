#pragma once

// Generated corpora with known structure, for tests, acceptance runs and
// dry runs of the pipeline without the shared-task release.

#include <array>
#include <string>
#include <vector>

#include "argq/corpus.hpp"
#include "argq/random.hpp"

namespace argq::synthetic {

inline std::string filler_word(Rng& rng, std::size_t vocab) { return "w" + std::to_string(rng.below(vocab)); }

inline std::string filler(Rng& rng, std::size_t words, std::size_t vocab) {
  std::string s;
  for (std::size_t k = 0; k < words; ++k) s += (k ? " " : "") + filler_word(rng, vocab);
  return s;
}

inline Confidence random_confidence(Rng& rng) {
  static constexpr Confidence graded[] = {Confidence::majority, Confidence::confident, Confidence::very_confident};
  return graded[rng.below(3)];
}

// Labels are carried only by marker tokens in the conclusion
// ("vpos"/"vneg", "npos"/"nneg"); the remaining tokens are noise. Negative
// raw labels alternate between -1 and 0 to exercise the label mapping.
inline Corpus separable_corpus(std::size_t n, std::uint64_t seed, Split split = Split::train,
                               const std::string& id_prefix = "") {
  Rng rng(seed);
  Corpus out;
  for (std::size_t i = 0; i < n; ++i) {
    ArgumentInstance a;
    a.id = id_prefix + std::to_string(i);
    a.split = split;
    a.topic = "topic " + std::to_string(rng.below(6));
    const bool valid = rng.bernoulli(0.5), novel = rng.bernoulli(0.5);
    a.premise = filler(rng, 6, 300);
    a.conclusion = filler(rng, 2, 300) + (valid ? " vpos" : " vneg") + (novel ? " npos" : " nneg");
    a.validity_raw = valid ? 1 : (i % 2 ? 0 : -1);
    a.novelty_raw = novel ? 1 : (i % 3 ? -1 : 0);
    a.validity_confidence = random_confidence(rng);
    a.novelty_confidence = random_confidence(rng);
    out.push_back(std::move(a));
  }
  return out;
}

// Anchor and positive share a marker token; the negative carries a different
// one. All other tokens are drawn independently, so the encoder has to learn
// that the markers matter.
inline std::vector<TripletExample> separable_triplets(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TripletExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t group = rng.below(4);
    std::size_t other = rng.below(3);
    if (other >= group) ++other;
    const std::string mark = "mark" + std::to_string(group), wrong = "mark" + std::to_string(other);
    TripletExample t;
    t.topic = "topic " + std::to_string(group);
    t.anchor = filler(rng, 3, 200) + " " + mark;
    t.positive = filler(rng, 3, 200) + " " + mark;
    t.negative = filler(rng, 3, 200) + " " + wrong;
    out.push_back(std::move(t));
  }
  return out;
}

struct SplitShape {
  Split split;
  std::array<std::size_t, 4> distribution;  // ClassDistribution order
  std::vector<std::string> topics;
};

// Builds one split with exactly the given joint-class counts, cycling
// through `topics`. In the train split a share of negatives use the middle
// raw value 0, which must map to negative.
inline Corpus shaped_split(const SplitShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  Corpus out;
  std::size_t k = 0;
  for (std::size_t cls = 0; cls < 4; ++cls) {
    const bool valid = cls >= 2, novel = cls % 2 == 1;
    for (std::size_t c = 0; c < shape.distribution[cls]; ++c, ++k) {
      ArgumentInstance a;
      a.id = to_string(shape.split) + "-" + std::to_string(k);
      a.split = shape.split;
      a.topic = shape.topics[k % shape.topics.size()];
      a.premise = "premise about " + a.topic + " " + filler(rng, 8, 500);
      a.conclusion = "conclusion " + filler(rng, 5, 500);
      const bool middle = shape.split == Split::train && k % 5 == 0;
      a.validity_raw = valid ? 1 : (middle ? 0 : -1);
      a.novelty_raw = novel ? 1 : (middle ? 0 : -1);
      a.validity_confidence = random_confidence(rng);
      a.novelty_confidence = random_confidence(rng);
      out.push_back(std::move(a));
    }
  }
  rng.shuffle(out);
  return out;
}

inline std::vector<std::string> numbered_topics(const std::string& prefix, std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(prefix + " " + std::to_string(i + 1));
  return t;
}

}  // namespace argq::synthetic
