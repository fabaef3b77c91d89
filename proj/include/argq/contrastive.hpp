#pragma once

// Margin triplet-loss fine-tuning of the reference encoder on
// (premise, novel conclusion, non-novel conclusion) triplets.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "argq/common.hpp"
#include "argq/corpus.hpp"
#include "argq/encoder.hpp"
#include "argq/optim.hpp"
#include "argq/random.hpp"
#include "json.hpp"

namespace argq {

enum class Distance { cosine, euclidean };

inline std::string to_string(Distance d) { return d == Distance::cosine ? "cosine" : "euclidean"; }

inline Distance parse_distance(std::string_view s) {
  if (s == "cosine") return Distance::cosine;
  if (s == "euclidean") return Distance::euclidean;
  throw ConfigError("unknown distance '" + std::string(s) + "' (expected cosine or euclidean)");
}

struct ContrastiveConfig {
  double margin = 1.0;
  double learning_rate = 1e-5;
  std::size_t epochs = 3;
  std::size_t batch_size = 16;
  Distance distance = Distance::cosine;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(margin >= 0.0)) throw ConfigError("contrastive margin must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("contrastive learning_rate must be >= 0");
    if (epochs < 1) throw ConfigError("contrastive epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("contrastive batch_size must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const ContrastiveConfig& c) {
  j = {{"margin", c.margin},         {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
       {"batch_size", c.batch_size}, {"distance", to_string(c.distance)}, {"weight_decay", c.weight_decay},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ContrastiveConfig& c) {
  c.margin = j.value("margin", c.margin);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("distance")) c.distance = parse_distance(j.at("distance").get<std::string>());
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void check_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValueError("embedding lengths differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace detail

// Cosine distance is 1 - cos(a, b), in [0, 2].
inline double distance(std::span<const double> a, std::span<const double> b, Distance kind) {
  detail::check_same_length(a, b);
  if (kind == Distance::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  const double na = std::sqrt(detail::dot(a, a)), nb = std::sqrt(detail::dot(b, b));
  if (na == 0.0 || nb == 0.0) throw ValueError("cosine distance of a zero vector");
  return 1.0 - detail::dot(a, b) / (na * nb);
}

// Adds scale * d(distance(a, b))/da to grad_a and the b-gradient to grad_b.
inline void distance_gradient(std::span<const double> a, std::span<const double> b, Distance kind, double scale,
                              std::span<double> grad_a, std::span<double> grad_b) {
  const std::size_t n = a.size();
  if (kind == Distance::euclidean) {
    const double d = distance(a, b, kind);
    if (d == 0.0) return;  // subgradient 0
    for (std::size_t i = 0; i < n; ++i) {
      const double g = scale * (a[i] - b[i]) / d;
      grad_a[i] += g;
      grad_b[i] -= g;
    }
    return;
  }
  const double na = std::sqrt(detail::dot(a, a)), nb = std::sqrt(detail::dot(b, b));
  if (na == 0.0 || nb == 0.0) throw ValueError("cosine distance of a zero vector");
  const double cos = detail::dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < n; ++i) {
    grad_a[i] -= scale * (b[i] / (na * nb) - cos * a[i] / (na * na));
    grad_b[i] -= scale * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
  }
}

inline double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin, Distance kind) {
  return std::max(0.0, distance(anchor, positive, kind) - distance(anchor, negative, kind) + margin);
}

inline double mean_triplet_loss(const ReferenceEncoder& encoder, std::span<const TripletExample> triplets,
                                double margin, Distance kind) {
  if (triplets.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : triplets)
    s += triplet_loss(encoder.encode(t.anchor), encoder.encode(t.positive), encoder.encode(t.negative), margin, kind);
  return s / static_cast<double>(triplets.size());
}

// Mean loss over `batch`, accumulating its gradient into the encoder.
inline double accumulate_triplet_gradients(ReferenceEncoder& encoder, std::span<const TripletExample> batch,
                                           double margin, Distance kind) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& t : batch) {
    const auto ta = encoder.trace(t.anchor), tp = encoder.trace(t.positive), tn = encoder.trace(t.negative);
    const double l = distance(ta.output, tp.output, kind) - distance(ta.output, tn.output, kind) + margin;
    if (l <= 0.0) continue;  // inactive hinge, subgradient 0
    loss += l;
    const std::size_t d = encoder.dim();
    Vector ga(d, 0.0), gp(d, 0.0), gn(d, 0.0);
    distance_gradient(ta.output, tp.output, kind, scale, ga, gp);
    distance_gradient(ta.output, tn.output, kind, -scale, ga, gn);
    encoder.backward(ta, ga);
    encoder.backward(tp, gp);
    encoder.backward(tn, gn);
  }
  return loss * scale;
}

struct ContrastiveResult {
  double initial_loss = 0.0;       // mean loss over all triplets before training
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  double final_loss = 0.0;         // mean loss over all triplets after training
};

inline nlohmann::json to_json(const ContrastiveResult& r) {
  return {{"initial_loss", r.initial_loss}, {"epoch_loss", r.epoch_loss}, {"final_loss", r.final_loss}};
}

inline ContrastiveResult contrastive_train(ReferenceEncoder& encoder, std::span<const TripletExample> triplets,
                                           const ContrastiveConfig& config) {
  config.validate();
  if (triplets.empty())
    throw ConfigError("contrastive stage has no triplets; disable the stage explicitly to skip it");
  Rng rng(config.seed);
  AdamW optimizer({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  auto params = encoder.params();
  zero_grads(params);

  ContrastiveResult result;
  result.initial_loss = mean_triplet_loss(encoder, triplets, config.margin, config.distance);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = rng.permutation(triplets.size());
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<TripletExample> batch;
      for (std::size_t k = start; k < order.size() && k < start + config.batch_size; ++k)
        batch.push_back(triplets[order[k]]);
      const double loss = accumulate_triplet_gradients(encoder, batch, config.margin, config.distance);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite triplet loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      optimizer.step(params);
      zero_grads(params);
      sum += loss;
      ++batches;
    }
    result.epoch_loss.push_back(sum / static_cast<double>(batches));
  }
  result.final_loss = mean_triplet_loss(encoder, triplets, config.margin, config.distance);
  return result;
}

}  // namespace argq
