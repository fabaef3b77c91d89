#pragma once

// Shared-encoder multi-task classifier: one encoder, one affine head per task
// producing (negative, positive) logits, trained by sampling a task per batch.

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "argq/common.hpp"
#include "argq/corpus.hpp"
#include "argq/delimited.hpp"
#include "argq/encoder.hpp"
#include "argq/evaluation.hpp"
#include "argq/optim.hpp"
#include "argq/predictions.hpp"
#include "argq/pretrained.hpp"
#include "argq/random.hpp"
#include "json.hpp"

namespace argq {

using Logits = std::array<double, 2>;

inline void validate_task_probabilities(const std::array<double, 2>& p) {
  if (!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= 1.0 && p[1] <= 1.0) || std::abs(p[0] + p[1] - 1.0) > 1e-9)
    throw ConfigError("task probabilities must be non-negative and sum to 1");
}

inline Task sample_task(Rng& rng, const std::array<double, 2>& probabilities) {
  validate_task_probabilities(probabilities);
  return rng.uniform() < probabilities[0] ? Task::validity : Task::novelty;
}

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 9;
  std::size_t grad_accumulation = 1;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 2> task_probabilities{0.5, 0.5};  // (validity, novelty)
  std::string combined_metric = kDefaultCombinedMetric;

  // Named hyperparameter profiles of the submitted systems.
  static TrainConfig profile(const std::string& name) {
    TrainConfig c;
    if (name == "clteaml-2") {
      c.learning_rate = 1e-5;
      c.epochs = 9;
      c.grad_accumulation = 1;
    } else if (name == "clteaml-4") {
      c.learning_rate = 5e-6;
      c.epochs = 6;
      c.grad_accumulation = 4;
    } else {
      throw ConfigError("unknown training profile '" + name + "' (expected clteaml-2 or clteaml-4)");
    }
    return c;
  }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (grad_accumulation < 1) throw ConfigError("grad_accumulation must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    validate_task_probabilities(task_probabilities);
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},     {"epochs", c.epochs},
       {"grad_accumulation", c.grad_accumulation}, {"batch_size", c.batch_size},
       {"weight_decay", c.weight_decay},       {"seed", c.seed},
       {"task_probabilities", c.task_probabilities}, {"combined_metric", c.combined_metric}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("profile")) c = TrainConfig::profile(j.at("profile").get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.grad_accumulation = j.value("grad_accumulation", c.grad_accumulation);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.task_probabilities = j.value("task_probabilities", c.task_probabilities);
  c.combined_metric = j.value("combined_metric", c.combined_metric);
}

// Encoder input for one instance.
inline std::string input_text(const ArgumentInstance& i) {
  return "topic: " + i.topic + " premise: " + i.premise + " conclusion: " + i.conclusion;
}

struct Head {
  Param weight;  // 2 x dim, row 0 = negative logit
  Param bias;    // 2

  Head() = default;
  Head(const std::string& name, std::size_t dim, Rng& rng)
      : weight(name + ".weight", 2 * dim), bias(name + ".bias", 2) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : weight.value) w = rng.uniform(-bound, bound);
    for (double& b : bias.value) b = rng.uniform(-bound, bound);
  }

  std::size_t dim() const { return weight.size() / 2; }

  Logits apply(std::span<const double> x) const {
    const std::size_t d = dim();
    Logits out{bias.value[0], bias.value[1]};
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < d; ++i) out[k] += weight.value[k * d + i] * x[i];
    return out;
  }
};

class MtlModel {
 public:
  MtlModel() : MtlModel(Encoder()) {}
  explicit MtlModel(Encoder encoder, std::uint64_t head_seed = 0, std::string name = "mtl")
      : encoder_(std::move(encoder)), name_(std::move(name)) {
    Rng rng(head_seed ^ 0x9e3779b97f4a7c15ULL);
    heads_[0] = Head("head.validity", encoder_.dim(), rng);
    heads_[1] = Head("head.novelty", encoder_.dim(), rng);
  }

  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Head& head(Task t) { return heads_[t == Task::validity ? 0 : 1]; }
  const Head& head(Task t) const { return heads_[t == Task::validity ? 0 : 1]; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  // How an external encoder was obtained, so checkpoints can rebuild it.
  const nlohmann::json& encoder_source() const { return encoder_source_; }
  void set_encoder_source(nlohmann::json j) { encoder_source_ = std::move(j); }

  // Encoder params first (when trainable), then validity head, novelty head.
  std::vector<Param*> params() {
    std::vector<Param*> ps;
    if (encoder_.trainable()) ps = encoder_.reference().params();
    for (auto& h : heads_) {
      ps.push_back(&h.weight);
      ps.push_back(&h.bias);
    }
    return ps;
  }

  std::vector<std::vector<double>> snapshot() {
    std::vector<std::vector<double>> s;
    for (Param* p : params()) s.push_back(p->value);
    return s;
  }

  void restore(const std::vector<std::vector<double>>& s) {
    auto ps = params();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.at(i);
  }

 private:
  Encoder encoder_;
  std::array<Head, 2> heads_;
  std::string name_;
  nlohmann::json encoder_source_;
};

inline std::vector<Logits> forward(const MtlModel& model, const Corpus& batch, Task task) {
  std::vector<std::string> texts;
  texts.reserve(batch.size());
  for (const auto& i : batch) texts.push_back(input_text(i));
  const auto emb = model.encoder().encode(texts);
  std::vector<Logits> out;
  out.reserve(batch.size());
  for (const auto& e : emb) out.push_back(model.head(task).apply(e));
  return out;
}

// Numerically stable -log softmax(logits)[target].
inline double cross_entropy(const Logits& z, Label target) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[label_index(target)];
}

// Strictly greater positive logit wins; exact ties go to negative.
inline Label decide(const Logits& z) { return z[1] > z[0] ? Label::positive : Label::negative; }

// Mean cross-entropy over `batch` on the selected head.
inline double batch_loss(const MtlModel& model, const Corpus& batch, Task task) {
  const auto logits = forward(model, batch, task);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) loss += cross_entropy(logits[i], batch[i].label(task));
  return loss / static_cast<double>(batch.size());
}

// Same as batch_loss, additionally accumulating gradients into the selected
// head and, when trainable, the encoder. `features` optionally supplies
// precomputed embeddings for frozen encoders.
inline double accumulate_batch_gradients(MtlModel& model, const Corpus& batch, Task task,
                                         const std::vector<const Vector*>* features = nullptr) {
  Head& head = model.head(task);
  const std::size_t d = head.dim();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::optional<EncodeTrace> trace;
    Vector external;
    const Vector* x;
    if (model.encoder().trainable()) {
      trace = model.encoder().reference().trace(input_text(batch[i]));
      x = &trace->output;
    } else if (features) {
      x = (*features)[i];
    } else {
      const std::string text[] = {input_text(batch[i])};
      external = model.encoder().encode(text).at(0);
      x = &external;
    }
    const Logits z = head.apply(*x);
    const Label y = batch[i].label(task);
    loss += cross_entropy(z, y);
    // d CE / d z = softmax(z) - onehot(y)
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    const std::array<double, 2> dz{(e0 / (e0 + e1) - (y == Label::negative ? 1.0 : 0.0)) * scale,
                                   (e1 / (e0 + e1) - (y == Label::positive ? 1.0 : 0.0)) * scale};
    Vector dx(d, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
      head.bias.grad[k] += dz[k];
      for (std::size_t j = 0; j < d; ++j) {
        head.weight.grad[k * d + j] += dz[k] * (*x)[j];
        dx[j] += dz[k] * head.weight.value[k * d + j];
      }
    }
    head.weight.touched = head.bias.touched = true;
    if (trace) model.encoder().reference().backward(*trace, dx);
  }
  return loss * scale;
}

inline PredictionSet predict(const MtlModel& model, const Corpus& instances, Task task) {
  std::vector<Prediction> rows;
  if (instances.empty()) return PredictionSet();
  const auto logits = forward(model, instances, task);
  for (std::size_t i = 0; i < instances.size(); ++i)
    rows.push_back({instances[i].id, task, decide(logits[i]), model.name(), false});
  return PredictionSet(std::move(rows));
}

inline PredictionSet predict_both(const MtlModel& model, const Corpus& instances) {
  auto rows = predict(model, instances, Task::validity).rows();
  const auto novelty = predict(model, instances, Task::novelty);
  rows.insert(rows.end(), novelty.rows().begin(), novelty.rows().end());
  return PredictionSet(std::move(rows));
}

// Index of the best combined F1; ties go to the earliest epoch.
inline std::size_t select_best(const std::vector<double>& combined_f1) {
  if (combined_f1.empty()) throw DataError("select_best on an empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < combined_f1.size(); ++i)
    if (combined_f1[i] > combined_f1[best]) best = i;
  return best;
}

inline std::size_t select_best(const std::vector<EpochRecord>& history) {
  std::vector<double> f1;
  for (const auto& r : history) f1.push_back(r.dev_combined_f1);
  return select_best(f1);
}

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

inline EpochRecord score_dev(const MtlModel& model, const Corpus& dev, const std::string& metric) {
  const auto preds = predict_both(model, dev);
  EpochRecord r;
  r.dev_combined_f1 = combined_score(preds, dev, metric);
  r.dev_validity_f1 = macro_f1(confusion(preds, dev, Task::validity));
  r.dev_novelty_f1 = macro_f1(confusion(preds, dev, Task::novelty));
  return r;
}

// Trains in place and leaves `model` at the best dev checkpoint.
inline TrainResult train(MtlModel& model, const Corpus& train_set, const Corpus& dev_set, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (dev_set.empty()) throw DataError("dev set is empty");

  Rng rng(config.seed);
  AdamW optimizer({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  auto params = model.params();
  zero_grads(params);

  // Frozen encoders: embed every training text once.
  std::vector<Vector> frozen;
  if (!model.encoder().trainable()) {
    std::vector<std::string> texts;
    for (const auto& i : train_set) texts.push_back(input_text(i));
    frozen = model.encoder().encode(texts);
  }

  const std::size_t n = train_set.size(), bs = config.batch_size;
  const std::size_t batches_per_task = (n + bs - 1) / bs;
  std::size_t active_tasks = 0;
  for (double p : config.task_probabilities) active_tasks += p > 0.0 ? 1 : 0;
  const std::size_t steps_per_epoch = batches_per_task * active_tasks;

  TrainResult result;
  std::vector<std::vector<double>> best_params;
  double best_f1 = -1.0;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::array<std::vector<std::size_t>, 2> order{rng.permutation(n), rng.permutation(n)};
    std::array<std::size_t, 2> cursor{0, 0};
    std::size_t pending = 0;
    double loss_sum = 0.0;

    for (std::size_t step = 0; step < steps_per_epoch; ++step, ++global_step) {
      const Task task = sample_task(rng, config.task_probabilities);
      const std::size_t t = task == Task::validity ? 0 : 1;
      Corpus batch;
      std::vector<const Vector*> feats;
      while (batch.size() < bs) {
        if (cursor[t] == n) {
          if (!batch.empty()) break;
          order[t] = rng.permutation(n);
          cursor[t] = 0;
        }
        const std::size_t idx = order[t][cursor[t]++];
        batch.push_back(train_set[idx]);
        if (!frozen.empty()) feats.push_back(&frozen[idx]);
      }
      const double loss = accumulate_batch_gradients(model, batch, task, frozen.empty() ? nullptr : &feats);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + " (global step " + std::to_string(global_step) + ")");
      loss_sum += loss;
      if (++pending == config.grad_accumulation) {
        optimizer.step(params, 1.0 / static_cast<double>(pending));
        zero_grads(params);
        pending = 0;
      }
    }
    if (pending) {
      optimizer.step(params, 1.0 / static_cast<double>(pending));
      zero_grads(params);
    }

    EpochRecord rec = score_dev(model, dev_set, config.combined_metric);
    rec.epoch = epoch;
    rec.train_loss = steps_per_epoch ? loss_sum / static_cast<double>(steps_per_epoch) : 0.0;
    result.history.push_back(rec);
    if (rec.dev_combined_f1 > best_f1) {
      best_f1 = rec.dev_combined_f1;
      best_params = model.snapshot();
    }
    if (on_epoch) on_epoch(rec);
  }
  result.best_epoch = select_best(result.history);
  model.restore(best_params);
  return result;
}

// Checkpoint layout (JSON):
//   { "format": "argq-mtl-checkpoint", "version": 1, "name": str,
//     "train_config": {...}, "best_epoch": int, "history": [EpochRecord...],
//     "encoder": {"backend": "reference", "config": {...}, "embedding": [...],
//                 "projection_weight": [...], "projection_bias": [...]}
//              | {"backend": "external", "descriptor": {...}, "dim": int},
//     "heads": {"validity": {"weight": [...], "bias": [...]}, "novelty": {...}} }
// Numbers are written with round-trip precision, so a reload is bit-exact.
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(const MtlModel& model, const TrainConfig& config, const TrainResult& result) {
  nlohmann::json enc;
  if (model.encoder().trainable()) {
    enc = model.encoder().reference().to_json();
    enc["backend"] = "reference";
  } else {
    enc = {{"backend", "external"}, {"descriptor", model.encoder_source()}, {"dim", model.encoder().dim()}};
  }
  nlohmann::json heads = nlohmann::json::object();
  for (Task t : kTasks)
    heads[to_string(t)] = {{"weight", model.head(t).weight.value}, {"bias", model.head(t).bias.value}};
  return {{"format", "argq-mtl-checkpoint"},
          {"version", kCheckpointVersion},
          {"name", model.name()},
          {"train_config", config},
          {"best_epoch", result.best_epoch},
          {"history", result.history},
          {"encoder", enc},
          {"heads", heads}};
}

inline void save_checkpoint(const std::filesystem::path& path, const MtlModel& model, const TrainConfig& config,
                            const TrainResult& result) {
  delimited::write_atomic(path, checkpoint_json(model, config, result).dump(1) + "\n");
}

struct LoadedCheckpoint {
  MtlModel model;
  TrainConfig config;
  TrainResult result;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(delimited::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "argq-mtl-checkpoint") throw ParseError("'" + path.string() + "' is not an argq checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  const auto& ej = j.at("encoder");
  Encoder encoder;
  nlohmann::json source;
  if (ej.value("backend", "reference") == "reference") {
    encoder = Encoder(ReferenceEncoder::from_json(ej));
  } else {
    source = ej.at("descriptor");
    encoder = load_pretrained(source.get<PretrainedDescriptor>(), ej.at("dim").get<std::size_t>());
  }
  LoadedCheckpoint out{MtlModel(std::move(encoder), 0, j.value("name", "mtl")), j.at("train_config").get<TrainConfig>(),
                       {}};
  out.model.set_encoder_source(source);
  for (Task t : kTasks) {
    const auto& h = j.at("heads").at(to_string(t));
    auto w = h.at("weight").get<std::vector<double>>();
    auto b = h.at("bias").get<std::vector<double>>();
    if (w.size() != out.model.head(t).weight.size() || b.size() != 2)
      throw ConfigError("checkpoint head '" + to_string(t) + "' has " + std::to_string(w.size() / 2) +
                        " inputs, encoder produces " + std::to_string(out.model.encoder().dim()));
    out.model.head(t).weight.value = std::move(w);
    out.model.head(t).bias.value = std::move(b);
  }
  out.result.best_epoch = j.at("best_epoch").get<std::size_t>();
  out.result.history = j.at("history").get<std::vector<EpochRecord>>();
  return out;
}

}  // namespace argq
