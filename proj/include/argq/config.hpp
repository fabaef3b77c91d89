#pragma once

// Run configuration for the pipeline tool. Every field has a default, unknown
// keys are rejected so typos surface, and the resolved form is what gets
// echoed into each run directory.

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "argq/baseline.hpp"
#include "argq/common.hpp"
#include "argq/contrastive.hpp"
#include "argq/corpus.hpp"
#include "argq/delimited.hpp"
#include "argq/mtl.hpp"
#include "argq/pretrained.hpp"
#include "argq/prompting.hpp"
#include "json.hpp"

namespace argq {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ColumnMap& c) {
  j = {{"id", c.id},
       {"topic", c.topic},
       {"premise", c.premise},
       {"conclusion", c.conclusion},
       {"validity", c.validity},
       {"validity_confidence", c.validity_confidence},
       {"novelty", c.novelty},
       {"novelty_confidence", c.novelty_confidence},
       {"value_map", c.value_map}};
}

inline void from_json(const nlohmann::json& j, ColumnMap& c) {
  detail::check_keys(j, "data.column_map",
                     {"id", "topic", "premise", "conclusion", "validity", "validity_confidence", "novelty",
                      "novelty_confidence", "value_map"});
  c.id = j.value("id", c.id);
  c.topic = j.value("topic", c.topic);
  c.premise = j.value("premise", c.premise);
  c.conclusion = j.value("conclusion", c.conclusion);
  c.validity = j.value("validity", c.validity);
  c.validity_confidence = j.value("validity_confidence", c.validity_confidence);
  c.novelty = j.value("novelty", c.novelty);
  c.novelty_confidence = j.value("novelty_confidence", c.novelty_confidence);
  c.value_map = j.value("value_map", c.value_map);
}

struct DataConfig {
  std::string train, dev, test;
  ColumnMap column_map;

  const std::string& path(Split s) const { return s == Split::train ? train : s == Split::dev ? dev : test; }
};

struct PromptConfig {
  std::string provider = "replay-only";  // mock | replay-only | http-openai-compatible
  std::string cache_dir = "prompt-cache";
  std::string source = "gpt3";
  std::string model_id = "text-davinci-002";
  int max_tokens = 4;
  std::size_t parallelism = 1;
  double requests_per_second = 0.0;
  HttpProviderConfig http;
  std::string mock_default = "no";
  std::vector<std::pair<std::string, std::string>> mock_rules;  // (needle, response)
};

struct RunConfig {
  DataConfig data;
  PretrainedDescriptor encoder;
  TrainConfig train;
  std::string train_profile;  // empty: fields as given
  bool contrastive_enabled = false;
  ContrastiveConfig contrastive;
  PromptConfig prompt;
  BaselineConfig baseline;
  std::string combined_metric = kDefaultCombinedMetric;
  std::string output_dir = "runs";
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  std::size_t sweep_parallelism = 1;
  std::size_t top_k_topics = 3;

  void validate() const {
    train.validate();
    contrastive.validate();
    encoder.config.validate();
    if (!combined_metrics().count(combined_metric))
      throw ConfigError("unknown combined_metric '" + combined_metric + "'");
    if (train.combined_metric != combined_metric)
      throw ConfigError("train.combined_metric '" + train.combined_metric + "' conflicts with combined_metric '" +
                        combined_metric + "'");
    if (contrastive_enabled && encoder.backend != "reference")
      throw ConfigError("contrastive stage needs the trainable reference encoder, backend is '" + encoder.backend +
                        "'");
    static const std::set<std::string> providers = {"mock", "replay-only", "http-openai-compatible"};
    if (!providers.count(prompt.provider))
      throw ConfigError("unknown prompt provider '" + prompt.provider +
                        "' (expected mock, replay-only or http-openai-compatible)");
    if (prompt.parallelism < 1) throw ConfigError("prompt.parallelism must be >= 1");
    if (sweep_parallelism < 1) throw ConfigError("sweep_parallelism must be >= 1");
    if (!(baseline.c_validity > 0.0) || !(baseline.c_novelty > 0.0)) throw ConfigError("baseline C must be positive");
  }
};

inline nlohmann::json to_json(const PromptConfig& p) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& [needle, response] : p.mock_rules) rules.push_back({needle, response});
  return {{"provider", p.provider},
          {"cache_dir", p.cache_dir},
          {"source", p.source},
          {"model_id", p.model_id},
          {"max_tokens", p.max_tokens},
          {"parallelism", p.parallelism},
          {"requests_per_second", p.requests_per_second},
          {"http",
           {{"base_url", p.http.base_url},
            {"path", p.http.path},
            {"api_key_env", p.http.api_key_env},
            {"timeout_seconds", p.http.timeout_seconds}}},
          {"mock", {{"default", p.mock_default}, {"rules", rules}}}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json contrastive = c.contrastive;
  contrastive["enabled"] = c.contrastive_enabled;
  nlohmann::json train = c.train;
  if (!c.train_profile.empty()) train["profile"] = c.train_profile;
  return {{"data",
           {{"train", c.data.train}, {"dev", c.data.dev}, {"test", c.data.test}, {"column_map", c.data.column_map}}},
          {"encoder", c.encoder},
          {"train", train},
          {"contrastive", contrastive},
          {"prompt", to_json(c.prompt)},
          {"baseline", c.baseline},
          {"combined_metric", c.combined_metric},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"sweep_parallelism", c.sweep_parallelism},
          {"top_k_topics", c.top_k_topics}};
}

// Relative data and cache paths resolve against `base` (the config file's
// directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  detail::check_keys(j, "config",
                     {"data", "encoder", "train", "contrastive", "prompt", "baseline", "combined_metric",
                      "output_dir", "seed", "seeds", "sweep_parallelism", "top_k_topics"});
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
  };
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::check_keys(d, "data", {"train", "dev", "test", "column_map"});
      c.data.train = resolve(d.value("train", ""));
      c.data.dev = resolve(d.value("dev", ""));
      c.data.test = resolve(d.value("test", ""));
      if (d.contains("column_map")) c.data.column_map = d.at("column_map").get<ColumnMap>();
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      detail::check_keys(e, "encoder", {"backend", "config", "checkpoint", "command", "url", "timeout_seconds"});
      c.encoder = e.get<PretrainedDescriptor>();
      c.encoder.checkpoint = resolve(c.encoder.checkpoint);
    }
    c.combined_metric = j.value("combined_metric", c.combined_metric);
    c.train.combined_metric = c.combined_metric;
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::check_keys(t, "train",
                         {"profile", "learning_rate", "epochs", "grad_accumulation", "batch_size", "weight_decay",
                          "seed", "task_probabilities", "combined_metric"});
      c.train_profile = t.value("profile", "");
      const std::string metric = c.train.combined_metric;
      c.train = t.get<TrainConfig>();
      if (!t.contains("combined_metric")) c.train.combined_metric = metric;
    }
    if (j.contains("contrastive")) {
      const auto& k = j.at("contrastive");
      detail::check_keys(k, "contrastive",
                         {"enabled", "margin", "learning_rate", "epochs", "batch_size", "distance", "weight_decay",
                          "seed"});
      c.contrastive_enabled = k.value("enabled", false);
      c.contrastive = k.get<ContrastiveConfig>();
    }
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      detail::check_keys(p, "prompt",
                         {"provider", "cache_dir", "source", "model_id", "max_tokens", "parallelism",
                          "requests_per_second", "http", "mock"});
      c.prompt.provider = p.value("provider", c.prompt.provider);
      c.prompt.cache_dir = resolve(p.value("cache_dir", c.prompt.cache_dir));
      c.prompt.source = p.value("source", c.prompt.source);
      c.prompt.model_id = p.value("model_id", c.prompt.model_id);
      c.prompt.max_tokens = p.value("max_tokens", c.prompt.max_tokens);
      c.prompt.parallelism = p.value("parallelism", c.prompt.parallelism);
      c.prompt.requests_per_second = p.value("requests_per_second", c.prompt.requests_per_second);
      if (p.contains("http")) {
        const auto& h = p.at("http");
        detail::check_keys(h, "prompt.http", {"base_url", "path", "api_key_env", "timeout_seconds"});
        c.prompt.http.base_url = h.value("base_url", c.prompt.http.base_url);
        c.prompt.http.path = h.value("path", c.prompt.http.path);
        c.prompt.http.api_key_env = h.value("api_key_env", c.prompt.http.api_key_env);
        c.prompt.http.timeout_seconds = h.value("timeout_seconds", c.prompt.http.timeout_seconds);
      }
      if (p.contains("mock")) {
        const auto& m = p.at("mock");
        detail::check_keys(m, "prompt.mock", {"default", "rules"});
        c.prompt.mock_default = m.value("default", c.prompt.mock_default);
        for (const auto& r : m.value("rules", nlohmann::json::array()))
          c.prompt.mock_rules.emplace_back(r.at(0).get<std::string>(), r.at(1).get<std::string>());
      }
    }
    if (j.contains("baseline")) {
      detail::check_keys(j.at("baseline"), "baseline", {"c_validity", "c_novelty", "steps_per_example", "seed"});
      c.baseline = j.at("baseline").get<BaselineConfig>();
    }
    c.output_dir = resolve(j.value("output_dir", c.output_dir));
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    c.sweep_parallelism = j.value("sweep_parallelism", c.sweep_parallelism);
    c.top_k_topics = j.value("top_k_topics", c.top_k_topics);
    // The top-level seed fills every component seed not set explicitly.
    auto has_seed = [&](const char* section) { return j.contains(section) && j.at(section).contains("seed"); };
    if (!has_seed("train")) c.train.seed = c.seed;
    if (!has_seed("contrastive")) c.contrastive.seed = c.seed;
    if (!has_seed("baseline")) c.baseline.seed = c.seed;
    if (!(j.contains("encoder") && j.at("encoder").contains("config") && j.at("encoder").at("config").contains("seed")))
      c.encoder.config.seed = c.seed;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

// Same run with every component seeded from `seed`.
inline RunConfig with_seed(RunConfig c, std::uint64_t seed) {
  c.seed = c.train.seed = c.contrastive.seed = c.baseline.seed = c.encoder.config.seed = seed;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(delimited::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

inline std::unique_ptr<CompletionProvider> make_provider(const PromptConfig& p) {
  if (p.provider == "mock") {
    auto m = std::make_unique<MockProvider>(p.mock_default);
    for (const auto& [needle, response] : p.mock_rules) m->when_contains(needle, response);
    return m;
  }
  if (p.provider == "replay-only") return std::make_unique<ReplayOnlyProvider>();
  if (p.provider == "http-openai-compatible") return std::make_unique<HttpCompletionProvider>(p.http);
  throw ConfigError("unknown prompt provider '" + p.provider + "'");
}

}  // namespace argq
