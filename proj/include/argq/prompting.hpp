#pragma once

// Few-shot prompting: static example selection, the prompt template, a
// provider-agnostic completion client behind a deterministic replay cache,
// and answer parsing.
//
// Prompt template (version 1). Each answered example block is
//
//   topic: {topic}\npremise: {premise}\nconclusion: {conclusion}\n{word}: {yes|no}\n\n
//
// with {word} = "valid" or "novel"; the target block has the same first three
// lines and ends right after "{word}:".

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "argq/common.hpp"
#include "argq/corpus.hpp"
#include "argq/delimited.hpp"
#include "argq/hashing.hpp"
#include "argq/predictions.hpp"
#include "httplib.h"
#include "json.hpp"

namespace argq {

inline constexpr int kPromptTemplateVersion = 1;

struct PromptRequest {
  std::string model_id = "text-davinci-002";
  std::string prompt;
  double temperature = 0.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  int max_tokens = 4;

  nlohmann::json to_json() const {
    return {{"model_id", model_id},
            {"prompt", prompt},
            {"temperature", temperature},
            {"frequency_penalty", frequency_penalty},
            {"presence_penalty", presence_penalty},
            {"max_tokens", max_tokens}};
  }

  static PromptRequest from_json(const nlohmann::json& j) {
    PromptRequest r;
    r.model_id = j.value("model_id", r.model_id);
    r.prompt = j.value("prompt", r.prompt);
    r.temperature = j.value("temperature", r.temperature);
    r.frequency_penalty = j.value("frequency_penalty", r.frequency_penalty);
    r.presence_penalty = j.value("presence_penalty", r.presence_penalty);
    r.max_tokens = j.value("max_tokens", r.max_tokens);
    return r;
  }

  // SHA-256 over the canonical (key-sorted) JSON of every field that can
  // change the completion.
  std::string cache_key() const { return sha256_hex(to_json().dump()); }

  void validate() const {
    if (prompt.empty()) throw ValueError("prompt must be non-empty");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  }
};

struct PromptResponse {
  std::string raw_text;
  std::string provider;
  bool cached = false;
};

// ---------------------------------------------------------------------------
// Few-shot selection

struct FewShotSet {
  Task task = Task::validity;
  std::vector<ArgumentInstance> examples;  // exactly 4, in prompt order
};

// Lower rank = lower annotator agreement. Tags that carry no agreement
// signal sort after the graded ones.
inline int agreement_rank(Confidence c) {
  switch (c) {
    case Confidence::majority: return 0;
    case Confidence::confident: return 1;
    case Confidence::very_confident: return 2;
    case Confidence::defeasible: return 3;
    case Confidence::unknown: return 4;
  }
  return 4;
}

// Numeric-aware id order: integer ids compare by value, others lexically.
inline bool id_less(const std::string& a, const std::string& b) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  if (numeric(a) && numeric(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

inline FewShotSet select_few_shot(const Corpus& train, Task task) {
  for (Label l : {Label::positive, Label::negative}) {
    const auto n = std::count_if(train.begin(), train.end(), [&](const auto& i) { return i.label(task) == l; });
    if (n < 2)
      throw DataError("few-shot selection needs at least 2 " + to_string(l) + " " + to_string(task) +
                      " examples, found " + std::to_string(n));
  }
  std::vector<const ArgumentInstance*> ranked;
  for (const auto& i : train) ranked.push_back(&i);
  std::stable_sort(ranked.begin(), ranked.end(), [&](const ArgumentInstance* a, const ArgumentInstance* b) {
    const int ra = agreement_rank(a->confidence(task)), rb = agreement_rank(b->confidence(task));
    if (ra != rb) return ra < rb;
    const auto la = a->premise.size() + a->conclusion.size(), lb = b->premise.size() + b->conclusion.size();
    if (la != lb) return la < lb;
    return id_less(a->id, b->id);
  });
  FewShotSet set{task, {}};
  for (std::size_t k = 0; k < 4; ++k) set.examples.push_back(*ranked[k]);
  const Label first = set.examples[0].label(task);
  const bool one_label = std::all_of(set.examples.begin(), set.examples.end(),
                                     [&](const auto& e) { return e.label(task) == first; });
  if (one_label) {
    auto other = std::find_if(ranked.begin(), ranked.end(), [&](auto* i) { return i->label(task) != first; });
    set.examples[3] = **other;
  }
  return set;
}

// ---------------------------------------------------------------------------
// Prompt construction

inline std::string task_word(Task t) { return t == Task::validity ? "valid" : "novel"; }

inline std::string prompt_block(const ArgumentInstance& i, Task task, std::optional<Label> answer) {
  std::string s = "topic: " + i.topic + "\npremise: " + i.premise + "\nconclusion: " + i.conclusion + "\n" +
                  task_word(task) + ":";
  if (answer) s += std::string(" ") + (*answer == Label::positive ? "yes" : "no") + "\n\n";
  return s;
}

inline std::string build_prompt(const FewShotSet& few_shot, const ArgumentInstance& target, Task task) {
  if (few_shot.task != task)
    throw ConfigError("few-shot set is for " + to_string(few_shot.task) + ", prompt requested for " + to_string(task));
  std::string prompt;
  for (const auto& e : few_shot.examples) prompt += prompt_block(e, task, e.label(task));
  prompt += prompt_block(target, task, std::nullopt);
  return prompt;
}

// ---------------------------------------------------------------------------
// Replay cache: a directory of <key>.json records
//   {"key", "request", "raw_text", "provider", "timestamp"}.

class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  std::optional<nlohmann::json> lookup(const std::string& key) const {
    const auto p = path_for(key);
    if (!std::filesystem::exists(p)) return std::nullopt;
    try {
      auto j = nlohmann::json::parse(delimited::read_file(p));
      if (j.value("key", "") != key) throw ParseError("cache record '" + p.string() + "' has a mismatched key");
      return j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("cache record '" + p.string() + "' is corrupt: " + e.what());
    }
  }

  void store(const std::string& key, const PromptRequest& request, const std::string& raw_text,
             const std::string& provider) const {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    ::gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    const nlohmann::json record = {{"key", key},
                                   {"request", request.to_json()},
                                   {"raw_text", raw_text},
                                   {"provider", provider},
                                   {"timestamp", stamp}};
    delimited::write_atomic(path_for(key), record.dump(1) + "\n");
  }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Providers

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string name() const = 0;
  // Returns the raw completion text. Throws ProviderError on failure.
  virtual std::string complete(const PromptRequest& request) = 0;
  // Providers that must never be called on a cache miss.
  virtual bool replay_only() const { return false; }
};

// Scripted responses for tests and dry runs: exact prompt match first, then
// the first registered substring rule that matches, then the default.
class MockProvider final : public CompletionProvider {
 public:
  explicit MockProvider(std::string default_response = "no") : default_(std::move(default_response)) {}

  void script(std::string prompt, std::string response) {
    std::lock_guard lock(mu_);
    exact_[std::move(prompt)] = std::move(response);
  }
  void when_contains(std::string needle, std::string response) {
    std::lock_guard lock(mu_);
    rules_.emplace_back(std::move(needle), std::move(response));
  }
  std::size_t calls() const { return calls_.load(); }

  std::string name() const override { return "mock"; }
  std::string complete(const PromptRequest& request) override {
    ++calls_;
    std::lock_guard lock(mu_);
    if (auto it = exact_.find(request.prompt); it != exact_.end()) return it->second;
    // Only the target block (after the last blank line) is matched, so
    // few-shot examples do not trigger rules.
    const auto cut = request.prompt.rfind("\n\n");
    const std::string target = cut == std::string::npos ? request.prompt : request.prompt.substr(cut + 2);
    for (const auto& [needle, response] : rules_)
      if (target.find(needle) != std::string::npos) return response;
    return default_;
  }

 private:
  std::string default_;
  std::map<std::string, std::string> exact_;
  std::vector<std::pair<std::string, std::string>> rules_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
};

class ReplayOnlyProvider final : public CompletionProvider {
 public:
  std::string name() const override { return "replay-only"; }
  std::string complete(const PromptRequest& request) override {
    throw CacheMissError("replay-only provider has no cached completion for key " + request.cache_key());
  }
  bool replay_only() const override { return true; }
};

struct HttpProviderConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 60.0;
};

// OpenAI-compatible legacy completions endpoint.
class HttpCompletionProvider final : public CompletionProvider {
 public:
  explicit HttpCompletionProvider(HttpProviderConfig config) : config_(std::move(config)) {}

  std::string name() const override { return "http-openai-compatible"; }

  std::string complete(const PromptRequest& request) override {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key)
      throw ProviderError("environment variable " + config_.api_key_env +
                          " is not set; export the API key or use the replay-only provider");
    httplib::Client client(config_.base_url);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    const nlohmann::json body = {{"model", request.model_id},
                                 {"prompt", request.prompt},
                                 {"temperature", request.temperature},
                                 {"frequency_penalty", request.frequency_penalty},
                                 {"presence_penalty", request.presence_penalty},
                                 {"max_tokens", request.max_tokens}};
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res)
      throw ProviderError("request to " + config_.base_url + " failed (" + httplib::to_string(res.error()) +
                          "); check connectivity and retry");
    if (res->status == 401 || res->status == 403)
      throw ProviderError("authentication rejected (HTTP " + std::to_string(res->status) + "); check " +
                          config_.api_key_env);
    if (res->status == 429 || res->status >= 500)
      throw ProviderError("provider returned HTTP " + std::to_string(res->status) +
                          "; retry later or lower the rate limit");
    if (res->status != 200) throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
      return nlohmann::json::parse(res->body).at("choices").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("provider response has no choices[0].text");
    }
  }

 private:
  HttpProviderConfig config_;
};

// Cache-first completion. Misses go to the provider and are persisted before
// the response is returned.
inline PromptResponse complete(CompletionProvider& provider, const PromptRequest& request, const ReplayCache& cache) {
  request.validate();
  const std::string key = request.cache_key();
  if (auto hit = cache.lookup(key)) return {hit->at("raw_text").get<std::string>(), hit->value("provider", ""), true};
  if (provider.replay_only()) throw CacheMissError("no cached completion for key " + key);
  std::string raw = provider.complete(request);
  cache.store(key, request, raw, provider.name());
  return {std::move(raw), provider.name(), false};
}

// ---------------------------------------------------------------------------
// Response parsing

// nullopt = unparseable.
inline std::optional<Label> parse_response(std::string_view raw_text, Task task) {
  std::string s = lowercase(trim(raw_text));
  auto is_strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  while (!s.empty() && is_strip(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && is_strip(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t end = 0;
  while (end < s.size() && (std::isalpha(static_cast<unsigned char>(s[end])) || s[end] == '-')) ++end;
  const std::string head = s.substr(0, end);
  if (head == "yes") return Label::positive;
  if (head == "no" || head == "not") return Label::negative;
  const std::string word = task_word(task);
  if (head == word) return Label::positive;
  if (head == "in" + word || head == "non-" + word || head == "non" + word || head == "un" + word)
    return Label::negative;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Corpus classification

// Token bucket: `rate` tokens per second, at most `burst` banked.
class RateLimiter {
 public:
  RateLimiter(double rate, double burst) : rate_(rate), burst_(std::max(1.0, burst)), tokens_(burst_) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  void refill() {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

  double rate_, burst_, tokens_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::mutex mu_;
};

struct ClassifyOptions {
  std::string source = "gpt3";
  PromptRequest request_template;  // everything but the prompt
  std::size_t parallelism = 1;
  double requests_per_second = 0.0;  // 0 = unlimited
};

// Prompts every instance for `task`. Unparseable answers fall back to the
// negative label and are flagged. Output order is independent of parallelism.
inline PredictionSet classify(const Corpus& instances, const FewShotSet& few_shot, Task task,
                              CompletionProvider& provider, const ReplayCache& cache,
                              const ClassifyOptions& options = {}) {
  std::vector<std::optional<Prediction>> results(instances.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;
  RateLimiter limiter(options.requests_per_second, static_cast<double>(std::max<std::size_t>(1, options.parallelism)));

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) return;
      {
        std::lock_guard lock(error_mu);
        if (first_error) return;
      }
      try {
        PromptRequest req = options.request_template;
        req.prompt = build_prompt(few_shot, instances[i], task);
        if (!cache.lookup(req.cache_key())) limiter.acquire();
        const auto resp = complete(provider, req, cache);
        const auto label = parse_response(resp.raw_text, task);
        results[i] = Prediction{instances[i].id, task, label.value_or(Label::negative), options.source, !label};
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.parallelism, instances.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  std::vector<Prediction> rows;
  for (auto& r : results) rows.push_back(std::move(*r));
  return PredictionSet(std::move(rows));
}

}  // namespace argq
