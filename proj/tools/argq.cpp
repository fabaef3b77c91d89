// argq: command-line driver for the argument-quality pipeline.
//
// Each subcommand writes into one run directory: the resolved config
// (config.json), digests of every input (inputs.json), its outputs, and a
// manifest listing both. Errors print one line, "error: <category>: <message>",
// and exit nonzero.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "argq/argq.hpp"

namespace fs = std::filesystem;
using namespace argq;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

class Run {
 public:
  Run(const RunConfig& cfg, std::string command, const std::string& out_override, std::vector<std::string> args)
      : cfg_(cfg), command_(std::move(command)), args_(std::move(args)) {
    dir_ = out_override.empty() ? fs::path(cfg.output_dir) / command_ : fs::path(out_override);
    fs::create_directories(dir_);
    config_text_ = to_json(cfg).dump(2) + "\n";
    delimited::write_atomic(dir_ / "config.json", config_text_);
  }

  const fs::path& dir() const { return dir_; }
  const RunConfig& config() const { return cfg_; }

  // Records an input file's digest; missing files are a usage error.
  fs::path input(const std::string& role, const std::string& path) {
    if (path.empty()) throw UsageError(command_ + " needs an input for '" + role + "'");
    if (!fs::exists(path)) throw UsageError("input '" + role + "' does not exist: " + path);
    inputs_[role] = {{"path", path}, {"sha256", file_sha256(path)}};
    return path;
  }

  void output(const std::string& name, const std::string& contents) {
    const fs::path p = dir_ / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    delimited::write_atomic(p, contents);
    outputs_[name] = sha256_hex(contents);
  }

  void finish() {
    delimited::write_atomic(dir_ / "inputs.json", inputs_.dump(2) + "\n");
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm{};
    ::gmtime_r(&now, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    const json manifest = {{"tool", "argq"},
                           {"version", kVersion},
                           {"command", command_},
                           {"arguments", args_},
                           {"config_sha256", sha256_hex(config_text_)},
                           {"inputs", inputs_},
                           {"outputs", outputs_},
                           {"created_utc", stamp}};
    delimited::write_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  RunConfig cfg_;
  std::string command_;
  std::vector<std::string> args_;
  fs::path dir_;
  std::string config_text_;
  json inputs_ = json::object();
  json outputs_ = json::object();
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Two-column whitespace-delimited plot data.
std::string plot_data(const std::vector<std::pair<double, double>>& rows) {
  std::string out;
  for (const auto& [x, y] : rows) out += fmt(x) + " " + fmt(y) + "\n";
  return out;
}

Corpus load_split(Run& run, Split split, LabelColumns labels = LabelColumns::required) {
  const auto& cfg = run.config();
  const auto path = run.input(to_string(split), cfg.data.path(split));
  return load_corpus(path, cfg.data.column_map, split, labels);
}

std::vector<Task> parse_tasks(const std::string& s) {
  if (s == "both") return {Task::validity, Task::novelty};
  return {parse_task(s)};
}

json stats_json(const std::map<Split, Corpus>& splits) {
  json out = {{"splits", json::object()}, {"topic_overlap", json::object()}};
  for (const auto& [split, corpus] : splits) {
    const auto d = class_distribution(corpus);
    out["splits"][to_string(split)] = {{"instances", corpus.size()},
                                       {"distribution", d.counts},
                                       {"topics", unique_topics(corpus).size()}};
  }
  for (auto a = splits.begin(); a != splits.end(); ++a)
    for (auto b = std::next(a); b != splits.end(); ++b)
      out["topic_overlap"][to_string(a->first) + "-" + to_string(b->first)] = topic_overlap(a->second, b->second);
  return out;
}

std::string stats_text(const std::map<Split, Corpus>& splits) {
  std::ostringstream o;
  o << "split  instances  -val-nov  -val+nov  +val-nov  +val+nov  topics\n";
  for (const auto& [split, corpus] : splits) {
    const auto d = class_distribution(corpus);
    char line[128];
    std::snprintf(line, sizeof line, "%-5s  %9zu  %8zu  %8zu  %8zu  %8zu  %6zu\n", to_string(split).c_str(),
                  corpus.size(), d.counts[0], d.counts[1], d.counts[2], d.counts[3], unique_topics(corpus).size());
    o << line;
  }
  for (auto a = splits.begin(); a != splits.end(); ++a)
    for (auto b = std::next(a); b != splits.end(); ++b)
      o << "topic overlap " << to_string(a->first) << "-" << to_string(b->first) << ": "
        << topic_overlap(a->second, b->second) << "\n";
  return o.str();
}

std::string triplets_csv(const std::vector<TripletExample>& ts) {
  std::string out = delimited::format_row({"anchor", "positive", "negative", "topic"});
  for (const auto& t : ts) out += delimited::format_row({t.anchor, t.positive, t.negative, t.topic});
  return out;
}

ContrastiveResult run_contrastive(Run& run, ReferenceEncoder& encoder, const Corpus& train) {
  const auto triplets = extract_triplets(train);
  const auto result = contrastive_train(encoder, triplets, run.config().contrastive);
  std::vector<std::pair<double, double>> rows;
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) rows.emplace_back(e, result.epoch_loss[e]);
  run.output("contrastive.json", to_json(result).dump(2) + "\n");
  run.output("contrastive_loss.dat", plot_data(rows));
  return result;
}

Encoder build_encoder(Run& run, const std::string& encoder_checkpoint) {
  PretrainedDescriptor d = run.config().encoder;
  if (!encoder_checkpoint.empty()) d.checkpoint = encoder_checkpoint;
  if (!d.checkpoint.empty()) run.input("encoder", d.checkpoint);
  return load_pretrained(d);
}

struct Trained {
  MtlModel model;
  TrainResult result;
};

// Optional contrastive stage, then multi-task training with dev selection.
Trained train_model(Run& run, const RunConfig& cfg, const Corpus& train_set, const Corpus& dev_set,
                    const std::string& encoder_checkpoint, bool write_stage_outputs) {
  Encoder encoder = build_encoder(run, encoder_checkpoint);
  if (cfg.contrastive_enabled) {
    if (!encoder.trainable()) throw ConfigError("contrastive stage needs the reference encoder");
    if (write_stage_outputs) run_contrastive(run, encoder.reference(), train_set);
    else contrastive_train(encoder.reference(), extract_triplets(train_set), cfg.contrastive);
  }
  MtlModel model(std::move(encoder), cfg.train.seed, "mtl");
  if (!model.encoder().trainable()) model.set_encoder_source(cfg.encoder);
  auto result = train(model, train_set, dev_set, cfg.train);
  return {std::move(model), std::move(result)};
}

void write_history(Run& run, const TrainResult& r, const std::string& prefix = "") {
  std::vector<std::pair<double, double>> loss, f1;
  for (const auto& h : r.history) {
    loss.emplace_back(h.epoch, h.train_loss);
    f1.emplace_back(h.epoch, h.dev_combined_f1);
  }
  json hist = {{"best_epoch", r.best_epoch}, {"history", r.history}};
  run.output(prefix + "history.json", hist.dump(2) + "\n");
  run.output(prefix + "train_loss.dat", plot_data(loss));
  run.output(prefix + "dev_f1.dat", plot_data(f1));
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_prepare_data(Run& run) {
  std::map<Split, Corpus> splits;
  for (Split s : {Split::train, Split::dev, Split::test})
    if (!run.config().data.path(s).empty()) splits[s] = load_split(run, s);
  if (splits.empty()) throw UsageError("prepare-data needs at least one of data.train, data.dev, data.test");
  run.output("data_stats.json", stats_json(splits).dump(2) + "\n");
  const auto text = stats_text(splits);
  run.output("data_stats.txt", text);
  if (splits.count(Split::train)) run.output("triplets.csv", triplets_csv(extract_triplets(splits[Split::train])));
  std::cout << text;
}

void cmd_contrastive_train(Run& run) {
  const auto train_set = load_split(run, Split::train);
  Encoder encoder = build_encoder(run, "");
  if (!encoder.trainable()) throw ConfigError("contrastive-train needs the reference encoder backend");
  const auto r = run_contrastive(run, encoder.reference(), train_set);
  run.output("encoder.json", encoder.reference().to_json().dump() + "\n");
  std::cout << "triplet loss " << fmt(r.initial_loss) << " -> " << fmt(r.final_loss) << "\n";
}

void cmd_train(Run& run, const std::string& encoder_checkpoint) {
  const auto train_set = load_split(run, Split::train);
  const auto dev_set = load_split(run, Split::dev);
  auto t = train_model(run, run.config(), train_set, dev_set, encoder_checkpoint, true);
  run.output("model.json", checkpoint_json(t.model, run.config().train, t.result).dump(1) + "\n");
  write_history(run, t.result);
  const auto& best = t.result.history[t.result.best_epoch];
  std::cout << "best epoch " << best.epoch << "  dev " << run.config().combined_metric << " "
            << fmt(best.dev_combined_f1) << "  validity " << fmt(best.dev_validity_f1) << "  novelty "
            << fmt(best.dev_novelty_f1) << "\n";
}

void cmd_predict(Run& run, const std::string& model_path, Split split, const std::string& tasks,
                 const std::string& name) {
  auto ckpt = load_checkpoint(run.input("model", model_path));
  if (!name.empty()) ckpt.model.set_name(name);
  const auto instances = load_split(run, split, LabelColumns::optional);
  std::vector<Prediction> rows;
  for (Task t : parse_tasks(tasks)) {
    const auto preds = predict(ckpt.model, instances, t);
    rows.insert(rows.end(), preds.rows().begin(), preds.rows().end());
  }
  run.output("predictions.csv", format_predictions(PredictionSet(std::move(rows))));
}

void cmd_prompt_predict(Run& run, const std::string& tasks, Split split) {
  const auto& cfg = run.config();
  const auto train_set = load_split(run, Split::train);
  const auto instances = load_split(run, split, LabelColumns::optional);
  fs::create_directories(cfg.prompt.cache_dir);
  ReplayCache cache(cfg.prompt.cache_dir);
  auto provider = make_provider(cfg.prompt);
  ClassifyOptions opts;
  opts.source = cfg.prompt.source;
  opts.request_template.model_id = cfg.prompt.model_id;
  opts.request_template.max_tokens = cfg.prompt.max_tokens;
  opts.parallelism = cfg.prompt.parallelism;
  opts.requests_per_second = cfg.prompt.requests_per_second;
  std::vector<Prediction> rows;
  json shots = json::object();
  for (Task t : parse_tasks(tasks)) {
    const auto few = select_few_shot(train_set, t);
    std::vector<std::string> ids;
    for (const auto& e : few.examples) ids.push_back(e.id);
    shots[to_string(t)] = ids;
    if (!instances.empty()) run.output("prompt_example_" + to_string(t) + ".txt", build_prompt(few, instances[0], t));
    const auto preds = classify(instances, few, t, *provider, cache, opts);
    for (const auto& p : preds.rows()) rows.push_back(p);
    std::cout << to_string(t) << ": " << preds.size() << " predictions, " << preds.flagged_count(t)
              << " flagged\n";
  }
  run.output("few_shot.json", json{{"template_version", kPromptTemplateVersion}, {"examples", shots}}.dump(2) + "\n");
  run.output("predictions.csv", format_predictions(PredictionSet(std::move(rows))));
}

void cmd_baseline(Run& run, Split split) {
  const auto train_set = load_split(run, Split::train);
  const auto instances = load_split(run, split, LabelColumns::optional);
  const auto model = train_baseline(train_set, run.config().baseline);
  run.output("baseline.json", to_json(model).dump() + "\n");
  run.output("predictions.csv", format_predictions(baseline_predict_all(model, instances)));
  std::cout << "objective validity " << fmt(model.validity.objective) << "  novelty " << fmt(model.novelty.objective)
            << "\n";
}

void cmd_mix(Run& run, const std::string& validity, const std::string& novelty) {
  const auto a = load_predictions(run.input("validity", validity));
  const auto b = load_predictions(run.input("novelty", novelty));
  const auto m = mix(a, b);
  run.output("predictions.csv", format_predictions(m));
  std::cout << m.name() << ": " << m.size() << " predictions\n";
}

void cmd_evaluate(Run& run, const std::string& predictions, Split split) {
  const auto preds = load_predictions(run.input("predictions", predictions));
  const auto golds = load_split(run, split);
  const auto report = evaluate(preds, golds, run.config().combined_metric, run.config().top_k_topics);
  run.output("report.json", to_json(report).dump(2) + "\n");
  const auto text = to_text(report);
  run.output("report.txt", text);
  std::cout << text;
}

void cmd_report(Run& run, const std::vector<std::string>& reports) {
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof line, "%-32s %-20s %9s %9s %9s\n", "predictions", "combined metric", "combined",
                "validity", "novelty");
  table << line;
  json summary = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    json j;
    try {
      j = json::parse(delimited::read_file(run.input("report" + std::to_string(i), reports[i])));
    } catch (const json::exception& e) {
      throw ParseError("report '" + reports[i] + "' is not valid JSON: " + e.what());
    }
    const auto r = report_from_json(j);
    const double v = task_report(r, Task::validity).macro_f1, n = task_report(r, Task::novelty).macro_f1;
    std::snprintf(line, sizeof line, "%-32s %-20s %9.3f %9.3f %9.3f\n", r.name.c_str(), r.combined_metric.c_str(),
                  r.combined, v, n);
    table << line;
    summary.push_back({{"report", reports[i]},
                       {"name", r.name},
                       {"combined_metric", r.combined_metric},
                       {"combined", r.combined},
                       {"validity_macro_f1", v},
                       {"novelty_macro_f1", n}});
  }
  run.output("summary.json", summary.dump(2) + "\n");
  run.output("summary.txt", table.str());
  std::cout << table.str();
}

void cmd_seed_sweep(Run& run, std::size_t runs) {
  const auto& cfg = run.config();
  if (runs < 1) throw UsageError("seed-sweep needs --runs >= 1");
  const auto train_set = load_split(run, Split::train);
  const auto dev_set = load_split(run, Split::dev);
  if (!cfg.encoder.checkpoint.empty()) run.input("encoder", cfg.encoder.checkpoint);
  std::vector<SeedRun> results(runs);
  std::vector<std::exception_ptr> errors(runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < runs;) {
      try {
        const auto seeded = with_seed(cfg, cfg.seed + i);
        Encoder encoder = load_pretrained(seeded.encoder);
        if (seeded.contrastive_enabled)
          contrastive_train(encoder.reference(), extract_triplets(train_set), seeded.contrastive);
        MtlModel model(std::move(encoder), seeded.train.seed, "mtl");
        const auto r = train(model, train_set, dev_set, seeded.train);
        results[i] = {seeded.seed, r.history, r.history[r.best_epoch].dev_combined_f1};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(cfg.sweep_parallelism, runs); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  json per_seed = json::array();
  for (const auto& r : results) {
    TrainResult tr{r.history, select_best(r.history)};
    write_history(run, tr, "seed-" + std::to_string(r.seed) + "/");
    per_seed.push_back({{"seed", r.seed}, {"final_combined_f1", r.final_combined_f1}});
  }
  json summary;
  std::vector<std::pair<double, double>> mean_loss;
  if (runs >= 2) {
    const auto s = seed_summary(results);
    summary = to_json(s);
    for (const auto& e : s.loss) mean_loss.emplace_back(e.epoch, e.mean);
  } else {
    summary = {{"runs", 1}, {"mean_combined_f1", results[0].final_combined_f1}, {"std_combined_f1", nullptr}};
    for (const auto& h : results[0].history) mean_loss.emplace_back(h.epoch, h.train_loss);
  }
  summary["combined_metric"] = cfg.combined_metric;
  summary["per_seed"] = per_seed;
  run.output("seed_summary.json", summary.dump(2) + "\n");
  run.output("loss_mean.dat", plot_data(mean_loss));
  std::cout << "seeds " << cfg.seed << ".." << cfg.seed + runs - 1 << "  mean " << fmt(summary["mean_combined_f1"])
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"argq: argument validity and novelty pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "run directory (default <output_dir>/<subcommand>)");
    sub->add_option("--seed", seed, "override every seed in the configuration");
  };

  auto* prepare = app.add_subcommand("prepare-data", "split statistics, topic overlap and triplets");
  common(prepare);

  auto* contrastive = app.add_subcommand("contrastive-train", "triplet-loss stage on the training split");
  common(contrastive);

  std::string encoder_checkpoint, profile;
  auto* train_cmd = app.add_subcommand("train", "multi-task training with dev-based model selection");
  common(train_cmd);
  train_cmd->add_option("--encoder-checkpoint", encoder_checkpoint, "start from a saved encoder");
  train_cmd->add_option("--profile", profile, "hyperparameter profile (clteaml-2, clteaml-4)");

  std::string model_path, tasks = "both", split_name = "test", name;
  auto* predict_cmd = app.add_subcommand("predict", "label a split with a trained model");
  common(predict_cmd);
  predict_cmd->add_option("--model", model_path, "model checkpoint")->required();
  predict_cmd->add_option("--split", split_name, "train, dev or test");
  predict_cmd->add_option("--task", tasks, "validity, novelty or both");
  predict_cmd->add_option("--name", name, "source name written into predictions");

  std::string provider;
  std::string cache_dir;
  auto* prompt_cmd = app.add_subcommand("prompt-predict", "few-shot prompting through the replay cache");
  common(prompt_cmd);
  prompt_cmd->add_option("--task", tasks, "validity, novelty or both");
  prompt_cmd->add_option("--split", split_name, "train, dev or test");
  prompt_cmd->add_option("--provider", provider, "mock, replay-only or http-openai-compatible");
  prompt_cmd->add_option("--cache", cache_dir, "replay cache directory");

  auto* baseline_cmd = app.add_subcommand("baseline", "TF-IDF + linear SVM per task");
  common(baseline_cmd);
  baseline_cmd->add_option("--split", split_name, "split to label");

  std::string validity_file, novelty_file;
  auto* mix_cmd = app.add_subcommand("mix", "take validity and novelty labels from different files");
  common(mix_cmd);
  mix_cmd->add_option("--validity", validity_file, "predictions supplying validity")->required();
  mix_cmd->add_option("--novelty", novelty_file, "predictions supplying novelty")->required();

  std::string predictions_file, metric;
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold labels");
  common(eval_cmd);
  eval_cmd->add_option("--predictions", predictions_file, "predictions file")->required();
  eval_cmd->add_option("--split", split_name, "gold split");
  eval_cmd->add_option("--metric", metric, "combined metric key");

  std::vector<std::string> report_files;
  auto* report_cmd = app.add_subcommand("report", "tabulate evaluation reports");
  common(report_cmd);
  report_cmd->add_option("reports", report_files, "report.json files")->required();

  std::size_t runs = 0;
  auto* sweep_cmd = app.add_subcommand("seed-sweep", "train with seeds seed..seed+N-1 and summarize");
  common(sweep_cmd);
  sweep_cmd->add_option("--runs", runs, "number of seeds (default: config seeds)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? run_config_from_json(json::object()) : load_run_config(config_path);
    if (seed) cfg = with_seed(cfg, *seed);
    if (!profile.empty()) {
      const auto keep = cfg.train;
      cfg.train = TrainConfig::profile(profile);
      cfg.train.batch_size = keep.batch_size;
      cfg.train.seed = keep.seed;
      cfg.train.task_probabilities = keep.task_probabilities;
      cfg.train.weight_decay = keep.weight_decay;
      cfg.train.combined_metric = keep.combined_metric;
      cfg.train_profile = profile;
    }
    if (!metric.empty()) cfg.combined_metric = cfg.train.combined_metric = metric;
    if (!provider.empty()) cfg.prompt.provider = provider;
    if (!cache_dir.empty()) cfg.prompt.cache_dir = cache_dir;
    cfg.validate();

    auto* sub = app.get_subcommands().front();
    Run run(cfg, sub->get_name(), out_dir, std::vector<std::string>(argv + 1, argv + argc));
    const Split split = parse_split(split_name);
    if (sub == prepare) cmd_prepare_data(run);
    else if (sub == contrastive) cmd_contrastive_train(run);
    else if (sub == train_cmd) cmd_train(run, encoder_checkpoint);
    else if (sub == predict_cmd) cmd_predict(run, model_path, split, tasks, name);
    else if (sub == prompt_cmd) cmd_prompt_predict(run, tasks, split);
    else if (sub == baseline_cmd) cmd_baseline(run, split);
    else if (sub == mix_cmd) cmd_mix(run, validity_file, novelty_file);
    else if (sub == eval_cmd) cmd_evaluate(run, predictions_file, split);
    else if (sub == report_cmd) cmd_report(run, report_files);
    else if (sub == sweep_cmd) cmd_seed_sweep(run, runs ? runs : cfg.seeds);
    run.finish();
    return 0;
  } catch (const argq::Error& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << e.category() << ": " << msg << "\n";
    return e.category() == "usage" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
