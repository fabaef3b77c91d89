#pragma once

// Encoder initialization from a named checkpoint descriptor. The "reference"
// backend builds (or reloads) the in-process encoder; the "external" backend
// talks to an out-of-process encoder, which is how intermediate-task
// initialized models (NLI, argument relation) plug in without in-process
// model code.
//
// External protocol:
//   subprocess: one UTF-8 text per stdin line; one line of space-separated
//               decimals per text on stdout, in order.
//   http:       POST <url> with the text as the body (text/plain); the
//               response body is a JSON array of numbers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "argq/common.hpp"
#include "argq/delimited.hpp"
#include "argq/encoder.hpp"
#include "httplib.h"
#include "json.hpp"

namespace argq {

struct PretrainedDescriptor {
  std::string backend = "reference";  // "reference" | "external"
  EncoderConfig config;               // reference: fresh-init config
  std::string checkpoint;             // reference: optional weights file
  std::string command;                // external: subprocess command line
  std::string url;                    // external: HTTP endpoint
  double timeout_seconds = 10.0;
};

inline void to_json(nlohmann::json& j, const PretrainedDescriptor& d) {
  j = {{"backend", d.backend}, {"config", d.config}, {"checkpoint", d.checkpoint},
       {"command", d.command}, {"url", d.url}, {"timeout_seconds", d.timeout_seconds}};
}

inline void from_json(const nlohmann::json& j, PretrainedDescriptor& d) {
  d.backend = j.value("backend", d.backend);
  if (j.contains("config")) d.config = j.at("config").get<EncoderConfig>();
  d.checkpoint = j.value("checkpoint", d.checkpoint);
  d.command = j.value("command", d.command);
  d.url = j.value("url", d.url);
  d.timeout_seconds = j.value("timeout_seconds", d.timeout_seconds);
}

namespace detail {

inline Vector parse_vector_line(const std::string& line) {
  Vector v;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    double x = std::strtod(tok.c_str(), &end);
    if (*end != '\0' || !std::isfinite(x))
      throw ConfigError("external encoder returned non-numeric value '" + tok + "'");
    v.push_back(x);
  }
  return v;
}

inline std::string single_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

}  // namespace detail

class SubprocessEncoder final : public FeatureSource {
 public:
  SubprocessEncoder(std::string command, std::size_t dim) : command_(std::move(command)), dim_(dim) {}

  std::vector<Vector> encode(std::span<const std::string> texts) const override {
    namespace fs = std::filesystem;
    if (texts.empty()) return {};
    std::string payload;
    for (const auto& t : texts) payload += detail::single_line(t) + "\n";
    const fs::path input = fs::temp_directory_path() /
                           ("argq-encoder-" + std::to_string(::getpid()) + "-" +
                            std::to_string(fnv1a64(payload)) + ".txt");
    delimited::write_atomic(input, payload);
    const std::string cmd = command_ + " < '" + input.string() + "' 2>/dev/null";
    std::FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
      fs::remove(input);
      throw ConfigError("cannot start external encoder '" + command_ + "'");
    }
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = ::pclose(pipe);
    fs::remove(input);
    if (status != 0)
      throw ConfigError("external encoder '" + command_ + "' exited with status " + std::to_string(status));
    std::vector<Vector> vectors;
    std::istringstream lines(out);
    std::string line;
    while (std::getline(lines, line)) {
      if (trim(line).empty()) continue;
      vectors.push_back(detail::parse_vector_line(line));
    }
    if (vectors.size() != texts.size())
      throw ConfigError("external encoder returned " + std::to_string(vectors.size()) + " vectors for " +
                        std::to_string(texts.size()) + " texts");
    check_dims(vectors);
    return vectors;
  }

  std::size_t dim() const override { return dim_; }
  std::string describe() const override { return "external:subprocess:" + command_; }

 private:
  void check_dims(const std::vector<Vector>& vs) const {
    for (const auto& v : vs)
      if (dim_ != 0 && v.size() != dim_)
        throw ConfigError("external encoder dimension mismatch: got " + std::to_string(v.size()) +
                          ", configured heads expect " + std::to_string(dim_));
  }

  std::string command_;
  std::size_t dim_;
};

class HttpEncoder final : public FeatureSource {
 public:
  HttpEncoder(std::string url, std::size_t dim, double timeout_seconds)
      : url_(std::move(url)), dim_(dim), timeout_(timeout_seconds) {
    const auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("external encoder url '" + url_ + "' has no scheme");
    const auto path_start = url_.find('/', scheme_end + 3);
    origin_ = url_.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
  }

  std::vector<Vector> encode(std::span<const std::string> texts) const override {
    httplib::Client client(origin_);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
      auto res = client.Post(path_, text, "text/plain; charset=utf-8");
      if (!res)
        throw ConfigError("external encoder at '" + url_ + "' unreachable: " + httplib::to_string(res.error()));
      if (res->status != 200)
        throw ConfigError("external encoder at '" + url_ + "' returned HTTP " + std::to_string(res->status));
      Vector v;
      try {
        v = nlohmann::json::parse(res->body).get<Vector>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("external encoder at '" + url_ + "' returned a body that is not a JSON number array");
      }
      if (dim_ != 0 && v.size() != dim_)
        throw ConfigError("external encoder dimension mismatch: got " + std::to_string(v.size()) +
                          ", configured heads expect " + std::to_string(dim_));
      out.push_back(std::move(v));
    }
    return out;
  }

  std::size_t dim() const override { return dim_; }
  std::string describe() const override { return "external:http:" + url_; }

 private:
  std::string url_, origin_, path_;
  std::size_t dim_;
  double timeout_;
};

inline ReferenceEncoder load_reference_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(delimited::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("encoder checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  // Accept a bare encoder blob or a full model checkpoint.
  if (j.contains("encoder")) j = j.at("encoder");
  return ReferenceEncoder::from_json(j);
}

// `expected_dim` is the input width of the configured task heads; 0 skips the
// check. External backends are probed once so misconfiguration fails here
// instead of mid-training.
inline Encoder load_pretrained(const PretrainedDescriptor& d, std::size_t expected_dim = 0) {
  auto mismatch = [&](std::size_t got) {
    return ConfigError("encoder dimension mismatch: encoder produces " + std::to_string(got) +
                       ", heads expect " + std::to_string(expected_dim));
  };
  if (d.backend == "reference") {
    ReferenceEncoder enc = d.checkpoint.empty() ? ReferenceEncoder(d.config)
                                                : load_reference_checkpoint(d.checkpoint);
    if (expected_dim != 0 && enc.dim() != expected_dim) throw mismatch(enc.dim());
    return Encoder(std::move(enc));
  }
  if (d.backend == "external") {
    std::shared_ptr<FeatureSource> source;
    if (!d.command.empty()) source = std::make_shared<SubprocessEncoder>(d.command, 0);
    else if (!d.url.empty()) source = std::make_shared<HttpEncoder>(d.url, 0, d.timeout_seconds);
    else throw ConfigError("external encoder needs 'command' or 'url'");
    const std::string probe[] = {"probe"};
    const auto v = source->encode(probe);
    const std::size_t got = v.at(0).size();
    if (got == 0) throw ConfigError("external encoder returned an empty vector");
    if (expected_dim != 0 && got != expected_dim) throw mismatch(got);
    if (!d.command.empty()) return Encoder(std::make_shared<const SubprocessEncoder>(d.command, got));
    return Encoder(std::make_shared<const HttpEncoder>(d.url, got, d.timeout_seconds));
  }
  throw ConfigError("unknown encoder backend '" + d.backend + "' (expected reference or external)");
}

}  // namespace argq
