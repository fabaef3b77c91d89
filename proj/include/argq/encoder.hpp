#pragma once

// Text encoder contract and the reference trainable implementation:
// hashed bag of tokens -> embedding lookup -> mean pool -> affine -> tanh.

#include <cmath>
#include <cstdint>
#include <cctype>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "argq/common.hpp"
#include "argq/optim.hpp"
#include "argq/random.hpp"
#include "json.hpp"

namespace argq {

using Vector = std::vector<double>;

namespace detail {

// Byte length of a UTF-8 whitespace sequence starting at s[i], or 0.
inline std::size_t utf8_space(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char c = b(i);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
  if (c == 0xC2 && i + 1 < s.size() && (b(i + 1) == 0x85 || b(i + 1) == 0xA0)) return 2;
  if (i + 2 < s.size()) {
    const unsigned c1 = b(i + 1), c2 = b(i + 2);
    if (c == 0xE1 && c1 == 0x9A && c2 == 0x80) return 3;                 // U+1680
    if (c == 0xE2 && c1 == 0x80 && (c2 <= 0x8A || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF))
      return 3;                                                           // U+2000..200A, 2028, 2029, 202F
    if (c == 0xE2 && c1 == 0x81 && c2 == 0x9F) return 3;                 // U+205F
    if (c == 0xE3 && c1 == 0x80 && c2 == 0x80) return 3;                 // U+3000
  }
  return 0;
}

// Byte length of a punctuation sequence at the front (or back) of `s`.
inline std::size_t leading_punct(std::string_view s) {
  if (s.empty()) return 0;
  const unsigned char c = static_cast<unsigned char>(s[0]);
  if (c < 0x80) return std::ispunct(c) ? 1 : 0;
  // Typographic quotes, dashes and ellipsis (U+2010..2027).
  if (s.size() >= 3 && c == 0xE2 && static_cast<unsigned char>(s[1]) == 0x80 &&
      static_cast<unsigned char>(s[2]) >= 0x90 && static_cast<unsigned char>(s[2]) <= 0xA7)
    return 3;
  return 0;
}

inline std::size_t trailing_punct(std::string_view s) {
  if (s.empty()) return 0;
  const unsigned char c = static_cast<unsigned char>(s.back());
  if (c < 0x80) return std::ispunct(c) ? 1 : 0;
  if (s.size() >= 3 && leading_punct(s.substr(s.size() - 3)) == 3) return 3;
  return 0;
}

}  // namespace detail

// Lowercases ASCII, splits on Unicode whitespace and strips punctuation from
// both ends of each token. Tokens that are pure punctuation disappear.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t w;
    while (i < text.size() && (w = detail::utf8_space(text, i)) > 0) i += w;
    const std::size_t start = i;
    while (i < text.size() && detail::utf8_space(text, i) == 0) ++i;
    std::string_view tok = text.substr(start, i - start);
    while (std::size_t n = detail::leading_punct(tok)) tok.remove_prefix(n);
    while (std::size_t n = detail::trailing_punct(tok)) tok.remove_suffix(n);
    if (!tok.empty()) tokens.push_back(lowercase(tok));
  }
  return tokens;
}

struct EncoderConfig {
  std::size_t vocab_buckets = 4096;
  std::size_t embed_dim = 32;
  std::size_t projection_dim = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_buckets < 1 || embed_dim < 1 || projection_dim < 1)
      throw ConfigError("encoder dimensions must be >= 1");
  }
  bool operator==(const EncoderConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"vocab_buckets", c.vocab_buckets}, {"embed_dim", c.embed_dim},
       {"projection_dim", c.projection_dim}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.vocab_buckets = j.value("vocab_buckets", c.vocab_buckets);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  c.seed = j.value("seed", c.seed);
}

// Intermediate values of one forward pass, kept for backpropagation.
struct EncodeTrace {
  std::vector<std::uint32_t> buckets;
  Vector pooled;
  Vector output;
};

class ReferenceEncoder {
 public:
  explicit ReferenceEncoder(EncoderConfig config = {}) : config_(config) {
    config_.validate();
    const std::size_t V = config_.vocab_buckets, D = config_.embed_dim, P = config_.projection_dim;
    embedding_ = Param("encoder.embedding", V * D);
    weight_ = Param("encoder.projection.weight", P * D);
    bias_ = Param("encoder.projection.bias", P);
    Rng rng(config_.seed);
    for (double& x : embedding_.value) x = rng.normal(0.0, 1.0);
    const double bound = std::sqrt(6.0 / static_cast<double>(D + P));
    for (double& x : weight_.value) x = rng.uniform(-bound, bound);
  }

  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.projection_dim; }

  std::uint32_t bucket(std::string_view token) const {
    return static_cast<std::uint32_t>(fnv1a64(token) % config_.vocab_buckets);
  }

  EncodeTrace trace(std::string_view text) const {
    const std::size_t D = config_.embed_dim, P = config_.projection_dim;
    EncodeTrace t;
    for (const auto& tok : tokenize(text)) t.buckets.push_back(bucket(tok));
    t.pooled.assign(D, 0.0);
    if (!t.buckets.empty()) {
      for (auto b : t.buckets)
        for (std::size_t d = 0; d < D; ++d) t.pooled[d] += embedding_.value[b * D + d];
      const double inv = 1.0 / static_cast<double>(t.buckets.size());
      for (double& x : t.pooled) x *= inv;
    }
    t.output.assign(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      double z = bias_.value[p];
      for (std::size_t d = 0; d < D; ++d) z += weight_.value[p * D + d] * t.pooled[d];
      t.output[p] = std::tanh(z);
    }
    return t;
  }

  Vector encode(std::string_view text) const { return trace(text).output; }

  std::vector<Vector> encode(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode(t));
    return out;
  }

  // Accumulates d(loss)/d(params) given d(loss)/d(output) for one trace.
  void backward(const EncodeTrace& t, std::span<const double> grad_output) {
    const std::size_t D = config_.embed_dim, P = config_.projection_dim;
    Vector grad_pooled(D, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const double dz = grad_output[p] * (1.0 - t.output[p] * t.output[p]);
      if (dz == 0.0) continue;
      bias_.grad[p] += dz;
      for (std::size_t d = 0; d < D; ++d) {
        weight_.grad[p * D + d] += dz * t.pooled[d];
        grad_pooled[d] += dz * weight_.value[p * D + d];
      }
    }
    weight_.touched = bias_.touched = embedding_.touched = true;
    if (t.buckets.empty()) return;
    const double inv = 1.0 / static_cast<double>(t.buckets.size());
    for (auto b : t.buckets)
      for (std::size_t d = 0; d < D; ++d) embedding_.grad[b * D + d] += grad_pooled[d] * inv;
  }

  std::vector<Param*> params() { return {&embedding_, &weight_, &bias_}; }

  Param& embedding() { return embedding_; }
  Param& projection_weight() { return weight_; }
  Param& projection_bias() { return bias_; }
  const Param& embedding() const { return embedding_; }
  const Param& projection_weight() const { return weight_; }
  const Param& projection_bias() const { return bias_; }

  nlohmann::json to_json() const {
    return {{"config", config_},
            {"embedding", embedding_.value},
            {"projection_weight", weight_.value},
            {"projection_bias", bias_.value}};
  }

  static ReferenceEncoder from_json(const nlohmann::json& j) {
    ReferenceEncoder enc(j.at("config").get<EncoderConfig>());
    auto load = [&](const char* key, Param& p) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != p.size())
        throw ConfigError(std::string("encoder tensor '") + key + "' has " + std::to_string(v.size()) +
                          " values, expected " + std::to_string(p.size()));
      p.value = std::move(v);
    };
    load("embedding", enc.embedding_);
    load("projection_weight", enc.weight_);
    load("projection_bias", enc.bias_);
    return enc;
  }

 private:
  EncoderConfig config_;
  Param embedding_, weight_, bias_;
};

// Out-of-process feature source. Implementations are frozen: they produce
// embeddings but have no trainable parameters on this side of the boundary.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual std::vector<Vector> encode(std::span<const std::string> texts) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string describe() const = 0;
};

// The encoder handle the model owns: either the trainable reference encoder
// or a frozen external feature source.
class Encoder {
 public:
  Encoder() : reference_(std::in_place) {}
  explicit Encoder(ReferenceEncoder ref) : reference_(std::move(ref)) {}
  explicit Encoder(std::shared_ptr<const FeatureSource> ext) : external_(std::move(ext)) {}

  bool trainable() const { return reference_.has_value(); }
  std::size_t dim() const { return reference_ ? reference_->dim() : external_->dim(); }

  ReferenceEncoder& reference() { return *reference_; }
  const ReferenceEncoder& reference() const { return *reference_; }
  const FeatureSource& external() const { return *external_; }

  std::vector<Vector> encode(std::span<const std::string> texts) const {
    return reference_ ? reference_->encode(texts) : external_->encode(texts);
  }

  std::string describe() const { return reference_ ? "reference" : external_->describe(); }

 private:
  std::optional<ReferenceEncoder> reference_;
  std::shared_ptr<const FeatureSource> external_;
};

}  // namespace argq
