#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include "argq/encoder.hpp"
#include "argq/optim.hpp"
#include "argq/pretrained.hpp"
#include "argq/random.hpp"

using namespace argq;

namespace {

ReferenceEncoder toy_encoder() {
  ReferenceEncoder enc(EncoderConfig{1, 2, 2, 0});
  enc.embedding().value = {0.5, -1.0};
  enc.projection_weight().value = {1.0, 2.0, -1.0, 0.5};
  enc.projection_bias().value = {0.1, -0.2};
  return enc;
}

// Scalar test loss: sum_p c_p * output_p.
double weighted_sum(const Vector& out, const Vector& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += c[i] * out[i];
  return s;
}

}  // namespace

TEST(Tokenize, SplitsAndNormalizes) {
  EXPECT_EQ(tokenize("Hello, World!  \"Quoted\" (x)"),
            (std::vector<std::string>{"hello", "world", "quoted", "x"}));
  EXPECT_EQ(tokenize("don't stop"), (std::vector<std::string>{"don't", "stop"}));
  EXPECT_TRUE(tokenize("  ... !!! ").empty());
  EXPECT_TRUE(tokenize("").empty());
  // U+00A0 no-break space separates; U+2014 em dash is stripped at the edges.
  EXPECT_EQ(tokenize("a\xC2\xA0" "b \xE2\x80\x94" "c"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(ReferenceEncoder, ToyForwardMatchesHandComputation) {
  const auto y = toy_encoder().encode(std::string_view("anything at all"));
  ASSERT_EQ(y.size(), 2u);
  // tanh(-1.4), tanh(-1.2)
  EXPECT_NEAR(y[0], -0.8853516482022625, 1e-12);
  EXPECT_NEAR(y[1], -0.8336546070121552, 1e-12);
}

TEST(ReferenceEncoder, EmptyTextEncodesBiasOnly) {
  const auto y = toy_encoder().encode(std::string_view(""));
  EXPECT_NEAR(y[0], std::tanh(0.1), 1e-15);
  EXPECT_NEAR(y[1], std::tanh(-0.2), 1e-15);
}

TEST(ReferenceEncoder, DeterministicPerSeedAndBounded) {
  EncoderConfig c{512, 8, 6, 42};
  ReferenceEncoder a(c), b(c);
  c.seed = 43;
  ReferenceEncoder other(c);
  const auto ya = a.encode(std::string_view("the premise supports the conclusion"));
  EXPECT_EQ(ya, b.encode(std::string_view("the premise supports the conclusion")));
  EXPECT_NE(ya, other.encode(std::string_view("the premise supports the conclusion")));
  for (double v : ya) EXPECT_LE(std::abs(v), 1.0);
}

TEST(ReferenceEncoder, InvalidConfigRejected) {
  EXPECT_THROW(ReferenceEncoder(EncoderConfig{0, 4, 4, 0}), ConfigError);
  EXPECT_THROW(ReferenceEncoder(EncoderConfig{8, 0, 4, 0}), ConfigError);
  EXPECT_THROW(ReferenceEncoder(EncoderConfig{8, 4, 0, 0}), ConfigError);
}

TEST(ReferenceEncoder, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    ReferenceEncoder enc(EncoderConfig{16, 1 + rng.below(8), 1 + rng.below(8), trial + 100ull});
    const std::string text = "alpha beta gamma alpha delta " + std::to_string(trial);
    Vector c(enc.dim());
    for (double& x : c) x = rng.normal(0.0, 1.0);
    const auto t = enc.trace(text);
    for (Param* p : enc.params()) p->zero_grad();
    enc.backward(t, c);
    for (Param* p : enc.params()) {
      for (std::size_t i = 0; i < p->size(); ++i) {
        const double h = 1e-6, saved = p->value[i];
        p->value[i] = saved + h;
        const double up = weighted_sum(enc.encode(std::string_view(text)), c);
        p->value[i] = saved - h;
        const double down = weighted_sum(enc.encode(std::string_view(text)), c);
        p->value[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double an = p->grad[i];
        EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd))) << p->name << "[" << i << "]";
      }
    }
  }
}

TEST(ReferenceEncoder, JsonRoundTripIsExact) {
  ReferenceEncoder enc(EncoderConfig{64, 4, 3, 5});
  const auto back = ReferenceEncoder::from_json(nlohmann::json::parse(enc.to_json().dump()));
  EXPECT_EQ(back.embedding().value, enc.embedding().value);
  EXPECT_EQ(back.projection_weight().value, enc.projection_weight().value);
  EXPECT_EQ(back.encode(std::string_view("x y z")), enc.encode(std::string_view("x y z")));
}

TEST(ReferenceEncoder, FromJsonRejectsWrongTensorSize) {
  auto j = ReferenceEncoder(EncoderConfig{8, 2, 2, 0}).to_json();
  j["projection_bias"] = std::vector<double>{1.0};
  EXPECT_THROW(ReferenceEncoder::from_json(j), ConfigError);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  Param p("p", 2);
  p.value = {1.0, -2.0};
  p.grad = {0.5, -0.25};
  p.touched = true;
  AdamW opt(AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
  Param* ps[] = {&p};
  opt.step(ps);
  // Bias-corrected first step: m_hat = g, v_hat = g^2.
  EXPECT_NEAR(p.value[0], 1.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], -2.0 * (1 - 0.1 * 0.01) + 0.1 * 0.25 / (0.25 + 1e-8), 1e-15);
}

TEST(AdamW, UntouchedParamsUnchangedEvenWithDecay) {
  Param a("a", 3), b("b", 3);
  a.value = b.value = {1.0, 2.0, 3.0};
  a.grad = {1.0, 1.0, 1.0};
  a.touched = true;
  AdamW opt(AdamWConfig{0.01, 0.9, 0.999, 1e-8, 0.5});
  Param* ps[] = {&a, &b};
  opt.step(ps);
  EXPECT_EQ(b.value, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_NE(a.value, (std::vector<double>{1.0, 2.0, 3.0}));
  zero_grads(ps);
  EXPECT_FALSE(a.touched);
  EXPECT_EQ(a.grad, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(AdamW, MinimizesQuadratic) {
  Param p("p", 1);
  p.value = {5.0};
  AdamW opt(AdamWConfig{0.05, 0.9, 0.999, 1e-8, 0.0});
  Param* ps[] = {&p};
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    p.grad[0] = 2.0 * (p.value[0] - 1.5);
    p.touched = true;
    opt.step(ps);
  }
  EXPECT_NEAR(p.value[0], 1.5, 1e-2);
}

TEST(Pretrained, ReferenceFreshAndCheckpoint) {
  PretrainedDescriptor d;
  d.config = EncoderConfig{32, 4, 5, 9};
  auto fresh = load_pretrained(d, 5);
  EXPECT_TRUE(fresh.trainable());
  EXPECT_EQ(fresh.dim(), 5u);
  EXPECT_THROW(load_pretrained(d, 7), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "argq-test-encoder.json";
  nlohmann::json wrapped = {{"encoder", fresh.reference().to_json()}};
  delimited::write_atomic(path, wrapped.dump());
  PretrainedDescriptor from_file;
  from_file.checkpoint = path.string();
  auto loaded = load_pretrained(from_file, 5);
  const std::string texts[] = {"one two"};
  EXPECT_EQ(loaded.encode(texts), fresh.encode(texts));
  std::filesystem::remove(path);
}

TEST(Pretrained, UnknownBackendAndMissingEndpoint) {
  PretrainedDescriptor d;
  d.backend = "roberta";
  EXPECT_THROW(load_pretrained(d), ConfigError);
  d.backend = "external";
  EXPECT_THROW(load_pretrained(d), ConfigError);
}

TEST(Pretrained, SubprocessEncoderFrozenAndDimChecked) {
  PretrainedDescriptor d;
  d.backend = "external";
  d.command = "awk '{print length($0), 1, -0.5}'";
  auto enc = load_pretrained(d, 3);
  EXPECT_FALSE(enc.trainable());
  EXPECT_EQ(enc.dim(), 3u);
  const std::string texts[] = {"abc", "hello\nworld"};
  const auto v = enc.encode(texts);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (Vector{3, 1, -0.5}));
  EXPECT_EQ(v[1][0], 11);  // newline flattened to a space
  try {
    load_pretrained(d, 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder produces 3, heads expect 4"), std::string::npos);
  }
  d.command = "sh -c 'exit 3'";
  EXPECT_THROW(load_pretrained(d), ConfigError);
}

TEST(Pretrained, HttpEncoderAgainstLocalServer) {
  httplib::Server server;
  server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    res.set_content(nlohmann::json(std::vector<double>{static_cast<double>(req.body.size()), 0.25}).dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  PretrainedDescriptor d;
  d.backend = "external";
  d.url = "http://127.0.0.1:" + std::to_string(port) + "/embed";
  auto enc = load_pretrained(d, 2);
  const std::string texts[] = {"four", "sixsix"};
  const auto v = enc.encode(texts);
  EXPECT_EQ(v[0], (Vector{4, 0.25}));
  EXPECT_EQ(v[1], (Vector{6, 0.25}));
  EXPECT_THROW(load_pretrained(d, 8), ConfigError);
  server.stop();
  t.join();

  d.timeout_seconds = 0.5;
  EXPECT_THROW(load_pretrained(d), ConfigError);  // server gone
}
