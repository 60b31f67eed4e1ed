#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ppgemo/error.hpp"
#include "ppgemo/model.hpp"

using namespace ppgemo;
using namespace ppgemo::model;

namespace {

Tensor noise_batch(std::size_t batch, std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({batch, len, 1});
  for (double& v : x.data()) v = standard_normal(rng);
  return x;
}

Shape trace_shape(const ShapeTrace& trace, const std::string& stage) {
  for (const auto& [name, shape] : trace) {
    if (name == stage) return shape;
  }
  FAIL("missing stage " << stage);
  return {};
}

}  // namespace

TEST_SUITE("model_zoo") {

TEST_CASE("default hybrid shape trace") {
  Model m = Model::build(ModelConfig{}, 1);
  Rng rng(2);
  ShapeTrace trace;
  const Tensor probs = m.forward(noise_batch(2, 6000, 3), Mode::train, rng, &trace);
  CHECK(trace_shape(trace, "conv1") == Shape{2, 1500, 8});
  CHECK(trace_shape(trace, "pool1") == Shape{2, 750, 8});
  CHECK(trace_shape(trace, "conv2") == Shape{2, 375, 16});
  CHECK(trace_shape(trace, "pool2") == Shape{2, 187, 16});
  CHECK(trace_shape(trace, "tcn") == Shape{2, 8});
  CHECK(trace_shape(trace, "lstm") == Shape{2, 12});
  CHECK(trace_shape(trace, "concat") == Shape{2, 20});
  CHECK(probs.shape() == Shape{2, 2});
  CHECK(m.head_input_width() == 20);
}

TEST_CASE("head has 20 x 2 weights plus 2 biases") {
  Model m = Model::build(ModelConfig{}, 1);
  std::size_t head = 0;
  for (auto* p : m.parameters()) {
    if (p->name.rfind("head.", 0) == 0) head += p->value.size();
  }
  CHECK(head == 42);
}

TEST_CASE("variants own only their branches") {
  for (auto v : {Variant::cnn, Variant::cnn_lstm, Variant::cnn_tcn_lstm}) {
    ModelConfig c;
    c.variant = v;
    Model m = Model::build(c, 1);
    bool has_tcn = false, has_lstm = false;
    for (auto* p : m.parameters()) {
      has_tcn = has_tcn || p->name.rfind("tcn", 0) == 0;
      has_lstm = has_lstm || p->name.rfind("lstm", 0) == 0;
    }
    CHECK(has_tcn == (v == Variant::cnn_tcn_lstm));
    CHECK(has_lstm == (v != Variant::cnn));
  }
  ModelConfig c;
  c.variant = Variant::cnn;
  CHECK(Model::build(c, 1).head_input_width() == 16);
  c.variant = Variant::cnn_lstm;
  CHECK(Model::build(c, 1).head_input_width() == 12);
}

TEST_CASE("trunk shapes are shared across variants") {
  std::vector<ShapeTrace> traces;
  for (auto v : {Variant::cnn, Variant::cnn_lstm, Variant::cnn_tcn_lstm}) {
    ModelConfig c = testing::small_model(v);
    Model m = Model::build(c, 5);
    Rng rng(6);
    ShapeTrace t;
    const Tensor p = m.forward(noise_batch(3, 600, 7), Mode::train, rng, &t);
    CHECK(p.shape() == Shape{3, 2});
    traces.push_back(t);
  }
  for (const char* stage : {"conv1", "pool1", "bn1", "conv2", "pool2", "bn2", "drop2"}) {
    CHECK(trace_shape(traces[0], stage) == trace_shape(traces[2], stage));
    CHECK(trace_shape(traces[1], stage) == trace_shape(traces[2], stage));
  }
}

TEST_CASE("output rows are probability distributions") {
  for (auto v : {Variant::cnn, Variant::cnn_lstm, Variant::cnn_tcn_lstm}) {
    Model m = Model::build(testing::small_model(v), 11);
    Rng rng(12);
    const Tensor p = m.forward(noise_batch(8, 600, 13), Mode::train, rng);
    for (std::size_t r = 0; r < 8; ++r) {
      CHECK(std::abs(p.at(r, 0) + p.at(r, 1) - 1.0) <= 1e-12);
      CHECK(p.at(r, 0) >= 0.0);
      CHECK(p.at(r, 1) >= 0.0);
    }
  }
}

TEST_CASE("inference is deterministic and leaves the model untouched") {
  Model m = Model::build(testing::small_model(), 21);
  Rng rng(22);
  m.forward(noise_batch(4, 600, 23), Mode::train, rng);
  const Tensor x = noise_batch(5, 600, 24);
  const Tensor a = m.predict(x);
  const Tensor b = m.predict(x, 2);
  CHECK(a.values() == b.values());
  Rng r1(1), r2(999);
  CHECK(m.forward(x, Mode::infer, r1).values() == a.values());
  CHECK(m.forward(x, Mode::infer, r2).values() == a.values());
}

TEST_CASE("same seed builds identical models") {
  Model a = Model::build(testing::small_model(), 31);
  Model b = Model::build(testing::small_model(), 31);
  Model c = Model::build(testing::small_model(), 32);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json() != c.to_json());
}

TEST_CASE("wrong input shape names the model input") {
  Model m = Model::build(testing::small_model(), 1);
  Rng rng(1);
  try {
    m.forward(Tensor({2, 599, 1}), Mode::train, rng);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("model input") != std::string::npos);
  }
  CHECK_THROWS_AS(m.forward(Tensor({2, 600, 2}), Mode::train, rng), ShapeError);
}

TEST_CASE("inference before any training pass is a state error") {
  Model m = Model::build(testing::small_model(), 1);
  CHECK_FALSE(m.running_stats_ready());
  CHECK_THROWS_AS(m.predict(noise_batch(1, 600, 2)), StateError);
}

TEST_CASE("every trainable parameter receives gradient") {
  for (auto v : {Variant::cnn, Variant::cnn_lstm, Variant::cnn_tcn_lstm}) {
    Model m = Model::build(testing::small_model(v), 41);
    Rng rng(42);
    m.zero_grad();
    const Tensor p = m.forward(noise_batch(6, 600, 43), Mode::train, rng);
    Tensor dp(p.shape());
    for (std::size_t r = 0; r < 6; ++r) dp.at(r, r % 2) = -1.0 / p.at(r, r % 2);
    m.backward(dp);
    for (auto* param : m.trainable_parameters()) {
      double norm = 0;
      for (double g : param->grad.data()) norm += std::abs(g);
      INFO(param->name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("parameter names are unique") {
  Model m = Model::build(ModelConfig{}, 1);
  std::set<std::string> names;
  for (auto* p : m.parameters()) CHECK(names.insert(p->name).second);
  CHECK(m.parameter_count(false) > m.parameter_count(true));
}

TEST_CASE("save and load reproduce predictions exactly") {
  const auto dir = testing::temp_dir("model_io");
  Model m = Model::build(testing::small_model(), 51);
  Rng rng(52);
  m.forward(noise_batch(4, 600, 53), Mode::train, rng);
  m.save(dir / "model.json");
  const Model loaded = Model::load(dir / "model.json");
  const Tensor x = noise_batch(3, 600, 54);
  CHECK(loaded.predict(x).values() == m.predict(x).values());
  CHECK(loaded.config().variant == Variant::cnn_tcn_lstm);
}

TEST_CASE("unknown variants and bad configs are rejected") {
  CHECK_THROWS_AS(parse_variant("transformer"), ConfigError);
  CHECK(parse_variant("cnn_lstm") == Variant::cnn_lstm);
  CHECK(display_name(Variant::cnn_tcn_lstm) == "CNN-TCN-LSTM");
  ModelConfig c;
  c.lstm_units = 0;
  CHECK_THROWS_AS(Model::build(c, 1), ConfigError);
  c = ModelConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(Model::build(c, 1), ConfigError);
  const auto j = to_json(ModelConfig{});
  CHECK(to_json(model_config_from_json(j)) == j);
}

}  // TEST_SUITE
