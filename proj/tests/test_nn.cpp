#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "icarec/adam.hpp"
#include "icarec/checkpoint.hpp"
#include "icarec/nn.hpp"

namespace ad = icarec::ad;
namespace nn = icarec::nn;
using icarec::Rng;
using icarec::Tensor;

namespace {

Tensor random_tensor(Rng& rng, icarec::Shape shape) {
  std::vector<double> v(icarec::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "icarec_test_nn";
  std::filesystem::create_directories(dir);
  return dir / name;
}

nn::NetSpec demo_mlp() { return nn::mlp_spec(nn::Role::encoder, 2, 1, 3, 64, nn::Activation::softplus); }

}  // namespace

TEST(BuildNet, MlpParameterCount) {
  const nn::Net net = nn::build_net(demo_mlp(), 7);
  EXPECT_EQ(nn::param_count(net), 2u * 64 + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 * 1 + 1);
  EXPECT_EQ(nn::param_count(net), 8577u);
}

TEST(BuildNet, DeterministicGivenSeed) {
  const auto a = nn::build_net(nn::conv_encoder_spec(24, 5), 3);
  const auto b = nn::build_net(nn::conv_encoder_spec(24, 5), 3);
  const auto c = nn::build_net(nn::conv_encoder_spec(24, 5), 4);
  ASSERT_EQ(a.params.size(), b.params.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].value, b.params[i].value);
    differs = differs || !(a.params[i].value == c.params[i].value);
  }
  EXPECT_TRUE(differs);
}

TEST(BuildNet, GlorotBoundsAndZeroBiases) {
  const auto net = nn::build_net(demo_mlp(), 1);
  const double a = std::sqrt(6.0 / (64 + 64));
  for (double w : net.params[2].value.data()) EXPECT_LE(std::abs(w), a);
  EXPECT_EQ(net.params[1].value, Tensor::zeros({64}));
}

TEST(BuildNet, InconsistentSpecNamesLayer) {
  nn::NetSpec spec;
  spec.layers = {nn::Dense{2, 8, nn::Activation::tanh}, nn::Dense{7, 1, nn::Activation::identity}};
  try {
    nn::build_net(spec, 0);
    FAIL();
  } catch (const icarec::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
  nn::NetSpec even;
  even.layers = {nn::Conv1d{1, 2, 4, nn::Activation::tanh}};
  EXPECT_THROW(nn::build_net(even, 0), icarec::ConfigError);
  nn::NetSpec decoder = demo_mlp();
  decoder.role = nn::Role::decoder;
  EXPECT_THROW(nn::build_net(decoder, 0), icarec::ConfigError);
}

TEST(Forward, ConvEncoderOutputShape) {
  const auto net = nn::build_net(nn::conv_encoder_spec(24, 5), 0);
  Rng rng(0);
  const auto y = nn::apply(net, ad::constant(random_tensor(rng, {1, 24, 2000})));
  EXPECT_EQ(y.shape(), (icarec::Shape{1, 5, 2000}));
}

TEST(Forward, ZeroWeightsGiveZeroCode) {
  auto net = nn::build_net(nn::conv_encoder_spec(4, 2), 0);
  for (auto& p : net.params) {
    if (p.name.find("gamma") == std::string::npos) p.value = Tensor::zeros(p.value.shape());
  }
  Rng rng(1);
  const auto y = nn::apply(net, ad::constant(random_tensor(rng, {3, 4, 50})));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, DecoderAppendsConditionChannels) {
  const auto net = nn::build_net(nn::conv_decoder_spec(5, 3, 24), 0);
  const auto& first = std::get<nn::Conv1d>(net.spec.layers[1]);
  EXPECT_EQ(first.in_ch, 8u);
  EXPECT_EQ(net.params[0].value.shape(), (icarec::Shape{8, 8, 3}));
  Rng rng(2);
  const auto cond = nn::Condition::numeric(ad::constant(random_tensor(rng, {2, 3, 40})));
  const auto y = nn::apply(net, ad::constant(random_tensor(rng, {2, 5, 40})), &cond);
  EXPECT_EQ(y.shape(), (icarec::Shape{2, 24, 40}));
  EXPECT_THROW(nn::apply(net, ad::constant(random_tensor(rng, {2, 5, 40}))), icarec::ShapeError);
}

TEST(Forward, MlpMatchesHandComposedMatrices) {
  nn::NetSpec spec;
  spec.layers = {nn::Dense{2, 3, nn::Activation::tanh}, nn::Dense{3, 1, nn::Activation::identity}};
  auto net = nn::build_net(spec, 9);
  net.params[1].value = Tensor::vector({0.1, -0.2, 0.3});
  net.params[3].value = Tensor::vector({0.05});
  const Tensor x({2, 2}, {0.4, -1.2, 2.0, 0.7});
  const auto y = nn::apply(net, ad::constant(x)).value();
  const Tensor& w1 = net.params[0].value;
  const Tensor& b1 = net.params[1].value;
  const Tensor& w2 = net.params[2].value;
  for (std::size_t r = 0; r < 2; ++r) {
    double out = net.params[3].value[0];
    for (std::size_t j = 0; j < 3; ++j) {
      double h = b1[j];
      for (std::size_t i = 0; i < 2; ++i) h += x.at({r, i}) * w1.at({i, j});
      out += std::tanh(h) * w2.at({j, 0});
    }
    EXPECT_NEAR(y.at({r, 0}), out, 1e-15);
  }
}

TEST(Forward, SymbolicConditionUsesEmbedding) {
  const auto spec = nn::mlp_spec(nn::Role::decoder, 1, 2, 1, 4, nn::Activation::tanh,
                                 nn::ConcatCondition{nn::ConditionMode::append_features, 3, 5});
  const auto net = nn::build_net(spec, 0);
  EXPECT_EQ(net.params[0].name, "layer0.embedding");
  const auto cond = nn::Condition::symbolic({4, 0});
  const auto y = nn::apply(net, ad::constant(Tensor({2, 1}, {0.5, 0.5})), &cond);
  EXPECT_EQ(y.shape(), (icarec::Shape{2, 2}));
  EXPECT_FALSE(y.value().at({0, 0}) == y.value().at({1, 0}));
  const auto bad = nn::Condition::symbolic({5, 0});
  EXPECT_THROW(nn::apply(net, ad::constant(Tensor({2, 1}, {0.5, 0.5})), &bad), icarec::ShapeError);
}

TEST(Forward, EvalModeIsPure) {
  auto net = nn::build_net(nn::conv_encoder_spec(3, 2), 5);
  Rng rng(3);
  const Tensor batch = random_tensor(rng, {4, 3, 30});
  const auto out = nn::forward(net, ad::constant(batch));
  ASSERT_EQ(out.updated_buffers.size(), 4u);
  nn::commit_buffers(net, out);
  net.mode = nn::Mode::eval;
  const Tensor x = random_tensor(rng, {2, 3, 30});
  const auto before = net.buffers;
  const auto y1 = nn::apply(net, ad::constant(x)).value();
  const auto y2 = nn::apply(net, ad::constant(x)).value();
  EXPECT_EQ(y1, y2);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].value, net.buffers[i].value);
}

TEST(Forward, RunningStatsUseMomentum) {
  nn::NetSpec spec;
  spec.layers = {nn::Dense{1, 1, nn::Activation::identity}, nn::BatchNorm1d{1}};
  auto net = nn::build_net(spec, 0);
  net.params[0].value = Tensor({1, 1}, {1.0});
  const auto out = nn::forward(net, ad::constant(Tensor({4, 1}, {1, 2, 3, 4})));
  // batch mean 2.5, unbiased variance 5/3
  EXPECT_NEAR(out.updated_buffers[0][0], 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(out.updated_buffers[1][0], 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
}

TEST(Adam, FirstStepExample) {
  nn::NetSpec spec;
  spec.layers = {nn::Dense{1, 1, nn::Activation::identity}};
  auto net = nn::build_net(spec, 0);
  net.params[0].value = Tensor({1, 1}, {0.0});
  auto state = nn::make_adam(net, {1e-3, 0.9, 0.999, 1e-8, 0.0});
  nn::adam_step(state, net, {Tensor({1, 1}, {10.0}), Tensor::zeros({1})});
  EXPECT_NEAR(net.params[0].value[0], -1e-3 * 10.0 / (10.0 + 1e-8), 1e-18);
  EXPECT_NEAR(net.params[0].value[0], -9.9999990e-4, 1e-10);
  EXPECT_EQ(net.params[1].value[0], 0.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto net = nn::build_net(demo_mlp(), 2);
  const auto before = net.params;
  auto state = nn::make_adam(net, {});
  std::vector<Tensor> zeros;
  for (const auto& p : net.params) zeros.push_back(Tensor::zeros(p.value.shape()));
  nn::adam_step(state, net, zeros);
  nn::adam_step(state, net, zeros);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i].value, net.params[i].value);
}

TEST(Adam, TwoStepTranscript) {
  // Scripted recurrences in long double.
  const long double b1 = 0.9L, b2 = 0.999L, eps = 1e-8L, lr = 1e-3L;
  const long double g[2] = {0.3L, -1.7L};
  long double theta = 0.5L, m = 0, v = 0;
  std::vector<double> expect;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g[t - 1];
    v = b2 * v + (1 - b2) * g[t - 1] * g[t - 1];
    const long double mh = m / (1 - std::pow(b1, (long double)t));
    const long double vh = v / (1 - std::pow(b2, (long double)t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
    expect.push_back(static_cast<double>(theta));
  }
  nn::NetSpec spec;
  spec.layers = {nn::Dense{1, 1, nn::Activation::identity}};
  auto net = nn::build_net(spec, 0);
  net.params[0].value = Tensor({1, 1}, {0.5});
  auto state = nn::make_adam(net, {1e-3, 0.9, 0.999, 1e-8, 0.0});
  for (int t = 0; t < 2; ++t) {
    nn::adam_step(state, net, {Tensor({1, 1}, {static_cast<double>(g[t])}), Tensor::zeros({1})});
    EXPECT_NEAR(net.params[0].value[0], expect[t], 1e-12);
  }
}

TEST(Adam, StepOneDirectionIsScaleInvariant) {
  Rng rng(4);
  auto base = nn::build_net(demo_mlp(), 3);
  std::vector<Tensor> grads;
  for (const auto& p : base.params) grads.push_back(random_tensor(rng, p.value.shape()));
  auto step_with = [&](double c) {
    auto net = base;
    auto state = nn::make_adam(net, {1e-3, 0.9, 0.999, 1e-8, 0.0});
    std::vector<Tensor> scaled;
    for (const auto& g : grads) scaled.push_back(icarec::map(g, [c](double x) { return c * x; }));
    nn::adam_step(state, net, scaled);
    return net;
  };
  const auto a = step_with(1.0), b = step_with(37.5);
  for (std::size_t i = 0; i < base.params.size(); ++i)
    for (std::size_t k = 0; k < base.params[i].value.numel(); ++k) {
      const double da = a.params[i].value[k] - base.params[i].value[k];
      const double db = b.params[i].value[k] - base.params[i].value[k];
      EXPECT_EQ(std::signbit(da), std::signbit(db));
      // |lr g/(|g|+eps) - lr g/(|g|+eps/c)| <= lr eps / |g|
      EXPECT_LE(std::abs(da - db), 1e-3 * 1e-8 / std::abs(grads[i][k]) + 1e-18);
    }
}

TEST(Adam, RejectsNonFiniteGradient) {
  nn::NetSpec spec;
  spec.layers = {nn::Dense{1, 1, nn::Activation::identity}};
  auto net = nn::build_net(spec, 0);
  auto state = nn::make_adam(net, {});
  try {
    nn::adam_step(state, net, {Tensor({1, 1}, {NAN}), Tensor::zeros({1})});
    FAIL();
  } catch (const icarec::NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.weight"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto net = nn::build_net(nn::conv_encoder_spec(3, 2), 8);
  Rng rng(5);
  nn::commit_buffers(net, nn::forward(net, ad::constant(random_tensor(rng, {4, 3, 20}))));
  auto adam = nn::make_adam(net, {3e-4, 0.9, 0.999, 1e-8, 1e-4});
  std::vector<Tensor> grads;
  for (const auto& p : net.params) grads.push_back(random_tensor(rng, p.value.shape()));
  nn::adam_step(adam, net, grads);
  const auto path = temp_path("roundtrip.json");
  nn::save_checkpoint(net, adam, path);
  const auto [loaded, ladam] = nn::load_checkpoint(path);
  ASSERT_EQ(loaded.params.size(), net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    EXPECT_EQ(loaded.params[i].name, net.params[i].name);
    EXPECT_EQ(loaded.params[i].value, net.params[i].value);
    EXPECT_EQ(ladam.m[i], adam.m[i]);
    EXPECT_EQ(ladam.v[i], adam.v[i]);
  }
  for (std::size_t i = 0; i < net.buffers.size(); ++i) EXPECT_EQ(loaded.buffers[i].value, net.buffers[i].value);
  EXPECT_EQ(ladam.step, adam.step);
  EXPECT_EQ(ladam.config.weight_decay, adam.config.weight_decay);
}

TEST(Checkpoint, TruncatedFileFailsWithOffset) {
  const auto net = nn::build_net(demo_mlp(), 1);
  const auto adam = nn::make_adam(net, {});
  const auto path = temp_path("truncated.json");
  nn::save_checkpoint(net, adam, path);
  std::string text = icarec::io::read_file(path);
  text.resize(text.size() / 2);
  { std::ofstream(path, std::ios::binary | std::ios::trunc) << text; }
  try {
    nn::load_checkpoint(path);
    FAIL();
  } catch (const icarec::ParseError& e) {
    EXPECT_GT(e.byte_offset(), 0u);
  }
  EXPECT_EQ(icarec::io::read_file(path), text);
}

TEST(Checkpoint, SpecMismatchRejected) {
  const auto net = nn::build_net(demo_mlp(), 1);
  auto j = nn::checkpoint_to_json(net, nn::make_adam(net, {}));
  j["params"][2]["shape"] = {64, 63};
  EXPECT_THROW(nn::checkpoint_from_json(j), icarec::ConfigError);
  auto k = nn::checkpoint_to_json(net, nn::make_adam(net, {}));
  k["params"][0]["name"] = "bogus";
  EXPECT_THROW(nn::checkpoint_from_json(k), icarec::ConfigError);
}

TEST(Checkpoint, ReloadReproducesForward) {
  const auto spec = nn::mlp_spec(nn::Role::decoder, 1, 2, 3, 64, nn::Activation::softplus,
                                 nn::ConcatCondition{nn::ConditionMode::append_features, 1, 0});
  const auto net = nn::build_net(spec, 12);
  const auto path = temp_path("forward.json");
  nn::save_checkpoint(net, nn::make_adam(net, {}), path);
  const auto loaded = nn::load_checkpoint(path).first;
  Rng rng(6);
  const Tensor x = random_tensor(rng, {16, 1}), t = random_tensor(rng, {16, 1});
  const auto c1 = nn::Condition::numeric(ad::constant(t));
  EXPECT_EQ(nn::apply(net, ad::constant(x), &c1).value(), nn::apply(loaded, ad::constant(x), &c1).value());
}
