#include <doctest.h>

#include <cmath>

#include "echopipe/error.hpp"
#include "echopipe/network.hpp"
#include "helpers.hpp"

using namespace echopipe;

namespace {

// Layer-by-layer parameter count of the 3D ResNet-18, computed from the block
// specification alone.
std::size_t resnet18_3d_param_oracle(double width, std::size_t classes, std::size_t in_ch = 1) {
  auto conv = [](std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kh, std::size_t kw) {
    return cin * cout * kt * kh * kw;
  };
  auto bn = [](std::size_t c) { return 2 * c; };
  std::size_t ch[4];
  for (int i = 0; i < 4; ++i) ch[i] = static_cast<std::size_t>(std::lround(64.0 * (1 << i) * width));
  std::size_t total = conv(in_ch, ch[0], 3, 7, 7) + bn(ch[0]);
  std::size_t in = ch[0];
  for (int s = 0; s < 4; ++s) {
    const std::size_t out = ch[s];
    // first block
    total += conv(in, out, 3, 3, 3) + bn(out) + conv(out, out, 3, 3, 3) + bn(out);
    if (s > 0) total += conv(in, out, 1, 1, 1) + bn(out);
    // second block
    total += 2 * (conv(out, out, 3, 3, 3) + bn(out));
    in = out;
  }
  return total + ch[3] * classes + classes;
}

ModelConfig small_config(std::size_t k = 4, std::size_t hw = 16) {
  ModelConfig c;
  c.width_multiplier = 0.125;
  c.clip_len = k;
  c.input_height = c.input_width = hw;
  return c;
}

template <typename T>
Tensor<T> random_batch(std::size_t b, const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<T> x({b, 1, c.clip_len, c.input_height, c.input_width});
  for (auto& v : x.storage()) v = static_cast<T>(n(rng));
  return x;
}

}  // namespace

TEST_CASE("parameter count matches the block-spec oracle") {
  ModelConfig full;
  Model<float> m(full, 0);
  const std::size_t oracle = resnet18_3d_param_oracle(1.0, 3);
  CHECK(m.parameter_count() == oracle);
  CHECK(std::abs(static_cast<double>(oracle) - 33.2e6) / 33.2e6 < 0.05);

  for (double w : {0.125, 0.25, 0.5}) {
    for (int classes : {2, 3}) {
      ModelConfig c = small_config();
      c.width_multiplier = w;
      c.num_classes = classes;
      Model<float> mm(c, 1);
      CHECK(mm.parameter_count() == resnet18_3d_param_oracle(w, static_cast<std::size_t>(classes)));
    }
  }
}

TEST_CASE("zeros forward gives finite logits and a valid softmax") {
  const auto c = small_config(12, 32);
  Model<float> m(c, 3);
  const Tensor<float> x({1, 1, 12, 32, 32}, 0.0f);
  const auto logits = m.forward(x);
  REQUIRE(logits.shape() == Shape{1, 3});
  for (float v : logits.span()) CHECK(std::isfinite(v));
  const auto p = softmax_rows(logits);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("same seed builds identical parameters; different seeds differ") {
  const auto c = small_config();
  Model<float> a(c, 42), b(c, 42), d(c, 43);
  auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_equal = all_equal && pa[i]->value == pb[i]->value;
    any_diff = any_diff || pa[i]->value != pd[i]->value;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("forward rejects a wrong input shape, naming both shapes") {
  Model<float> m(small_config(), 0);
  const Tensor<float> bad({1, 1, 4, 16, 15}, 0.0f);
  CHECK_THROWS_WITH_AS(m.forward(bad), doctest::Contains("expected [B, 1, 4, 16, 16], got [1, 1, 4, 16, 15]"), Error);
}

TEST_CASE("eval-mode forward is batch invariant") {
  const auto c = small_config(6, 16);
  Model<float> m(c, 5);
  m.set_training(false);
  const auto ab = random_batch<float>(2, c, 1);
  const auto la = m.forward(ab.slice0(0).reshaped({1, 1, 6, 16, 16}));
  const auto lb = m.forward(ab.slice0(1).reshaped({1, 1, 6, 16, 16}));
  const auto lab = m.forward(ab);
  for (int k = 0; k < 3; ++k) {
    CHECK(lab.at(0, k) == doctest::Approx(la.at(0, k)).epsilon(1e-5));
    CHECK(lab.at(1, k) == doctest::Approx(lb.at(0, k)).epsilon(1e-5));
  }
}

TEST_CASE("input gradient matches central finite differences (width 0.125, 8x8)") {
  const auto c = small_config(12, 8);
  Model<double> m(c, 11);
  m.set_training(false);
  // Perturb BN running stats and affine terms away from identity so the check is not trivial.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& b : m.buffers()) {
    for (auto& v : b.value->storage()) v = b.name.find("var") != std::string::npos ? u(rng) : u(rng) - 1.0;
  }
  const auto x = random_batch<double>(1, c, 3);
  const std::vector<double> w = {0.7, -1.3, 0.4};
  auto objective = [&](const Tensor<double>& in) {
    const auto l = m.forward(in);
    return w[0] * l[0] + w[1] * l[1] + w[2] * l[2];
  };
  m.forward(x);
  const auto grad = m.backward(Tensor<double>({1, 3}, std::vector<double>(w)));
  m.zero_grad();

  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  const double eps = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const std::size_t j = pick(rng);
    auto xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    const double fd = (objective(xp) - objective(xm)) / (2 * eps);
    const double rel = std::abs(fd - grad[j]) / std::max({std::abs(fd), std::abs(grad[j]), 1e-6});
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("parameter gradient of the head matches finite differences") {
  const auto c = small_config(4, 8);
  Model<double> m(c, 4);
  m.set_training(false);
  const auto x = random_batch<double>(2, c, 8);
  const std::vector<int> y = {2, 0};
  m.zero_grad();
  const auto loss = cross_entropy(m.forward(x), y);
  m.backward(loss.grad, false);
  auto params = m.parameters();
  auto* fc_w = params[params.size() - 2];
  auto* conv = params[0];
  const double eps = 1e-6;
  for (auto* p : {fc_w, conv}) {
    for (std::size_t j : {std::size_t{0}, p->value.size() / 2, p->value.size() - 1}) {
      const double analytic = p->grad[j];
      const double saved = p->value[j];
      p->value[j] = saved + eps;
      const double lp = cross_entropy(m.forward(x), y).loss;
      p->value[j] = saved - eps;
      const double lm = cross_entropy(m.forward(x), y).loss;
      p->value[j] = saved;
      const double fd = (lp - lm) / (2 * eps);
      CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("softmax rows are probability vectors") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 30.0);
  Tensor<double> logits({50, 3});
  for (auto& v : logits.storage()) v = n(rng);
  const auto p = softmax_rows(logits);
  for (std::size_t b = 0; b < 50; ++b) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      REQUIRE(p.at(b, c) >= 0.0);
      s += p.at(b, c);
    }
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cross-entropy of a correct prediction falls to zero as confidence grows") {
  double previous = 1e9;
  for (double margin : {0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0}) {
    const Tensor<double> logits({1, 3}, std::vector<double>{0.0, margin, 0.0});
    const double loss = cross_entropy(logits, {1}).loss;
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-15);
  const Tensor<double> uniform({1, 3}, 0.0);
  CHECK(cross_entropy(uniform, {0}).loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("Adam minimizes a quadratic and applies L2 decay through the gradient") {
  nn::Parameter<double> p{"p", Tensor<double>({2}, std::vector<double>{3.0, -2.0}), Tensor<double>({2}, 0.0)};
  Adam<double> opt({&p}, 0.05, 0.0);
  for (int i = 0; i < 500; ++i) {
    p.grad[0] = 2.0 * (p.value[0] - 1.0);
    p.grad[1] = 2.0 * (p.value[1] + 0.5);
    opt.step();
  }
  CHECK(p.value[0] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(p.value[1] == doctest::Approx(-0.5).epsilon(1e-2));
  CHECK(opt.steps() == 500);

  // First step with zero gradient but weight decay moves against the sign of the weight by lr.
  nn::Parameter<double> q{"q", Tensor<double>({1}, std::vector<double>{2.0}), Tensor<double>({1}, 0.0)};
  Adam<double> decay({&q}, 0.1, 0.01);
  decay.step();
  CHECK(q.value[0] == doctest::Approx(1.9).epsilon(1e-6));
}

TEST_CASE("clone copies state and block names resolve") {
  const auto c = small_config();
  Model<float> m(c, 9);
  auto copy = m.clone();
  const auto x = random_batch<float>(1, c, 2);
  CHECK(copy->forward(x) == m.forward(x));
  CHECK(m.block_index("last_conv") == m.block_index("layer4"));
  CHECK(m.block_index("stem") == 0);
  CHECK_THROWS_AS(m.block_index("layer9"), Error);

  ModelConfig bad = c;
  bad.num_classes = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.width_multiplier = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
