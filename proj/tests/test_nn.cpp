#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rmc/nn.hpp"

using namespace rmc;

namespace {

// Scalar loss used for gradient checks: a fixed random projection of the output.
double projected(const Mlp& net, const std::vector<double>& x, const std::vector<double>& w) {
  const auto y = net.evaluate(x);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
  return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

}  // namespace

TEST(MlpForward, ZeroNetworkGivesZero) {
  Mlp net({{3, 2, Activation::Identity}});
  const auto y = net.evaluate(std::vector<double>{1, 2, 3});
  EXPECT_EQ(y, (std::vector<double>{0, 0}));
}

TEST(MlpForward, IdentityWeights) {
  Mlp net({{3, 3, Activation::Identity}});
  auto p = net.params();
  for (int i = 0; i < 3; ++i) p[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  const std::vector<double> x{0.5, -2, 7};
  EXPECT_EQ(net.evaluate(x), x);
}

TEST(MlpForward, HandEvaluated221) {
  // Layer 1 (tanh): W = [[0.5, -1], [2, 0.25]], b = [0.1, -0.2]
  // Layer 2 (identity): W = [[1.5, -0.5]], b = [0.3]
  Mlp net({{2, 2, Activation::Tanh}, {2, 1, Activation::Identity}});
  const double vals[] = {0.5, -1, 2, 0.25, 0.1, -0.2, 1.5, -0.5, 0.3};
  std::copy(std::begin(vals), std::end(vals), net.params().begin());
  const double x0 = 0.4, x1 = -0.6;
  const double h0 = std::tanh(0.5 * x0 - 1 * x1 + 0.1);
  const double h1 = std::tanh(2 * x0 + 0.25 * x1 - 0.2);
  const double want = 1.5 * h0 - 0.5 * h1 + 0.3;
  EXPECT_NEAR(net.evaluate(std::vector<double>{x0, x1})[0], want, 1e-15);
  EXPECT_NEAR(net.forward(std::vector<double>{x0, x1})[0], want, 1e-15);
}

TEST(MlpForward, DimensionMismatchRejected) {
  Mlp net({{3, 2, Activation::Tanh}});
  EXPECT_THROW(net.evaluate(std::vector<double>{1, 2}), std::invalid_argument);
  EXPECT_THROW(Mlp({{3, 2, Activation::Tanh}, {3, 1, Activation::Identity}}), std::invalid_argument);
  EXPECT_THROW(Mlp({{3, 2, Activation::Softmax}, {2, 1, Activation::Identity}}), std::invalid_argument);
}

TEST(MlpBackward, RequiresForward) {
  Mlp net({{2, 1, Activation::Identity}});
  const double g = 1.0;
  EXPECT_THROW(net.backward(std::span<const double>(&g, 1)), std::logic_error);
}

TEST(MlpBackward, ZeroOutputGradient) {
  std::mt19937_64 rng(1);
  Mlp net({{4, 5, Activation::Tanh}, {5, 3, Activation::Identity}});
  net.init(rng);
  net.forward(std::vector<double>{1, -1, 0.5, 2});
  net.backward(std::vector<double>{0, 0, 0});
  for (double g : net.grads()) EXPECT_EQ(g, 0.0);
}

TEST(MlpBackward, LinearScalarCase) {
  Mlp net({{1, 1, Activation::Identity}});
  net.params()[0] = 0.7;
  net.forward(std::vector<double>{3.5});
  const auto gin = net.backward(std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(net.grads()[0], 3.5);  // d/dw
  EXPECT_DOUBLE_EQ(net.grads()[1], 1.0);  // d/db
  EXPECT_DOUBLE_EQ(gin[0], 0.7);
}

TEST(MlpBackward, FiniteDifferenceCheckOnRandomNetworks) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> width(1, 6), depth(1, 3), act(0, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LayerShape> layers;
    int in = width(rng);
    const int n = depth(rng);
    for (int l = 0; l < n; ++l) {
      const int out = width(rng) + (l + 1 == n && trial % 4 == 0 ? 1 : 0);
      Activation a = static_cast<Activation>(act(rng));
      if (l + 1 == n && trial % 4 == 0) a = Activation::Softmax;
      layers.push_back({in, out, a});
      in = out;
    }
    Mlp net(layers);
    net.init(rng);
    for (double& p : net.params()) p += 0.1 * normal(rng);  // non-zero biases
    std::vector<double> x(static_cast<std::size_t>(net.input_size()));
    for (double& v : x) v = normal(rng);
    std::vector<double> w(static_cast<std::size_t>(net.output_size()));
    for (double& v : w) v = normal(rng);

    net.forward(x);
    const auto gin = net.backward(w);
    const std::vector<double> analytic(net.grads().begin(), net.grads().end());
    for (std::size_t i = 0; i < net.num_params(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + h;
      const double up = projected(net, x, w);
      net.params()[i] = keep - h;
      const double down = projected(net, x, w);
      net.params()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      if (std::abs(numeric) < 1e-7 && std::abs(analytic[i]) < 1e-7) continue;  // ReLU dead units
      EXPECT_LT(rel_err(analytic[i], numeric), 1e-4) << "trial " << trial << " param " << i;
      ++checked;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double numeric = (projected(net, xp, w) - projected(net, xm, w)) / (2 * h);
      if (std::abs(numeric) < 1e-7 && std::abs(gin[i]) < 1e-7) continue;
      EXPECT_LT(rel_err(gin[i], numeric), 1e-4);
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  std::mt19937_64 rng(5);
  Mlp net({{3, 2, Activation::Tanh}});
  net.init(rng);
  const std::vector<double> before(net.params().begin(), net.params().end());
  net.adam_step(OptimConfig{});
  EXPECT_EQ(std::vector<double>(net.params().begin(), net.params().end()), before);
  EXPECT_EQ(net.step_count(), 1);
}

TEST(Adam, GlobalNormClipping) {
  Mlp net({{2, 1, Activation::Identity}});  // 3 parameters
  auto g = net.grads();
  g[0] = 6;
  g[1] = 8;
  g[2] = 0;  // global norm 10
  OptimConfig cfg;
  cfg.max_grad_norm = 1.0;
  const double norm = net.adam_step(cfg);
  EXPECT_DOUBLE_EQ(norm, 10.0);
  // First moment after one step holds (1 - beta1) * applied gradient.
  EXPECT_NEAR(net.first_moment()[0], (1 - cfg.beta1) * 0.6, 1e-15);
  EXPECT_NEAR(net.first_moment()[1], (1 - cfg.beta1) * 0.8, 1e-15);
  for (double x : net.grads()) EXPECT_EQ(x, 0.0);
}

TEST(Adam, ScalarTrajectoryMatchesScriptedRecurrence) {
  Mlp net({{1, 1, Activation::Identity}});
  net.params()[0] = 0.3;
  OptimConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_grad_norm = 0;
  const double grad = 0.25;
  double theta = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 100; ++t) {
    net.grads()[0] = grad;
    net.adam_step(cfg);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    ASSERT_NEAR(net.params()[0], theta, 1e-12) << "step " << t;
  }
}

TEST(Adam, RejectsNonFiniteGradients) {
  Mlp net({{1, 1, Activation::Identity}});
  net.grads()[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(net.adam_step(OptimConfig{}), NonFiniteError);
  net.grads()[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.adam_step(OptimConfig{}), NonFiniteError);
}

TEST(Adam, MaskedEntriesAreFrozen) {
  Mlp net({{2, 1, Activation::Identity}});
  net.params()[0] = 1.0;
  const std::vector<std::uint8_t> mask{0, 1, 1};
  for (int i = 0; i < 5; ++i) {
    for (double& g : net.grads()) g = 1.0;
    net.adam_step(OptimConfig{}, mask);
  }
  EXPECT_EQ(net.params()[0], 1.0);
  EXPECT_EQ(net.first_moment()[0], 0.0);
  EXPECT_NE(net.params()[1], 0.0);
}

TEST(Softmax, UniformLogits) {
  const auto p = softmax(std::vector<double>{2, 2, 2, 2});
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Softmax, ShiftInvarianceAndNormalization) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0, 5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(7);
    for (double& v : z) v = normal(rng);
    auto shifted = z;
    for (double& v : shifted) v += 1234.5;
    const auto p = softmax(z);
    const auto q = softmax(shifted);
    double sum = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_GT(p[k], 0.0);
      EXPECT_NEAR(p[k], q[k], 1e-12);
      sum += p[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Softmax, HandEvaluated) {
  const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const auto p = softmax(std::vector<double>{1000, 999});
  EXPECT_TRUE(std::isfinite(p[0]));
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(Checkpoint, RoundTripsBitIdentically) {
  std::mt19937_64 rng(77);
  Mlp net({{5, 4, Activation::Tanh}, {4, 3, Activation::Relu}, {3, 2, Activation::Softmax}});
  net.init(rng);
  // Populate optimizer state with awkward values.
  for (int i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < net.num_params(); ++k) net.grads()[k] = std::sin(double(k) * 1.7 + i) / 3.0;
    net.adam_step(OptimConfig{});
  }
  net.params()[0] = 1.0 / 3.0;
  net.params()[1] = -0.0;
  net.params()[2] = 5e-324;
  std::stringstream ss;
  net.write(ss, "policy");
  const Mlp back = Mlp::read(ss, "policy");
  EXPECT_TRUE(back == net);
  std::stringstream again;
  back.write(again, "policy");
  std::stringstream first;
  net.write(first, "policy");
  EXPECT_EQ(again.str(), first.str());
}

TEST(Checkpoint, RejectsWrongName) {
  Mlp net({{1, 1, Activation::Identity}});
  std::stringstream ss;
  net.write(ss, "value");
  EXPECT_THROW(Mlp::read(ss, "policy"), std::runtime_error);
}

TEST(MlpInit, DeterministicForSeedAndWithinLimit) {
  std::mt19937_64 a(3), b(3);
  Mlp n1({{10, 6, Activation::Tanh}, {6, 2, Activation::Identity}});
  Mlp n2 = n1;
  n1.init(a);
  n2.init(b);
  EXPECT_TRUE(n1 == n2);
  const double limit = std::sqrt(6.0 / 16.0);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_LE(std::abs(n1.params()[i]), limit);
}
