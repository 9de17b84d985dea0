#include <gtest/gtest.h>

#include <cmath>

#include "denoiserank/error.hpp"
#include "denoiserank/optimizer.hpp"

namespace denoiserank {
namespace {

using ad::Tensor;

void set_grad(Tensor& t, std::vector<double> g) {
  auto dst = t.mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

TEST(AdamW, MatchesHandTraceOverThreeSteps) {
  Tensor a = Tensor::parameter({2}, {1.0, -2.0});
  Tensor b = Tensor::parameter({1}, {0.5});
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  AdamW opt({a, b}, lr, AdamWConfig{b1, b2, eps, wd});
  const std::vector<std::vector<double>> grads{{0.5, -1.0, 2.0}, {0.1, 0.3, -0.2}, {-0.4, 0.0, 1.0}};

  std::vector<double> p{1.0, -2.0, 0.5}, m(3, 0.0), v(3, 0.0);
  for (int step = 1; step <= 3; ++step) {
    const auto& g = grads[step - 1];
    opt.zero_grad();
    set_grad(a, {g[0], g[1]});
    set_grad(b, {g[2]});
    opt.step();
    for (int i = 0; i < 3; ++i) {
      p[i] *= 1 - lr * wd;
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, step));
      const double vh = v[i] / (1 - std::pow(b2, step));
      p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  EXPECT_EQ(opt.step_count(), 3);
  EXPECT_NEAR(a[0], p[0], 1e-12);
  EXPECT_NEAR(a[1], p[1], 1e-12);
  EXPECT_NEAR(b[0], p[2], 1e-12);
}

TEST(AdamW, ZeroLearningRateLeavesParametersUntouched) {
  Tensor a = Tensor::parameter({3}, {0.1, 0.2, 0.3});
  AdamW opt({a}, 0.0);
  for (int i = 0; i < 5; ++i) {
    set_grad(a, {1.0, -1.0, 3.0});
    opt.step();
  }
  EXPECT_EQ(a[0], 0.1);
  EXPECT_EQ(a[1], 0.2);
  EXPECT_EQ(a[2], 0.3);
}

TEST(AdamW, ZeroDecayIsPlainAdam) {
  Tensor a = Tensor::parameter({1}, {2.0});
  AdamW opt({a}, 0.01, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  set_grad(a, {4.0});
  opt.step();
  // First Adam step moves by lr * sign(g) up to eps.
  EXPECT_NEAR(a[0], 2.0 - 0.01, 1e-9);
}

TEST(AdamW, DecayAppliesWithoutGradientSignal) {
  Tensor a = Tensor::parameter({1}, {2.0});
  AdamW opt({a}, 0.1, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
  set_grad(a, {0.0});
  opt.step();
  EXPECT_NEAR(a[0], 2.0 * (1 - 0.05), 1e-12);
}

TEST(AdamW, SkipsParametersWithoutGradient) {
  Tensor a = Tensor::parameter({1}, {2.0});
  Tensor b = Tensor::parameter({1}, {3.0});
  AdamW opt({a, b}, 0.1);
  set_grad(a, {1.0});
  opt.step();
  EXPECT_NE(a[0], 2.0);
  EXPECT_EQ(b[0], 3.0);
}

TEST(AdamW, RejectsConstantsAndBadConfig) {
  EXPECT_THROW(AdamW({Tensor::constant({1}, {1.0})}, 0.1), ContractError);
  AdamWConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace denoiserank
