#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "denoiserank/error.hpp"
#include "denoiserank/gradcheck.hpp"
#include "denoiserank/network.hpp"
#include "denoiserank/random.hpp"
#include "temp_dir.hpp"

namespace denoiserank {
namespace {

using ad::Tensor;

ModelConfig small_config(bool attention = true) {
  ModelConfig c;
  c.k = 5;
  c.d_model = 16;
  c.heads = 4;
  c.blocks = 2;
  c.denoise_layers = 3;
  c.ffn_multiplier = 2;
  c.dropout = 0.1;
  c.use_attention = attention;
  return c;
}

const ScheduleSpec kSpec{ScheduleKind::kTruncatedLinear, 100};

std::vector<double> random_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * standard_normal(rng);
  return v;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<double> predict(const DenoiseModel& m, const std::vector<double>& x,
                            const std::vector<double>& y, int t) {
  const std::size_t n = y.size();
  const Tensor H = m.encode(Tensor::constant({n, m.config().k}, x), {}, ForwardMode{});
  return values(m.denoise(H, y, t, ForwardMode{}));
}

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.denoise_layers = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 0.9;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DenoiseModel, OutputRangeUnderRandomInputsAndParameters) {
  Rng rng = make_stream(1, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DenoiseModel m(small_config(), kSpec, seed);
    // Inflate parameters to push activations into saturation.
    for (auto& t : m.params().tensors()) {
      auto v = Tensor(t).mutable_data();
      for (auto& x : v) x *= 1.0 + 3.0 * (seed % 3);
    }
    const std::size_t n = 7;
    const auto out = predict(m, random_values(n * 5, rng, 4.0), random_values(n, rng, 3.0),
                             1 + static_cast<int>(seed * 9));
    for (double y : out) {
      EXPECT_GE(y, 0.0);
      EXPECT_LE(y, 4.0);
    }
  }
}

TEST(DenoiseModel, UniformGradeWeightsGiveTwo) {
  DenoiseModel m(small_config(), kSpec, 3);
  for (const char* name : {"denoise2.weight", "denoise2.bias"}) {
    Tensor t = m.params().get(name);
    auto v = t.mutable_data();
    std::fill(v.begin(), v.end(), 0.0);
  }
  Rng rng(2);
  for (double y : predict(m, random_values(4 * 5, rng), random_values(4, rng), 50)) {
    EXPECT_NEAR(y, 2.0, 1e-12);
  }
}

TEST(DenoiseModel, PermutationEquivariance) {
  for (bool attention : {true, false}) {
    DenoiseModel m(small_config(attention), kSpec, 4);
    Rng rng(3);
    const std::size_t n = 6, k = 5;
    const auto x = random_values(n * k, rng);
    const auto y = random_values(n, rng);
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<double> px(n * k), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x.begin() + perm[i] * k, k, px.begin() + i * k);
      py[i] = y[perm[i]];
    }
    const auto base = predict(m, x, y, 30);
    const auto permuted = predict(m, px, py, 30);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(permuted[i], base[perm[i]], 1e-12);
  }
}

TEST(DenoiseModel, PaddedRowsDoNotAffectRealRows) {
  DenoiseModel m(small_config(), kSpec, 5);
  Rng rng(4);
  const std::size_t real = 4, k = 5;
  const auto x = random_values(real * k, rng);
  const Tensor H = m.encode(Tensor::constant({real, k}, x), {}, ForwardMode{});
  for (std::size_t pad : {1u, 3u, 9u}) {
    std::vector<double> padded = x;
    const auto junk = random_values(pad * k, rng, 10.0);
    padded.insert(padded.end(), junk.begin(), junk.end());
    std::vector<std::uint8_t> mask(real + pad, 0);
    std::fill_n(mask.begin(), real, 1);
    const Tensor Hp = m.encode(Tensor::constant({real + pad, k}, padded), mask, ForwardMode{});
    for (std::size_t i = 0; i < real * m.config().d_model; ++i) EXPECT_NEAR(Hp[i], H[i], 1e-6);
  }
}

TEST(DenoiseModel, SingletonListBothModes) {
  for (bool attention : {true, false}) {
    DenoiseModel m(small_config(attention), kSpec, 6);
    Rng rng(5);
    const Tensor H = m.encode(Tensor::constant({1, 5}, random_values(5, rng)), {}, ForwardMode{});
    EXPECT_EQ(H.shape(), (ad::Shape{1, 16}));
    const auto y = m.denoise(H, std::vector<double>{0.3}, 10, ForwardMode{});
    EXPECT_EQ(y.shape(), (ad::Shape{1}));
    EXPECT_TRUE(std::isfinite(y[0]));
  }
}

TEST(DenoiseModel, AttentionFreeModelHasNoCrossDocumentMixing) {
  DenoiseModel m(small_config(false), kSpec, 7);
  Rng rng(6);
  const auto x = random_values(3 * 5, rng);
  auto x2 = x;
  for (std::size_t i = 5; i < 15; ++i) x2[i] += 1.0;  // change documents 1 and 2 only
  const std::vector<double> y{0.1, 0.2, 0.3};
  EXPECT_EQ(predict(m, x, y, 40)[0], predict(m, x2, y, 40)[0]);
  DenoiseModel attn(small_config(true), kSpec, 7);
  EXPECT_NE(predict(attn, x, y, 40)[0], predict(attn, x2, y, 40)[0]);
}

TEST(DenoiseModel, InferenceIsDeterministicAndTrainingUsesDropout) {
  DenoiseModel m(small_config(), kSpec, 8);
  Rng rng(7);
  const auto x = random_values(5 * 5, rng);
  const auto y = random_values(5, rng);
  EXPECT_EQ(predict(m, x, y, 20), predict(m, x, y, 20));

  Rng a(1), b(2);
  const Tensor X = Tensor::constant({5, 5}, x);
  const auto ta = values(m.denoise(m.encode(X, {}, {true, &a}), y, 20, {true, &a}));
  const auto tb = values(m.denoise(m.encode(X, {}, {true, &b}), y, 20, {true, &b}));
  EXPECT_NE(ta, tb);
  EXPECT_THROW(m.encode(X, {}, ForwardMode{true, nullptr}), ContractError);
}

TEST(DenoiseModel, ShapeAndIndexErrors) {
  DenoiseModel m(small_config(), kSpec, 9);
  EXPECT_THROW(m.encode(Tensor::zeros({3, 4}), {}, ForwardMode{}), ShapeError);
  const Tensor H = m.encode(Tensor::zeros({3, 5}), {}, ForwardMode{});
  EXPECT_THROW(m.denoise(H, std::vector<double>{1, 2}, 5, ForwardMode{}), ShapeError);
  EXPECT_THROW(m.denoise(H, std::vector<double>{1, 2, 3}, 0, ForwardMode{}), IndexError);
  EXPECT_THROW(m.denoise(H, std::vector<double>{1, 2, 3}, 101, ForwardMode{}), IndexError);
}

TEST(TimestepEmbedding, DeterministicDistinctAndTrainable) {
  DenoiseModel m(small_config(), kSpec, 10);
  EXPECT_EQ(values(m.timestep_embedding(7)), values(m.timestep_embedding(7)));
  const auto a = values(m.timestep_embedding(1));
  const auto b = values(m.timestep_embedding(100));
  double dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_GT(dist, 0.0);

  Tensor w = m.params().get("time_proj.weight");
  ad::backward(ad::sum(ad::mul(m.timestep_embedding(33), m.timestep_embedding(33))));
  ASSERT_TRUE(w.has_grad());
  EXPECT_TRUE(std::any_of(w.grad().begin(), w.grad().end(), [](double g) { return g != 0.0; }));
}

TEST(DenoiseModel, WholeModelGradientCheck) {
  ModelConfig c = small_config();
  c.k = 8;
  c.dropout = 0.0;
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    DenoiseModel m(c, kSpec, 20 + trial);
    std::vector<Tensor> inputs = m.params().tensors();
    const std::size_t n = 3;
    inputs.push_back(Tensor::parameter({n, c.k}, random_values(n * c.k, rng)));
    const auto y = random_values(n, rng);
    const auto result = ad::check_gradients(
        [&](const std::vector<Tensor>& in) {
          const Tensor out = m.denoise(m.encode(in.back(), {}, ForwardMode{}), y, 60, ForwardMode{});
          return ad::sum(ad::mul(out, Tensor::constant({n}, {0.7, -1.1, 0.4})));
        },
        inputs);
    EXPECT_LT(result.max_rel_error, 1e-4);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  DenoiseModel m(small_config(), kSpec, 12);
  testing::TempDir dir;
  save_checkpoint(m, dir / "m.ckpt");
  const DenoiseModel back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.schedule(), m.schedule());
  ASSERT_EQ(back.params().size(), m.params().size());
  EXPECT_EQ(back.params().scalar_count(), m.params().scalar_count());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(back.params().entries()[i].first, m.params().entries()[i].first);
    EXPECT_EQ(values(back.params().entries()[i].second), values(m.params().entries()[i].second));
  }
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(m));

  Rng rng(13);
  const auto x = random_values(6 * 5, rng);
  const auto y = random_values(6, rng);
  EXPECT_EQ(predict(back, x, y, 77), predict(m, x, y, 77));
}

TEST(Checkpoint, RejectsMismatchedConfigAndSchedule) {
  DenoiseModel m(small_config(), kSpec, 13);
  testing::TempDir dir;
  save_checkpoint(m, dir / "m.ckpt");
  ModelConfig wider = small_config();
  wider.d_model = 32;
  EXPECT_THROW(load_params(dir / "m.ckpt", wider, kSpec), IncompatibleError);
  EXPECT_THROW(load_params(dir / "m.ckpt", small_config(), ScheduleSpec{ScheduleKind::kCosine, 100}),
               IncompatibleError);
  EXPECT_NO_THROW(load_params(dir / "m.ckpt", small_config(), kSpec));

  EXPECT_THROW(DenoiseModel(wider, kSpec, m.params().clone()), IncompatibleError);

  auto bytes = serialize_checkpoint(m);
  bytes[0] = 'Z';
  EXPECT_THROW(deserialize_checkpoint(bytes), IncompatibleError);
  bytes = serialize_checkpoint(m);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(deserialize_checkpoint(bytes), CorruptionError);
}

}  // namespace
}  // namespace denoiserank
