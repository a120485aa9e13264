#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "quantsr/quantsr.hpp"

using namespace qsr;

namespace {

Tensor ones(const Shape& s) { return Tensor(s, 1.0f); }

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += static_cast<double>(a.data[i]) * b.data[i];
  return s;
}

}  // namespace

TEST(Tensor, ShapeMismatchOnConstruction) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_TRUE(t.all_finite());
  t.data[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "t"), NumericError);
}

TEST(Conv2d, ScalarScaling) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 1, 1}, {2});
  const Tensor y = conv2d(x, w);
  EXPECT_EQ(y.data, (std::vector<float>{2, 4, 6, 8}));
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({2, 3, 5, 4}, rng);
  Tensor w({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) w.at(c, c, 1, 1) = 1.0f;
  EXPECT_EQ(conv2d(x, w).data, x.data);
}

TEST(Conv2d, AllOnesZeroPad) {
  const Tensor y = conv2d(ones({1, 1, 2, 2}), ones({1, 1, 3, 3}));
  EXPECT_EQ(y.data, (std::vector<float>{4, 4, 4, 4}));
}

TEST(Conv2d, MatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({2, 3, 7, 6}, rng);
  const Tensor w = oracle::random_tensor({5, 3, 3, 3}, rng);
  EXPECT_LT(oracle::rel_error(oracle::to_double(conv2d(x, w)), oracle::naive_conv2d(x, w)), 1e-6);
  const Tensor w5 = oracle::random_tensor({2, 3, 5, 5}, rng);
  EXPECT_LT(oracle::rel_error(oracle::to_double(conv2d(x, w5)), oracle::naive_conv2d(x, w5)), 1e-6);
}

TEST(Conv2d, Linearity) {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({1, 4, 6, 6}, rng), y = oracle::random_tensor({1, 4, 6, 6}, rng);
  const Tensor w = oracle::random_tensor({3, 4, 3, 3}, rng);
  const float a = 0.7f, b = -1.3f;
  Tensor mix(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
  const Tensor lhs = conv2d(mix, w), cx = conv2d(x, w), cy = conv2d(y, w);
  std::vector<double> rhs(lhs.numel());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = a * cx.data[i] + b * cy.data[i];
  EXPECT_LT(oracle::rel_error(oracle::to_double(lhs), rhs), 1e-5);
}

TEST(Conv2d, ShapeErrorsNameDimensions) {
  try {
    conv2d(Tensor({1, 3, 4, 4}), Tensor({2, 4, 3, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos);
  }
  EXPECT_THROW(conv2d(Tensor({1, 1, 4, 4}), Tensor({1, 1, 2, 2})), ShapeError);
}

TEST(Conv2dBackward, SumLossIdentityKernel) {
  Tensor x({1, 1, 3, 3}, 0.5f);
  Tensor w({1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0f;
  const ConvGrads g = conv2d_backward(ones({1, 1, 3, 3}), x, w);
  for (float v : g.input.data) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(Conv2dBackward, ZeroGradOut) {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng), w = oracle::random_tensor({2, 2, 3, 3}, rng);
  const ConvGrads g = conv2d_backward(Tensor({1, 2, 4, 4}), x, w);
  for (float v : g.input.data) EXPECT_EQ(v, 0.0f);
  for (float v : g.weight.data) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2dBackward, FiniteDifferences) {
  std::mt19937_64 rng(5);
  Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng), w = oracle::random_tensor({2, 2, 3, 3}, rng);
  const Tensor r = oracle::random_tensor({1, 2, 4, 4}, rng);
  auto loss = [&] { return dot(conv2d(x, w), r); };
  const ConvGrads g = conv2d_backward(r, x, w);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.input), oracle::numeric_grad(x, loss, 1e-3)), 1e-3);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.weight), oracle::numeric_grad(w, loss, 1e-3)), 1e-3);
  EXPECT_THROW(conv2d_backward(Tensor({1, 3, 4, 4}), x, w), ShapeError);
}

TEST(Prelu, Examples) {
  const Tensor slope({1}, {0.25f});
  const Tensor y = prelu(Tensor({1, 1, 1, 3}, {-2.0f, 3.0f, 0.0f}), slope);
  EXPECT_FLOAT_EQ(y.data[0], -0.5f);
  EXPECT_FLOAT_EQ(y.data[1], 3.0f);
  EXPECT_FLOAT_EQ(y.data[2], 0.0f);
  EXPECT_THROW(prelu(Tensor({1, 3, 2, 2}), Tensor({2})), ShapeError);
}

TEST(Prelu, FiniteDifferences) {
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({2, 3, 3, 3}, rng);
  for (auto& v : x.data)
    if (std::fabs(v) < 0.05f) v = 0.3f;  // keep away from the kink
  Tensor slope = oracle::random_tensor({3}, rng, 0.1f, 0.4f);
  const Tensor r = oracle::random_tensor(x.shape, rng);
  auto loss = [&] { return dot(prelu(x, slope), r); };
  const PreluGrads g = prelu_backward(r, x, slope);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.input), oracle::numeric_grad(x, loss, 1e-3)), 1e-3);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.slope), oracle::numeric_grad(slope, loss, 1e-3)), 1e-3);
}

TEST(PixelShuffle, IndexMapping) {
  const Tensor y = pixel_shuffle(Tensor({1, 4, 1, 1}, {1, 2, 3, 4}), 2);
  EXPECT_EQ(y.shape, (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.data, (std::vector<float>{1, 2, 3, 4}));
  EXPECT_THROW(pixel_shuffle(Tensor({1, 3, 1, 1}), 2), ShapeError);
}

TEST(PixelShuffle, IdentityRoundtripAndMultiset) {
  std::mt19937_64 rng(7);
  const Tensor x = oracle::random_tensor({2, 8, 3, 5}, rng);
  EXPECT_EQ(pixel_shuffle(x, 1).data, x.data);
  const Tensor y = pixel_shuffle(x, 2);
  EXPECT_EQ(y.shape, (Shape{2, 2, 6, 10}));
  EXPECT_EQ(pixel_unshuffle(y, 2).data, x.data);
  auto a = x.data, b = y.data;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(PixelShuffle, BackwardFiniteDifferences) {
  std::mt19937_64 rng(8);
  Tensor x = oracle::random_tensor({1, 8, 2, 3}, rng);
  const Tensor r = oracle::random_tensor({1, 2, 4, 6}, rng);
  auto loss = [&] { return dot(pixel_shuffle(x, 2), r); };
  EXPECT_LT(oracle::rel_error(oracle::to_double(pixel_shuffle_backward(r, 2)), oracle::numeric_grad(x, loss, 1e-3)), 1e-3);
}

TEST(AddScaled, Examples) {
  std::mt19937_64 rng(9);
  const Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng), y = oracle::random_tensor({1, 2, 3, 3}, rng);
  EXPECT_EQ(add_scaled(x, y, 0.0f).data, x.data);
  const Tensor twice = add_scaled(x, x, 1.0f);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(twice.data[i], 2.0f * x.data[i]);
  EXPECT_THROW(add_scaled(x, Tensor({1, 2, 3, 2}), 1.0f), ShapeError);
}

TEST(AddScaled, FiniteDifferences) {
  std::mt19937_64 rng(10);
  Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng), y = oracle::random_tensor({1, 2, 3, 3}, rng);
  const Tensor r = oracle::random_tensor(x.shape, rng);
  Tensor alpha({1}, 0.8f);
  auto loss = [&] { return dot(add_scaled(x, y, alpha.data[0]), r); };
  const AddScaledGrads g = add_scaled_backward(r, y, alpha.data[0]);
  EXPECT_LT(oracle::rel_error({g.alpha}, oracle::numeric_grad(alpha, loss, 1e-3)), 1e-4);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.x), oracle::numeric_grad(x, loss, 1e-3)), 1e-3);
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.y), oracle::numeric_grad(y, loss, 1e-3)), 1e-3);
}

TEST(Losses, Examples) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(l1_loss(a, a), 0.0f);
  EXPECT_EQ(mse_loss(a, a), 0.0f);
  Tensor b = a;
  for (auto& v : b.data) v -= 0.5f;
  EXPECT_FLOAT_EQ(l1_loss(a, b), 0.5f);
  EXPECT_FLOAT_EQ(mse_loss(a, b), 0.25f);
  EXPECT_THROW(l1_loss(Tensor({0}), Tensor({0})), ShapeError);
  EXPECT_THROW(mse_loss(a, Tensor({3, 2})), ShapeError);
}

TEST(Losses, FiniteDifferences) {
  std::mt19937_64 rng(11);
  Tensor p = oracle::random_tensor({2, 3, 4}, rng);
  const Tensor t = oracle::random_tensor({2, 3, 4}, rng);
  for (std::size_t i = 0; i < p.numel(); ++i)
    if (std::fabs(p.data[i] - t.data[i]) < 0.05f) p.data[i] += 0.2f;
  const Tensor gm = mse_loss_grad(p, t);
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_FLOAT_EQ(gm.data[i], 2.0f * (p.data[i] - t.data[i]) / p.numel());
  EXPECT_LT(oracle::rel_error(oracle::to_double(gm), oracle::numeric_grad(p, [&] { return (double)mse_loss(p, t); }, 1e-3)),
            1e-3);
  EXPECT_LT(oracle::rel_error(oracle::to_double(l1_loss_grad(p, t)),
                              oracle::numeric_grad(p, [&] { return (double)l1_loss(p, t); }, 1e-3)),
            1e-3);
}
