#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "quantsr/quantsr.hpp"

using namespace qsr;

namespace {

RbdWeightQuantizer unit_quantizer(int bits, float scale) {
  RbdWeightQuantizer q;
  q.bits = bits;
  q.scale = Parameter("v_w", Tensor({1}, scale));
  q.gain = Parameter("s", Tensor({bits}, 1.0f));
  q.shift = Parameter("tau_w", Tensor({bits}, 0.0f));
  return q;
}

RbdActQuantizer act_quantizer(int bits, float scale, float shift) {
  RbdActQuantizer q;
  q.bits = bits;
  q.scale = Parameter("v_a", Tensor({1}, scale));
  q.shift = Parameter("tau_a", Tensor({1}, shift));
  return q;
}

}  // namespace

TEST(Uniform, HandExample) {
  const Tensor x({3}, {-1.0f, 0.5f, 1.0f});
  const auto q = UniformQuantizer::from_data(x, 2);
  EXPECT_FLOAT_EQ(q.step, 2.0f / 3.0f);
  const Quantized r = uniform_quantize(x, q);
  EXPECT_EQ(r.codes.data, (std::vector<std::int8_t>{-2, 1, 1}));
  EXPECT_FLOAT_EQ(r.dequant.data[0], -4.0f / 3.0f);
  EXPECT_FLOAT_EQ(r.dequant.data[1], 2.0f / 3.0f);
  EXPECT_FLOAT_EQ(r.dequant.data[2], 2.0f / 3.0f);
}

TEST(Uniform, ZeroInputAndGrid) {
  const Tensor z({4});
  const auto q0 = UniformQuantizer::from_data(z, 3);
  EXPECT_EQ(q0.step, 1.0f);
  for (float v : uniform_quantize(z, q0).dequant.data) EXPECT_EQ(v, 0.0f);

  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({500}, rng, -3.0f, 3.0f);
  for (int b = 1; b <= 8; ++b) {
    const auto q = UniformQuantizer::from_data(x, b);
    const Quantized r = uniform_quantize(x, q);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      ASSERT_GE(r.codes.data[i], code_min(b));
      ASSERT_LE(r.codes.data[i], code_max(b));
      ASSERT_EQ(r.dequant.data[i], static_cast<float>(r.codes.data[i]) * q.step);
    }
  }
  EXPECT_THROW(UniformQuantizer::from_data(x, 9), ConfigError);
  EXPECT_THROW(UniformQuantizer::from_data(x, 0), ConfigError);
}

TEST(Uniform, StraightThroughMask) {
  UniformQuantizer q;
  q.bits = 2;
  q.step = 0.5f;
  q.clip_range = 1.0f;
  const Tensor x({5}, {0.2f, -0.9f, 2.0f, 1.0f, -1.5f});
  const Tensor g({5}, {1, 2, 3, 4, 5});
  const Tensor out = uniform_backward(g, x, q);
  const std::vector<float> expected{1, 2, 0, 0, 0};
  EXPECT_EQ(out.data, expected);
}

TEST(PhiW, Values) {
  EXPECT_FLOAT_EQ(phi_w(0.0f), 0.0f);
  EXPECT_FLOAT_EQ(phi_w_grad(0.0f), 2.0f);
  EXPECT_NEAR(phi_w(0.5f), 0.76159, 1e-5);
  EXPECT_NEAR(phi_w_grad(0.5f), 0.83995, 1e-5);
  std::mt19937_64 rng(2);
  std::normal_distribution<float> d(0.0f, 3.0f);
  for (int i = 0; i < 10000; ++i) {
    const float x = d(rng);
    if (x == 0.0f) continue;
    ASSERT_EQ(phi_w(x) > 0.0f, x > 0.0f) << x;
  }
}

TEST(PhiW, GradientFiniteDifferences) {
  for (double x : {-1.3, -0.4, 0.0, 0.2, 0.5, 1.1}) {
    const double fd = (std::tanh(2.0 * (x + 1e-4)) - std::tanh(2.0 * (x - 1e-4))) / 2e-4;
    EXPECT_LT(std::fabs(phi_w_grad(static_cast<float>(x)) - fd) / std::fabs(fd), 1e-4) << x;
  }
}

TEST(PhiA, Values) {
  EXPECT_NEAR(phi_a_grad(0.5f), 2.0 / std::tanh(1.0), 1e-5);
  EXPECT_NEAR(phi_a_grad(0.5f), 2.6261, 1e-4);
  EXPECT_NEAR(phi_a_grad(0.0f), 1.1028, 1e-4);
  EXPECT_NEAR(phi_a_grad(3.0f), phi_a_grad(0.0f), 1e-6);
  for (float a : {0.1f, 0.37f, 0.8f}) {
    EXPECT_NEAR(phi_a_grad(a), phi_a_grad(a + 2.0f), 1e-5);
    EXPECT_NEAR(phi_a_grad(a), phi_a_grad(a - 5.0f), 1e-5);
  }
}

TEST(PhiA, GradientFiniteDifferences) {
  for (double a : {0.1, 0.3, 0.5, 0.77, 1.4, -0.6, -2.25}) {
    const double h = 1e-4;
    const double fd = (static_cast<double>(phi_a(static_cast<float>(a + h))) - phi_a(static_cast<float>(a - h))) / (2 * h);
    // phi_a is evaluated in float; compare against a double-precision difference of the same formula
    auto f = [](double v) {
      const double fl = std::floor(v);
      return std::tanh(2.0 * (v - fl) - 1.0) / std::tanh(1.0) + fl + 1.0;
    };
    const double fd64 = (f(a + h) - f(a - h)) / (2 * h);
    EXPECT_LT(std::fabs(phi_a_grad(static_cast<float>(a)) - fd64) / fd64, 1e-4) << a;
    EXPECT_NEAR(fd, fd64, 1e-2);
  }
}

TEST(RbdWeight, InitHandExample) {
  const Tensor w({1, 2}, {0.5f, -0.5f});
  const RbdWeightQuantizer q = rbd_weight_init(w, 2);
  EXPECT_FLOAT_EQ(q.scale.value.data[0], 0.5f);
  EXPECT_EQ(q.gain.value.data, (std::vector<float>{1, 1}));
  EXPECT_EQ(q.shift.value.data, (std::vector<float>{0, 0}));
  // the provisional pass: v0 = 1/3, t = [4, -2] -> S = [3, -1]
  const float g[2] = {1, 1}, s[2] = {0, 0};
  EXPECT_EQ(rbd_decide_bits(rbd_target(0.5f, 1.0f / 3.0f), 2, g, s), 3);
  EXPECT_EQ(rbd_decide_bits(rbd_target(-0.5f, 1.0f / 3.0f), 2, g, s), -1);
}

TEST(RbdWeight, InitZeroChannelFallback) {
  const Tensor w({2, 3}, {0, 0, 0, 0.1f, -0.2f, 0.3f});
  const RbdWeightQuantizer q = rbd_weight_init(w, 2);
  EXPECT_EQ(q.scale.value.data[0], 1.0f);
  EXPECT_GT(q.scale.value.data[1], 0.0f);
}

TEST(RbdWeight, InitScaleAlwaysPositive) {
  std::mt19937_64 rng(3);
  for (int b = 1; b <= 8; ++b) {
    const Tensor w = oracle::random_tensor({6, 3, 3, 3}, rng, -0.2f, 0.2f);
    for (float v : rbd_weight_init(w, b).scale.value.data) ASSERT_GT(v, 0.0f);
  }
}

TEST(RbdWeight, QuantizeHandTraces) {
  const auto q = unit_quantizer(2, 1.0f);
  const auto r = rbd_weight_quantize(Tensor({1, 3}, {0.6f, 0.0f, -1.0f}), q);
  EXPECT_EQ(r.codes.data, (std::vector<std::int8_t>{1, 0, -1}));
  EXPECT_FLOAT_EQ(r.dequant.data[0], 1.0f);
  EXPECT_FLOAT_EQ(r.dequant.data[1], 0.0f);
  EXPECT_FLOAT_EQ(r.dequant.data[2], -1.0f);
  // w = 0.6: t = 2.2, q1 = +1 leaves r0 = 0.2
  EXPECT_FLOAT_EQ(r.trace.residual[0 * 2 + 1], 2.2f);
  EXPECT_NEAR(r.trace.residual[0 * 2 + 0], 0.2f, 1e-6);
  // w = 0: t = 1, q1 = +1, r0 = -1, q0 = -1
  EXPECT_FLOAT_EQ(r.trace.residual[1 * 2 + 0], -1.0f);
}

TEST(RbdWeight, CodeSetContainment) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (int b = 1; b <= 8; ++b) {
    Tensor w({4, 64});
    for (auto& v : w.data) v = d(rng);
    auto q = rbd_weight_init(w, b);
    // perturb the redistribution parameters away from init
    for (auto& v : q.gain.value.data) v = 0.5f + std::fabs(d(rng));
    for (auto& v : q.shift.value.data) v = 0.3f * d(rng);
    const auto r = rbd_weight_quantize(w, q);
    for (std::size_t i = 0; i < w.numel(); ++i) {
      ASSERT_GE(r.codes.data[i], code_min(b));
      ASSERT_LE(r.codes.data[i], code_max(b));
      ASSERT_FLOAT_EQ(r.dequant.data[i], r.codes.data[i] * q.scale.value.data[i / 64]);
    }
  }
}

TEST(RbdWeight, GreedyIsNearestAtInit) {
  std::mt19937_64 rng(5);
  for (int b = 1; b <= 6; ++b) {
    const float lim = static_cast<float>((1 << b) - 1);
    std::uniform_real_distribution<float> d(-lim, lim);
    std::vector<float> gain(b, 1.0f), shift(b, 0.0f);
    for (int i = 0; i < 5000; ++i) {
      const float t = d(rng);
      const int s = rbd_decide_bits(t, b, gain.data(), shift.data());
      ASSERT_NEAR(std::fabs(t - s), oracle::nearest_code_distance(t, b), 1e-6) << "b=" << b << " t=" << t;
    }
    // exact midpoints: sign(0) = +1 resolves toward the upper code
    for (int even = -(1 << b) + 2; even <= (1 << b) - 2; even += 2) {
      const int s = rbd_decide_bits(static_cast<float>(even), b, gain.data(), shift.data());
      EXPECT_EQ(s, even + 1) << "b=" << b;
    }
  }
}

TEST(RbdWeight, MonotoneAtInit) {
  std::mt19937_64 rng(6);
  Tensor w = oracle::random_tensor({1, 2000}, rng);
  std::sort(w.data.begin(), w.data.end());
  for (int b = 1; b <= 4; ++b) {
    const auto q = rbd_weight_init(w, b);
    const auto r = rbd_weight_quantize(w, q);
    for (std::size_t i = 1; i < w.numel(); ++i) ASSERT_LE(r.codes.data[i - 1], r.codes.data[i]);
  }
}

TEST(RbdWeight, BackwardZeroGradOut) {
  std::mt19937_64 rng(7);
  const Tensor w = oracle::random_tensor({2, 8}, rng);
  const auto q = rbd_weight_init(w, 2);
  const auto r = rbd_weight_quantize(w, q);
  const auto g = rbd_weight_backward(Tensor(w.shape), w, q, r.trace);
  for (const Tensor* t : {&g.weight, &g.scale, &g.gain, &g.shift})
    for (float v : t->data) EXPECT_EQ(v, 0.0f);
}

TEST(RbdWeight, ScaleGradientHandExample) {
  const auto q = unit_quantizer(2, 1.0f);
  const Tensor w({1, 1}, {0.6f});
  const auto r = rbd_weight_quantize(w, q);
  const auto g = rbd_weight_backward(Tensor({1, 1}, 1.0f), w, q, r.trace);
  EXPECT_FLOAT_EQ(g.scale.data[0], 1.0f);
}

// The weight, gain and shift gradients are derivatives of the surrogate
// forward (sign -> tanh(2u)) with the higher-bit residual offsets held fixed.
TEST(RbdWeight, GradientsMatchSurrogateFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (int b : {1, 2, 3, 4}) {
    const Tensor w = oracle::random_tensor({2, 5}, rng, -0.3f, 0.3f);
    auto q = rbd_weight_init(w, b);
    std::uniform_real_distribution<float> pd(-0.2f, 0.2f);
    for (auto& v : q.gain.value.data) v = 0.3f + 0.1f * pd(rng);  // soft surrogate so derivatives are visible
    for (auto& v : q.shift.value.data) v = pd(rng);
    const auto r = rbd_weight_quantize(w, q);
    const Tensor go = oracle::random_tensor(w.shape, rng);
    const auto g = rbd_weight_backward(go, w, q, r.trace);

    const std::size_t per = 5;
    std::vector<std::vector<double>> offsets(w.numel(), std::vector<double>(b));
    for (std::size_t e = 0; e < w.numel(); ++e) {
      const double t = 2.0 * w.data[e] / q.scale.value.data[e / per] + 1.0;
      for (int i = 0; i < b; ++i) offsets[e][i] = t - r.trace.residual[e * b + i];
    }
    auto surrogate_loss = [&](const std::vector<double>& wv, const std::vector<double>& gain, const std::vector<double>& shift) {
      double s = 0.0;
      for (std::size_t e = 0; e < wv.size(); ++e)
        s += go.data[e] * oracle::rbd_surrogate(wv[e], q.scale.value.data[e / per], gain, shift, offsets[e]);
      return s;
    };
    std::vector<double> wv(w.data.begin(), w.data.end()), gain(q.gain.value.data.begin(), q.gain.value.data.end()),
        shift(q.shift.value.data.begin(), q.shift.value.data.end());
    const double h = 1e-5;
    std::vector<double> fd_w(wv.size()), fd_g(b), fd_s(b);
    for (std::size_t e = 0; e < wv.size(); ++e) {
      auto p = wv, m = wv;
      p[e] += h;
      m[e] -= h;
      fd_w[e] = (surrogate_loss(p, gain, shift) - surrogate_loss(m, gain, shift)) / (2 * h);
      // straight-through clip: no weight gradient once the target leaves [-2^b, 2^b]
      const double t = 2.0 * wv[e] / q.scale.value.data[e / per] + 1.0;
      if (std::fabs(t) > std::ldexp(1.0, b)) fd_w[e] = 0.0;
    }
    for (int i = 0; i < b; ++i) {
      auto p = gain, m = gain;
      p[i] += h;
      m[i] -= h;
      fd_g[i] = (surrogate_loss(wv, p, shift) - surrogate_loss(wv, m, shift)) / (2 * h);
      p = shift;
      m = shift;
      p[i] += h;
      m[i] -= h;
      fd_s[i] = (surrogate_loss(wv, gain, p) - surrogate_loss(wv, gain, m)) / (2 * h);
    }
    EXPECT_LT(oracle::rel_error(oracle::to_double(g.weight), fd_w), 1e-3) << "b=" << b;
    EXPECT_LT(oracle::rel_error(oracle::to_double(g.gain), fd_g), 1e-3) << "b=" << b;
    EXPECT_LT(oracle::rel_error(oracle::to_double(g.shift), fd_s), 1e-3) << "b=" << b;

    // scale: d/dv of 0.5 (S - 1) v with the codes held fixed
    std::vector<double> fd_v(2, 0.0);
    for (std::size_t e = 0; e < w.numel(); ++e) fd_v[e / per] += go.data[e] * (r.dequant.data[e] / q.scale.value.data[e / per]);
    EXPECT_LT(oracle::rel_error(oracle::to_double(g.scale), fd_v), 1e-5) << "b=" << b;
  }
}

TEST(RbdAct, Examples) {
  const auto q = act_quantizer(2, 0.5f, 0.0f);
  const Tensor a({3}, {0.3f, 10.0f, -1.0f});
  const Quantized r = rbd_act_quantize(a, q);
  EXPECT_EQ(r.codes.data, (std::vector<std::int8_t>{1, 1, -2}));
  EXPECT_FLOAT_EQ(r.dequant.data[0], 0.5f);
  EXPECT_FLOAT_EQ(r.dequant.data[1], 0.5f);
  EXPECT_FLOAT_EQ(r.dequant.data[2], -1.0f);
  const RbdActGrads g = rbd_act_backward(Tensor({3}, 1.0f), a, q);
  EXPECT_EQ(g.input.data[1], 0.0f);
  EXPECT_NE(g.input.data[0], 0.0f);
}

TEST(RbdAct, OnGridFixedPoint) {
  const auto q = act_quantizer(4, 0.25f, 0.0f);
  for (int k = code_min(4); k <= code_max(4); ++k) {
    const Tensor a({1}, {k * 0.25f});
    EXPECT_EQ(rbd_act_quantize(a, q).dequant.data[0], a.data[0]);
  }
}

TEST(RbdAct, InitAndFloor) {
  const Tensor sample({4}, {-2.0f, 0.5f, 1.0f, 3.0f});
  const auto q = rbd_act_init(sample, 2);
  EXPECT_FLOAT_EQ(q.scale.scalar(), 2.0f);
  EXPECT_EQ(q.shift.scalar(), 0.0f);
  auto bad = act_quantizer(2, -1.0f, 0.0f);
  const Quantized r = rbd_act_quantize(Tensor({1}, {1e-9f}), bad);
  EXPECT_TRUE(r.dequant.all_finite());
}

TEST(RbdAct, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  auto q = act_quantizer(3, 0.3f, 0.05f);
  Tensor a = oracle::random_tensor({64}, rng, -1.6f, 1.6f);
  // keep every z away from the integer and half-integer discontinuities
  for (auto& v : a.data) {
    const float z = (v + 0.05f) / 0.3f;
    const float f = z - std::floor(z);
    if (std::fabs(f - 0.5f) < 0.02f || f < 0.02f || f > 0.98f) v += 0.01f;
  }
  const Tensor go = oracle::random_tensor({64}, rng);
  const RbdActGrads g = rbd_act_backward(go, a, q);
  const double v = q.scale.scalar(), tau = q.shift.scalar();
  const double lo = code_min(3), hi = code_max(3);
  // surrogate: inside the range v * phi_a(z) shapes d/da and d/dtau;
  // the scale follows v * (z + (round(z) - z) held)
  auto phi = [](double z) {
    const double fl = std::floor(z);
    return std::tanh(2.0 * (z - fl) - 1.0) / std::tanh(1.0) + fl + 1.0;
  };
  const double h = 1e-6;
  std::vector<double> fd_a(64, 0.0);
  double fd_tau = 0.0, fd_v = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double z = (a.data[i] + tau) / v;
    const double rz = std::round(z);
    if (rz < lo || rz > hi) {
      fd_v += go.data[i] * (rz < lo ? lo : hi);
      continue;
    }
    const double d = (v * phi((a.data[i] + h + tau) / v) - v * phi((a.data[i] - h + tau) / v)) / (2 * h);
    fd_a[i] = go.data[i] * d;
    fd_tau += go.data[i] * (v * phi((a.data[i] + tau + h) / v) - v * phi((a.data[i] + tau - h) / v)) / (2 * h);
    const double held = rz - z;
    auto fv = [&](double vv) { return vv * ((a.data[i] + tau) / vv + held); };
    fd_v += go.data[i] * (fv(v + h) - fv(v - h)) / (2 * h);
  }
  EXPECT_LT(oracle::rel_error(oracle::to_double(g.input), fd_a), 1e-3);
  EXPECT_LT(std::fabs(g.shift - fd_tau) / std::fabs(fd_tau), 1e-3);
  EXPECT_LT(std::fabs(g.scale - fd_v) / std::max(1e-6, std::fabs(fd_v)), 1e-3);
}

TEST(RbdAct, CodeSetContainment) {
  std::mt19937_64 rng(10);
  const Tensor a = oracle::random_tensor({1000}, rng, -5.0f, 5.0f);
  for (int b = 1; b <= 8; ++b) {
    const auto q = act_quantizer(b, 0.07f, 0.3f);
    for (auto c : rbd_act_quantize(a, q).codes.data) {
      ASSERT_GE(c, code_min(b));
      ASSERT_LE(c, code_max(b));
    }
  }
}
