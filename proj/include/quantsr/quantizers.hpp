#pragma once

// Quantizers for weights and activations: a symmetric uniform quantizer with a
// clipped straight-through gradient, and the residual bit-plane (RBD) pair
// whose bit decisions and step sizes are learnable.
//
// Code set for b bits is always the signed range [-2^(b-1), 2^(b-1)-1]; the
// RBD weight code (S-1)/2 lands there by construction, the uniform and
// activation quantizers clamp into it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 8;
inline constexpr float kScaleFloor = 1e-8f;

inline void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw ConfigError("unsupported bit-width " + std::to_string(bits) + " (expected 1..8)");
  }
}

inline int code_min(int bits) { return -(1 << (bits - 1)); }
inline int code_max(int bits) { return (1 << (bits - 1)) - 1; }

/// Uniform step from data: 2 max|x| / (2^b - 1); 1 when x is all zero.
inline float step_from_max(float max_abs, int bits) {
  if (!(max_abs > 0.0f)) return 1.0f;
  return 2.0f * max_abs / static_cast<float>((1 << bits) - 1);
}

struct Quantized {
  CodeTensor codes;
  Tensor dequant;
};

// ---------------------------------------------------------------------------
// Uniform quantizer + STE

struct UniformQuantizer {
  int bits = 2;
  float step = 1.0f;        // v
  float clip_range = 2.0f;  // r_x: gradient passes for |x| < r_x

  static UniformQuantizer from_data(const Tensor& x, int bits) {
    check_bits(bits);
    UniformQuantizer q;
    q.bits = bits;
    q.step = step_from_max(x.max_abs(), bits);
    q.clip_range = static_cast<float>(1 << (bits - 1)) * q.step;
    return q;
  }
};

inline int uniform_code(float x, const UniformQuantizer& q) {
  const float z = std::round(x / q.step);
  return static_cast<int>(std::clamp(z, static_cast<float>(code_min(q.bits)), static_cast<float>(code_max(q.bits))));
}

inline Quantized uniform_quantize(const Tensor& x, const UniformQuantizer& q) {
  check_bits(q.bits);
  Quantized out{CodeTensor(x.shape), Tensor(x.shape)};
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const int k = uniform_code(x.data[i], q);
    out.codes.data[i] = static_cast<std::int8_t>(k);
    out.dequant.data[i] = static_cast<float>(k) * q.step;
  }
  return out;
}

inline Tensor uniform_backward(const Tensor& grad_out, const Tensor& x, const UniformQuantizer& q) {
  require_same_shape(grad_out, x, "uniform_backward");
  Tensor g(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float v = x.data[i];
    g.data[i] = (v > -q.clip_range && v < q.clip_range) ? grad_out.data[i] : 0.0f;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Transformation functions

inline float phi_w(float x) { return std::tanh(2.0f * x); }

inline float phi_w_grad(float x) {
  const double c = std::cosh(2.0 * static_cast<double>(x));
  return static_cast<float>(2.0 / (c * c));
}

/// Literal activation transform. Not used in the forward pass: for fractional
/// parts near 1 it rounds to floor(a) + 2, so the forward keeps plain rounding
/// and only the derivative below shapes the gradient.
inline float phi_a(float a) {
  const double fl = std::floor(static_cast<double>(a));
  const double f = static_cast<double>(a) - fl;
  return static_cast<float>(std::tanh(2.0 * f - 1.0) / std::tanh(1.0) + fl + 1.0);
}

inline float phi_a_grad(float a) {
  const double f = static_cast<double>(a) - std::floor(static_cast<double>(a));
  const double c = std::cosh(2.0 * f - 1.0);
  return static_cast<float>(2.0 / (c * c) / std::tanh(1.0));
}

// ---------------------------------------------------------------------------
// RBD weight quantizer

struct RbdWeightQuantizer {
  int bits = 2;
  Parameter scale;  // v_w, one per output channel
  Parameter gain;   // s_i, one per bit
  Parameter shift;  // tau_w,i, one per bit

  int channels() const { return static_cast<int>(scale.numel()); }
};

/// Per-element bit-determination record kept for the backward pass.
struct RbdWeightTrace {
  int bits = 0;
  std::vector<float> residual;  // r_i, element-major: [e * bits + i]
  std::vector<float> pre;       // u_i = s_i r_i - tau_i
};

struct RbdWeightResult {
  CodeTensor codes;
  Tensor dequant;
  RbdWeightTrace trace;
};

namespace detail {
// Leading dim is the output channel; rank-1 tensors form one channel.
inline int weight_channels(const Tensor& w) { return w.rank() >= 2 ? w.dim(0) : 1; }

inline std::size_t channel_size(const Tensor& w) {
  const int c = weight_channels(w);
  return c == 0 ? 0 : w.numel() / static_cast<std::size_t>(c);
}

inline float safe_scale(float v) { return v > kScaleFloor ? v : kScaleFloor; }
}  // namespace detail

/// Integer-domain target 2w/v + 1 that the bit planes approximate.
inline float rbd_target(float w, float scale) { return 2.0f * w / scale + 1.0f; }

/// Greedy MSB-first bit determination for one element. Returns S and fills
/// the residual/pre-activation of each bit when the out pointers are given.
inline int rbd_decide_bits(float target, int bits, const float* gain, const float* shift, float* residual = nullptr,
                           float* pre = nullptr) {
  float r = target;
  int s_sum = 0;
  for (int i = bits - 1; i >= 0; --i) {
    const float u = gain[i] * r - shift[i];
    const int q = phi_w(u) >= 0.0f ? 1 : -1;  // sign(0) = +1
    if (residual) residual[i] = r;
    if (pre) pre[i] = u;
    s_sum += q * (1 << i);
    r -= static_cast<float>(q * (1 << i));
  }
  return s_sum;
}

inline RbdWeightResult rbd_weight_quantize(const Tensor& w, const RbdWeightQuantizer& q) {
  check_bits(q.bits);
  const int channels = detail::weight_channels(w);
  if (q.channels() != channels) {
    throw ShapeError("rbd_weight_quantize: quantizer has " + std::to_string(q.channels()) + " channel scales for weight " +
                     shape_str(w.shape));
  }
  const std::size_t per = detail::channel_size(w);
  const int b = q.bits;
  RbdWeightResult out{CodeTensor(w.shape), Tensor(w.shape), RbdWeightTrace{b, {}, {}}};
  out.trace.residual.resize(w.numel() * b);
  out.trace.pre.resize(w.numel() * b);
  for (int c = 0; c < channels; ++c) {
    const float v = detail::safe_scale(q.scale.value.data[c]);
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t e = static_cast<std::size_t>(c) * per + j;
      const int s_sum = rbd_decide_bits(rbd_target(w.data[e], v), b, q.gain.value.data.data(), q.shift.value.data.data(),
                                        &out.trace.residual[e * b], &out.trace.pre[e * b]);
      const int code = (s_sum - 1) / 2;
      out.codes.data[e] = static_cast<std::int8_t>(code);
      out.dequant.data[e] = static_cast<float>(code) * v;
    }
  }
  return out;
}

/// Initializes v_w per channel by matching mean |w| against mean |S-1| under a
/// provisional uniform step; gains start at 1 and shifts at 0.
inline RbdWeightQuantizer rbd_weight_init(const Tensor& w, int bits, const std::string& prefix = "") {
  check_bits(bits);
  const int channels = detail::weight_channels(w);
  const std::size_t per = detail::channel_size(w);
  if (channels < 1 || per < 1) throw ShapeError("rbd_weight_init: empty weight " + shape_str(w.shape));
  RbdWeightQuantizer q;
  q.bits = bits;
  q.scale = Parameter(prefix + "v_w", Tensor({channels}, 1.0f));
  q.gain = Parameter(prefix + "s", Tensor({bits}, 1.0f));
  q.shift = Parameter(prefix + "tau_w", Tensor({bits}, 0.0f));
  for (int c = 0; c < channels; ++c) {
    const float* wc = w.data.data() + static_cast<std::size_t>(c) * per;
    float max_abs = 0.0f;
    double mean_abs_w = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      max_abs = std::max(max_abs, std::fabs(wc[j]));
      mean_abs_w += std::fabs(wc[j]);
    }
    mean_abs_w /= static_cast<double>(per);
    const float v0 = step_from_max(max_abs, bits);
    double mean_abs_code = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const int s_sum = rbd_decide_bits(rbd_target(wc[j], v0), bits, q.gain.value.data.data(), q.shift.value.data.data());
      mean_abs_code += std::abs(s_sum - 1);
    }
    mean_abs_code /= static_cast<double>(per);
    const double v = mean_abs_code > 0.0 ? 2.0 * mean_abs_w / mean_abs_code : 0.0;
    q.scale.value.data[c] = v > 0.0 ? static_cast<float>(v) : v0;
  }
  return q;
}

struct RbdWeightGrads {
  Tensor weight;
  Tensor scale;
  Tensor gain;
  Tensor shift;
};

/// Surrogate gradients: sign is replaced by phi_w in the derivative and the
/// residual chain through higher bits is detached. The scale gradient treats
/// S as constant. The weight gradient is zero outside the representable range
/// |2w/v + 1| <= 2^b.
inline RbdWeightGrads rbd_weight_backward(const Tensor& grad_out, const Tensor& w, const RbdWeightQuantizer& q,
                                          const RbdWeightTrace& trace) {
  require_same_shape(grad_out, w, "rbd_weight_backward");
  const int b = q.bits;
  if (trace.bits != b || trace.pre.size() != w.numel() * static_cast<std::size_t>(b)) {
    throw ShapeError("rbd_weight_backward: trace does not match forward call");
  }
  const int channels = detail::weight_channels(w);
  const std::size_t per = detail::channel_size(w);
  RbdWeightGrads g{Tensor(w.shape), Tensor({channels}), Tensor({b}), Tensor({b})};
  std::vector<double> acc_gain(b, 0.0), acc_shift(b, 0.0);
  const float limit = static_cast<float>(1 << b);
  for (int c = 0; c < channels; ++c) {
    const float v = detail::safe_scale(q.scale.value.data[c]);
    double acc_scale = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t e = static_cast<std::size_t>(c) * per + j;
      const float go = grad_out.data[e];
      if (go == 0.0f) continue;
      const float* r = &trace.residual[e * b];
      const float* u = &trace.pre[e * b];
      double dw = 0.0;
      int s_sum = 0;
      for (int i = 0; i < b; ++i) {
        const double dphi = phi_w_grad(u[i]);
        const double weight_i = static_cast<double>(1 << i);
        dw += weight_i * q.gain.value.data[i] * dphi;
        acc_gain[i] += go * 0.5 * weight_i * v * dphi * r[i];
        acc_shift[i] -= go * 0.5 * weight_i * v * dphi;
        // Recover q_i from the residual recursion: r_{i-1} = r_i - 2^i q_i.
        const int qi = (phi_w(u[i]) >= 0.0f) ? 1 : -1;
        s_sum += qi * (1 << i);
      }
      acc_scale += go * 0.5 * static_cast<double>(s_sum - 1);
      const float t = r[b - 1];
      g.weight.data[e] = (t >= -limit && t <= limit) ? static_cast<float>(go * dw) : 0.0f;
    }
    g.scale.data[c] = static_cast<float>(acc_scale);
  }
  for (int i = 0; i < b; ++i) {
    g.gain.data[i] = static_cast<float>(acc_gain[i]);
    g.shift.data[i] = static_cast<float>(acc_shift[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// RBD activation quantizer

struct RbdActQuantizer {
  int bits = 2;
  Parameter scale;  // v_a, per tensor
  Parameter shift;  // tau_a, per tensor
};

/// v_a from a calibration sample (same step rule as the uniform quantizer), tau_a = 0.
inline RbdActQuantizer rbd_act_init(const Tensor& sample, int bits, const std::string& prefix = "") {
  check_bits(bits);
  RbdActQuantizer q;
  q.bits = bits;
  q.scale = Parameter(prefix + "v_a", Tensor({1}, step_from_max(sample.max_abs(), bits)));
  q.shift = Parameter(prefix + "tau_a", Tensor({1}, 0.0f));
  return q;
}

inline float rbd_act_z(float a, float scale, float shift) { return (a + shift) / scale; }

inline Quantized rbd_act_quantize(const Tensor& a, const RbdActQuantizer& q) {
  check_bits(q.bits);
  const float v = detail::safe_scale(q.scale.scalar());
  const float tau = q.shift.scalar();
  const float lo = static_cast<float>(code_min(q.bits));
  const float hi = static_cast<float>(code_max(q.bits));
  Quantized out{CodeTensor(a.shape), Tensor(a.shape)};
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const float k = std::clamp(std::round(rbd_act_z(a.data[i], v, tau)), lo, hi);
    out.codes.data[i] = static_cast<std::int8_t>(k);
    out.dequant.data[i] = k * v;
  }
  return out;
}

struct RbdActGrads {
  Tensor input;
  float scale = 0.0f;
  float shift = 0.0f;
};

/// Inside the clamp range: d/da = phi_a'(z), d/dv = round(z) - z, d/dtau = phi_a'(z).
/// Saturated elements pass no input gradient and contribute the clamped code to d/dv.
inline RbdActGrads rbd_act_backward(const Tensor& grad_out, const Tensor& a, const RbdActQuantizer& q) {
  require_same_shape(grad_out, a, "rbd_act_backward");
  const float v = detail::safe_scale(q.scale.scalar());
  const float tau = q.shift.scalar();
  const float lo = static_cast<float>(code_min(q.bits));
  const float hi = static_cast<float>(code_max(q.bits));
  RbdActGrads g{Tensor(a.shape), 0.0f, 0.0f};
  double acc_scale = 0.0, acc_shift = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const float go = grad_out.data[i];
    const float z = rbd_act_z(a.data[i], v, tau);
    const float rz = std::round(z);
    if (rz < lo || rz > hi) {
      acc_scale += static_cast<double>(go) * (rz < lo ? lo : hi);
      continue;
    }
    const float ga = go * phi_a_grad(z);
    g.input.data[i] = ga;
    acc_shift += ga;
    acc_scale += static_cast<double>(go) * (static_cast<double>(rz) - z);
  }
  g.scale = static_cast<float>(acc_scale);
  g.shift = static_cast<float>(acc_shift);
  return g;
}

}  // namespace qsr
