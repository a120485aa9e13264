#pragma once

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

namespace detail {

// Unfolds one image (C,H,W) into rows of a (C*K*K, ld) patch matrix with zero
// padding; the image occupies H*W consecutive columns of each row.
inline void im2col(const float* img, int channels, int height, int width, int ksize, float* col, std::size_t ld) {
  const int pad = ksize / 2;
  const int hw = height * width;
  for (int c = 0; c < channels; ++c) {
    const float* plane = img + static_cast<std::size_t>(c) * hw;
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        float* row = col + static_cast<std::size_t>((c * ksize + ky) * ksize + kx) * ld;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          float* dst = row + static_cast<std::size_t>(y) * width;
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height || x0 >= x1) {
            std::fill(dst, dst + width, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(sy) * width;
          std::fill(dst, dst + x0, 0.0f);
          std::copy(src + x0 + dx, src + x1 + dx, dst + x0);
          std::fill(dst + x1, dst + width, 0.0f);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
inline void col2im(const float* col, int channels, int height, int width, int ksize, float* img, std::size_t ld) {
  const int pad = ksize / 2;
  const int hw = height * width;
  for (int c = 0; c < channels; ++c) {
    float* plane = img + static_cast<std::size_t>(c) * hw;
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const float* row = col + static_cast<std::size_t>((c * ksize + ky) * ksize + kx) * ld;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          const float* src = row + static_cast<std::size_t>(y) * width;
          float* dst = plane + static_cast<std::size_t>(sy) * width;
          for (int x = x0; x < x1; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
}

// Per-thread scratch buffers reused across conv calls (contents undefined).
inline float* scratch(int slot, std::size_t n) {
  thread_local std::vector<float> bufs[3];
  auto& b = bufs[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

// Batch-wide patch matrix: (C*K*K, N*H*W), image n in columns [n*H*W, (n+1)*H*W).
inline float* im2col_batch(const Tensor& input, int ksize, int slot) {
  const int n_batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w, ld = hw * n_batch;
  float* col = scratch(slot, static_cast<std::size_t>(cin) * ksize * ksize * ld);
  for (int n = 0; n < n_batch; ++n) im2col(input.data.data() + n * cin * hw, cin, h, w, ksize, col + n * hw, ld);
  return col;
}

// (N, C, HW) <-> (C, N*HW)
inline void nchw_to_cm(const float* src, int n_batch, int c, std::size_t hw, float* dst) {
  for (int n = 0; n < n_batch; ++n)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(src + (static_cast<std::size_t>(n) * c + ch) * hw, hw, dst + (static_cast<std::size_t>(ch) * n_batch + n) * hw);
}

inline void cm_to_nchw(const float* src, int n_batch, int c, std::size_t hw, float* dst) {
  for (int n = 0; n < n_batch; ++n)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(src + (static_cast<std::size_t>(ch) * n_batch + n) * hw, hw, dst + (static_cast<std::size_t>(n) * c + ch) * hw);
}

inline void check_conv_shapes(const Tensor& input, const Tensor& weight, const char* what) {
  require_rank(input, 4, what);
  require_rank(weight, 4, what);
  if (weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
    throw ShapeError(std::string(what) + ": kernel must be square and odd-sized, got " + shape_str(weight.shape));
  }
  if (input.dim(1) != weight.dim(1)) {
    throw ShapeError(std::string(what) + ": input channels " + std::to_string(input.dim(1)) +
                     " do not match weight input channels " + std::to_string(weight.dim(1)) + " (input " +
                     shape_str(input.shape) + ", weight " + shape_str(weight.shape) + ")");
  }
}

}  // namespace detail

/// Stride-1 convolution with same-size zero padding. input NCHW, weight OIKK.
inline Tensor conv2d(const Tensor& input, const Tensor& weight) {
  detail::check_conv_shapes(input, weight, "conv2d");
  const int n_batch = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), k = weight.dim(2);
  const int kdim = input.dim(1) * k * k;
  const std::size_t hw = static_cast<std::size_t>(h) * w, cols = hw * n_batch;
  Tensor out({n_batch, cout, h, w});
  if (out.empty()) return out;
  const float* col = detail::im2col_batch(input, k, 0);
  float* y = detail::scratch(1, static_cast<std::size_t>(cout) * cols);
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, cout, static_cast<int>(cols), kdim, 1.0f, weight.data.data(), kdim,
              col, static_cast<int>(cols), 0.0f, y, static_cast<int>(cols));
  detail::cm_to_nchw(y, n_batch, cout, hw, out.data.data());
  return out;
}

struct ConvGrads {
  Tensor input;
  Tensor weight;
};

/// Gradients of conv2d w.r.t. both arguments. Pass need_input=false to skip
/// the input gradient (first layer).
inline ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                                 bool need_input = true) {
  detail::check_conv_shapes(input, weight, "conv2d_backward");
  const int n_batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), k = weight.dim(2);
  const Shape expected{n_batch, cout, h, w};
  if (grad_out.shape != expected) {
    throw ShapeError("conv2d_backward: grad_out shape " + shape_str(grad_out.shape) + " expected " +
                     shape_str(expected));
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w, cols = hw * n_batch;
  const int kdim = cin * k * k;
  ConvGrads g{need_input ? Tensor(input.shape) : Tensor(), Tensor(weight.shape)};
  if (cols == 0) return g;
  const float* col = detail::im2col_batch(input, k, 0);
  float* gy = detail::scratch(1, static_cast<std::size_t>(cout) * cols);
  detail::nchw_to_cm(grad_out.data.data(), n_batch, cout, hw, gy);
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, cout, kdim, static_cast<int>(cols), 1.0f, gy,
              static_cast<int>(cols), col, static_cast<int>(cols), 0.0f, g.weight.data.data(), kdim);
  if (!need_input) return g;
  float* gcol = detail::scratch(2, static_cast<std::size_t>(kdim) * cols);
  cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kdim, static_cast<int>(cols), cout, 1.0f, weight.data.data(), kdim,
              gy, static_cast<int>(cols), 0.0f, gcol, static_cast<int>(cols));
  for (int n = 0; n < n_batch; ++n) detail::col2im(gcol + n * hw, cin, h, w, k, g.input.data.data() + n * cin * hw, cols);
  return g;
}

inline void add_channel_bias(Tensor& y, const Tensor& bias) {
  require_rank(y, 4, "add_channel_bias");
  if (static_cast<int>(bias.numel()) != y.dim(1)) {
    throw ShapeError("add_channel_bias: " + std::to_string(bias.numel()) + " biases for " + std::to_string(y.dim(1)) +
                     " channels");
  }
  const std::size_t hw = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  for (int n = 0; n < y.dim(0); ++n)
    for (int c = 0; c < y.dim(1); ++c) {
      float* p = &y.at(n, c, 0, 0);
      const float b = bias.data[c];
      for (std::size_t i = 0; i < hw; ++i) p[i] += b;
    }
}

inline Tensor channel_bias_backward(const Tensor& grad_out) {
  require_rank(grad_out, 4, "channel_bias_backward");
  Tensor gb({grad_out.dim(1)});
  const std::size_t hw = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
  for (int n = 0; n < grad_out.dim(0); ++n)
    for (int c = 0; c < grad_out.dim(1); ++c) {
      const float* p = &grad_out.at(n, c, 0, 0);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
      gb.data[c] += static_cast<float>(acc);
    }
  return gb;
}

namespace detail {
inline int prelu_slope_count(const Tensor& x, const Tensor& slope) {
  const int channels = x.rank() >= 2 ? x.dim(1) : 1;
  const int count = static_cast<int>(slope.numel());
  if (count != 1 && count != channels) {
    throw ShapeError("prelu: " + std::to_string(count) + " slopes for " + std::to_string(channels) + " channels");
  }
  return count;
}
}  // namespace detail

/// y = x for x > 0, slope * x otherwise. One slope per channel (dim 1) or shared.
inline Tensor prelu(const Tensor& x, const Tensor& slope) {
  const int count = detail::prelu_slope_count(x, slope);
  Tensor y(x.shape);
  const int channels = x.rank() >= 2 ? x.dim(1) : 1;
  const std::size_t inner = x.rank() >= 2 ? x.numel() / (static_cast<std::size_t>(x.dim(0)) * channels) : x.numel();
  const std::size_t outer = x.numel() / (inner * channels);
  std::size_t i = 0;
  for (std::size_t n = 0; n < outer; ++n)
    for (int c = 0; c < channels; ++c) {
      const float a = slope.data[count == 1 ? 0 : c];
      for (std::size_t k = 0; k < inner; ++k, ++i) {
        const float v = x.data[i];
        y.data[i] = v > 0.0f ? v : a * v;
      }
    }
  return y;
}

struct PreluGrads {
  Tensor input;
  Tensor slope;
};

inline PreluGrads prelu_backward(const Tensor& grad_out, const Tensor& x, const Tensor& slope) {
  require_same_shape(grad_out, x, "prelu_backward");
  const int count = detail::prelu_slope_count(x, slope);
  PreluGrads g{Tensor(x.shape), Tensor(slope.shape)};
  const int channels = x.rank() >= 2 ? x.dim(1) : 1;
  const std::size_t inner = x.rank() >= 2 ? x.numel() / (static_cast<std::size_t>(x.dim(0)) * channels) : x.numel();
  std::vector<double> acc(static_cast<std::size_t>(count), 0.0);
  const std::size_t outer = x.numel() / (inner * channels);
  std::size_t i = 0;
  for (std::size_t n = 0; n < outer; ++n)
    for (int ch = 0; ch < channels; ++ch) {
      const int c = count == 1 ? 0 : ch;
      const float a = slope.data[c];
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k, ++i) {
        const float v = x.data[i];
        if (v > 0.0f) {
          g.input.data[i] = grad_out.data[i];
        } else {
          g.input.data[i] = a * grad_out.data[i];
          s += static_cast<double>(grad_out.data[i]) * v;
        }
      }
      acc[c] += s;
    }
  for (int c = 0; c < count; ++c) g.slope.data[c] = static_cast<float>(acc[c]);
  return g;
}

/// (N, C*r*r, H, W) -> (N, C, H*r, W*r).
inline Tensor pixel_shuffle(const Tensor& x, int r) {
  require_rank(x, 4, "pixel_shuffle");
  if (r < 1) throw ShapeError("pixel_shuffle: upscale factor must be >= 1");
  if (x.dim(1) % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(x.dim(1)) + " not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const int n_batch = x.dim(0), c_out = x.dim(1) / (r * r), h = x.dim(2), w = x.dim(3);
  Tensor y({n_batch, c_out, h * r, w * r});
  for (int n = 0; n < n_batch; ++n)
    for (int c = 0; c < c_out; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) y.at(n, c, yy * r + i, xx * r + j) = x.at(n, c * r * r + i * r + j, yy, xx);
  return y;
}

/// Inverse of pixel_shuffle; also its backward.
inline Tensor pixel_unshuffle(const Tensor& y, int r) {
  require_rank(y, 4, "pixel_unshuffle");
  if (r < 1 || y.dim(2) % r != 0 || y.dim(3) % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial size " + shape_str(y.shape) + " not divisible by " + std::to_string(r));
  }
  const int n_batch = y.dim(0), c = y.dim(1), h = y.dim(2) / r, w = y.dim(3) / r;
  Tensor x({n_batch, c * r * r, h, w});
  for (int n = 0; n < n_batch; ++n)
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) x.at(n, ch * r * r + i * r + j, yy, xx) = y.at(n, ch, yy * r + i, xx * r + j);
  return x;
}

inline Tensor pixel_shuffle_backward(const Tensor& grad_out, int r) { return pixel_unshuffle(grad_out, r); }

/// x + alpha * y, the scaled-shortcut merge of a residual block.
inline Tensor add_scaled(const Tensor& x, const Tensor& y, float alpha) {
  require_same_shape(x, y, "add_scaled");
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] + alpha * y.data[i];
  return out;
}

struct AddScaledGrads {
  Tensor x;
  Tensor y;
  float alpha = 0.0f;
};

inline AddScaledGrads add_scaled_backward(const Tensor& grad_out, const Tensor& y, float alpha) {
  require_same_shape(grad_out, y, "add_scaled_backward");
  AddScaledGrads g{grad_out, Tensor(y.shape), 0.0f};
  double acc = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    g.y.data[i] = alpha * grad_out.data[i];
    acc += static_cast<double>(grad_out.data[i]) * y.data[i];
  }
  g.alpha = static_cast<float>(acc);
  return g;
}

namespace detail {
inline void check_loss_inputs(const Tensor& pred, const Tensor& target, const char* what) {
  require_same_shape(pred, target, what);
  if (pred.empty()) throw ShapeError(std::string(what) + ": empty tensors");
}
}  // namespace detail

inline float l1_loss(const Tensor& pred, const Tensor& target) {
  detail::check_loss_inputs(pred, target, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) acc += std::fabs(static_cast<double>(pred.data[i]) - target.data[i]);
  return static_cast<float>(acc / static_cast<double>(pred.numel()));
}

/// d(l1)/d(pred); sign(0) = 0.
inline Tensor l1_loss_grad(const Tensor& pred, const Tensor& target, float scale = 1.0f) {
  detail::check_loss_inputs(pred, target, "l1_loss_grad");
  Tensor g(pred.shape);
  const float k = scale / static_cast<float>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const float d = pred.data[i] - target.data[i];
    g.data[i] = d > 0.0f ? k : (d < 0.0f ? -k : 0.0f);
  }
  return g;
}

inline float mse_loss(const Tensor& pred, const Tensor& target) {
  detail::check_loss_inputs(pred, target, "mse_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - target.data[i];
    acc += d * d;
  }
  return static_cast<float>(acc / static_cast<double>(pred.numel()));
}

inline Tensor mse_loss_grad(const Tensor& pred, const Tensor& target, float scale = 1.0f) {
  detail::check_loss_inputs(pred, target, "mse_loss_grad");
  Tensor g(pred.shape);
  const float k = 2.0f * scale / static_cast<float>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) g.data[i] = k * (pred.data[i] - target.data[i]);
  return g;
}

}  // namespace qsr
