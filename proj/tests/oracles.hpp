#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. Everything here is written for clarity, in double
// precision, without sharing code paths with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "quantsr/quantsr.hpp"

namespace oracle {

using qsr::ImageRGB;
using qsr::Tensor;

inline Tensor random_tensor(const qsr::Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(shape);
  std::uniform_real_distribution<float> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
  return t;
}

/// Direct 'same' convolution with zero padding, accumulated in double.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, int n, int cin, int h, int w,
                                        const std::vector<double>& k, int cout, int ks) {
  std::vector<double> y(static_cast<std::size_t>(n) * cout * h * w, 0.0);
  const int pad = ks / 2;
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < cout; ++o)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          double acc = 0.0;
          for (int c = 0; c < cin; ++c)
            for (int u = 0; u < ks; ++u)
              for (int v = 0; v < ks; ++v) {
                const int si = i + u - pad, sj = j + v - pad;
                if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
                acc += x[((static_cast<std::size_t>(b) * cin + c) * h + si) * w + sj] *
                       k[((static_cast<std::size_t>(o) * cin + c) * ks + u) * ks + v];
              }
          y[((static_cast<std::size_t>(b) * cout + o) * h + i) * w + j] = acc;
        }
  return y;
}

inline std::vector<double> naive_conv2d(const Tensor& x, const Tensor& k) {
  std::vector<double> xd(x.data.begin(), x.data.end()), kd(k.data.begin(), k.data.end());
  return naive_conv2d(xd, x.dim(0), x.dim(1), x.dim(2), x.dim(3), kd, k.dim(0), k.dim(2));
}

/// Central-difference gradient of f with respect to every element of x.
inline std::vector<double> numeric_grad(Tensor& x, const std::function<double()>& f, double step) {
  std::vector<double> g(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float orig = x.data[i];
    x.data[i] = static_cast<float>(orig + step);
    const double fp = f();
    x.data[i] = static_cast<float>(orig - step);
    const double fm = f();
    x.data[i] = orig;
    const double h = (static_cast<double>(static_cast<float>(orig + step)) - static_cast<float>(orig - step));
    g[i] = (fp - fm) / h;
  }
  return g;
}

/// max |a - b| / max(max |b|, floor)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::fabs(a[i] - b[i]));
    scale = std::max(scale, std::fabs(b[i]));
  }
  return diff / scale;
}

inline std::vector<double> to_double(const Tensor& t) { return {t.data.begin(), t.data.end()}; }

/// Nearest odd S' in [-(2^b-1), 2^b-1] to t by enumeration. Returns the
/// minimal distance; `count` receives how many candidates attain it.
inline double nearest_code_distance(double t, int bits, int* count = nullptr) {
  double best = 1e300;
  int n = 0;
  for (int s = -((1 << bits) - 1); s <= (1 << bits) - 1; s += 2) {
    const double d = std::fabs(t - s);
    if (d < best - 1e-12) {
      best = d;
      n = 1;
    } else if (std::fabs(d - best) <= 1e-12) {
      ++n;
    }
  }
  if (count) *count = n;
  return best;
}

/// Surrogate RBD weight forward with sign replaced by tanh(2u) and the
/// residuals held at the recorded values: 0.5 (sum_i 2^i tanh(2 u_i) - 1) v.
inline double rbd_surrogate(double w, double v, const std::vector<double>& gain, const std::vector<double>& shift,
                            const std::vector<double>& held_residual_offsets) {
  // r_i = (2w/v + 1) - offset_i, offset_i = sum_{j>i} 2^j q_j (detached)
  const int b = static_cast<int>(gain.size());
  const double t = 2.0 * w / v + 1.0;
  double s = 0.0;
  for (int i = 0; i < b; ++i) s += std::ldexp(1.0, i) * std::tanh(2.0 * (gain[i] * (t - held_residual_offsets[i]) - shift[i]));
  return 0.5 * (s - 1.0) * v;
}

/// Cubic convolution kernel, a = -0.5, written from the piecewise definition.
inline double keys(double x) {
  x = std::fabs(x);
  if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

/// Downscale of a single-channel image by an integer factor by direct
/// summation over every source sample (symmetric edge extension, kernel
/// stretched by the factor, weights renormalized per output sample).
inline std::vector<double> direct_downscale(const std::vector<double>& img, int h, int w, int f) {
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  const int oh = h / f, ow = w / f;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const double cy = (oy + 0.5) * f - 0.5, cx = (ox + 0.5) * f - 0.5;
      double acc = 0.0, wy_sum = 0.0, wx_sum = 0.0;
      for (int sy = -4 * f; sy < h + 4 * f; ++sy) wy_sum += keys((cy - sy) / f) / f;
      for (int sx = -4 * f; sx < w + 4 * f; ++sx) wx_sum += keys((cx - sx) / f) / f;
      for (int sy = -4 * f; sy < h + 4 * f; ++sy) {
        const double wy = keys((cy - sy) / f) / f / wy_sum;
        if (wy == 0.0) continue;
        for (int sx = -4 * f; sx < w + 4 * f; ++sx) {
          const double wx = keys((cx - sx) / f) / f / wx_sum;
          if (wx == 0.0) continue;
          acc += wy * wx * img[static_cast<std::size_t>(mirror(sy, h)) * w + mirror(sx, w)];
        }
      }
      out[static_cast<std::size_t>(oy) * ow + ox] = acc;
    }
  return out;
}

inline double y_of(const ImageRGB& img, int y, int x) {
  auto c = [&](int ch) { return std::clamp(static_cast<double>(img.at(ch, y, x)), 0.0, 1.0); };
  return 16.0 + 65.481 * c(0) + 128.553 * c(1) + 24.966 * c(2);
}

inline double psnr(const ImageRGB& a, const ImageRGB& b, int shave) {
  double se = 0.0;
  long n = 0;
  for (int y = shave; y < a.height - shave; ++y)
    for (int x = shave; x < a.width - shave; ++x) {
      const double d = y_of(a, y, x) - y_of(b, y, x);
      se += d * d;
      ++n;
    }
  if (se == 0.0) return 100.0;
  return std::min(100.0, 20.0 * std::log10(255.0) - 10.0 * std::log10(se / n));
}

/// Mean SSIM over every fully contained 11x11 window, using an explicit 2-D
/// Gaussian weight table (sigma 1.5) and direct sums per window.
inline double ssim(const ImageRGB& a, const ImageRGB& b, int shave) {
  double win[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      total += win[i][j];
    }
  const double c1 = std::pow(0.01 * 255.0, 2), c2 = std::pow(0.03 * 255.0, 2);
  double acc = 0.0;
  long count = 0;
  for (int y0 = shave; y0 + 11 <= a.height - shave; ++y0)
    for (int x0 = shave; x0 + 11 <= a.width - shave; ++x0) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          mx += win[i][j] / total * y_of(a, y0 + i, x0 + j);
          my += win[i][j] / total * y_of(b, y0 + i, x0 + j);
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double dx = y_of(a, y0 + i, x0 + j) - mx, dy = y_of(b, y0 + i, x0 + j) - my;
          vx += win[i][j] / total * dx * dx;
          vy += win[i][j] / total * dy * dy;
          cov += win[i][j] / total * dx * dy;
        }
      acc += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / count;
}

/// Three fixed image pairs for the metric checks: a smooth gradient with
/// additive noise, a checkerboard against a blurred copy, and a random image
/// against a brightness-shifted version.
inline std::vector<std::pair<ImageRGB, ImageRGB>> metric_pairs() {
  std::vector<std::pair<ImageRGB, ImageRGB>> pairs;
  std::mt19937_64 rng(20240611);
  std::normal_distribution<float> noise(0.0f, 0.03f);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  {
    ImageRGB a(32, 40), b(32, 40);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 40; ++x) {
          a.at(c, y, x) = (x + y + 10 * c) / 90.0f;
          b.at(c, y, x) = std::clamp(a.at(c, y, x) + noise(rng), 0.0f, 1.0f);
        }
    pairs.emplace_back(a, b);
  }
  {
    ImageRGB a(36, 36), b(36, 36);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 36; ++y)
        for (int x = 0; x < 36; ++x) a.at(c, y, x) = ((x / 4 + y / 4) % 2) ? 0.9f : 0.1f;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 36; ++y)
        for (int x = 0; x < 36; ++x) {
          double s = 0;
          int n = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = std::clamp(y + dy, 0, 35), xx = std::clamp(x + dx, 0, 35);
              s += a.at(c, yy, xx);
              ++n;
            }
          b.at(c, y, x) = static_cast<float>(s / n);
        }
    pairs.emplace_back(a, b);
  }
  {
    ImageRGB a(24, 30), b(24, 30);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      a.data[i] = uni(rng);
      b.data[i] = std::clamp(a.data[i] * 0.8f + 0.15f, 0.0f, 1.0f);
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

/// Network forward written as the literal per-block composition
/// x <- [i in S] * Phi_i(x) + [i not in S] * x, evaluating every Phi_i.
inline Tensor iverson_forward(const qsr::Network& net, const Tensor& lr) {
  Tensor x = net.head_forward(lr);
  for (int i = 0; i < net.block_count(); ++i) {
    const Tensor phi = net.block_forward(i, x);
    const float in_s = net.retained[i] ? 1.0f : 0.0f;
    Tensor next(x.shape);
    for (std::size_t k = 0; k < x.numel(); ++k) next.data[k] = in_s * phi.data[k] + (1.0f - in_s) * x.data[k];
    x = std::move(next);
  }
  return net.tail_forward(x);
}

}  // namespace oracle
