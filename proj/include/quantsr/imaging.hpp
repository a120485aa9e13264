#pragma once

// Images, PNG I/O, bicubic resampling, patch sampling/augmentation and the
// Y-channel PSNR/SSIM metrics.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

/// Planar RGB image, float in [0, 1].
struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // [c][y][x]

  ImageRGB() = default;
  ImageRGB(int h, int w, float fill = 0.0f) : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {
    if (h < 0 || w < 0) throw ShapeError("image dimensions must be non-negative");
  }

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  bool same_size(const ImageRGB& o) const { return height == o.height && width == o.width; }

  void clamp() {
    for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
  }

  bool operator==(const ImageRGB&) const = default;
};

inline Tensor to_tensor(const ImageRGB& img) { return Tensor({1, 3, img.height, img.width}, img.data); }

/// Stacks images of equal size into an N x 3 x H x W batch.
inline Tensor to_batch(const std::vector<ImageRGB>& imgs) {
  if (imgs.empty()) throw ShapeError("to_batch: no images");
  const int h = imgs[0].height, w = imgs[0].width;
  Tensor t({static_cast<int>(imgs.size()), 3, h, w});
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i].height != h || imgs[i].width != w) throw ShapeError("to_batch: images differ in size");
    std::copy(imgs[i].data.begin(), imgs[i].data.end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * imgs[i].data.size()));
  }
  return t;
}

/// Image n of a batch, clamped to [0, 1].
inline ImageRGB from_tensor(const Tensor& t, int n = 0) {
  if (t.rank() != 4 || t.dim(1) != 3) throw ShapeError("from_tensor: expected N x 3 x H x W, got " + shape_str(t.shape));
  ImageRGB img(t.dim(2), t.dim(3));
  const auto* src = &t.at(n, 0, 0, 0);
  std::copy(src, src + img.data.size(), img.data.begin());
  img.clamp();
  return img;
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

struct PngReadCtx {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
  char message[256];
};

inline void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (n > ctx->size - ctx->pos) png_error(png, "unexpected end of file");
  std::memcpy(out, ctx->data + ctx->pos, n);
  ctx->pos += n;
}

inline void png_on_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof ctx->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_on_warning(png_structp, png_const_charp) {}

// No C++ objects with destructors live in this frame across libpng calls.
inline bool png_decode(PngReadCtx* ctx, png_structp* png_out, png_infop* info_out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx, png_on_error, png_on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  *png_out = png;
  *info_out = info;
  if (!info) return false;
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, ctx, png_read_mem);
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_GRAY_TO_RGB, nullptr);
  return true;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Decodes an 8- or 16-bit PNG. Grayscale is expanded to RGB and alpha dropped.
inline ImageRGB decode_png(const std::vector<std::uint8_t>& bytes, const std::string& what = "png") {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError(what + ": not a PNG file");
  detail::PngReadCtx ctx{bytes.data(), bytes.size(), 0, {0}};
  png_structp png = nullptr;
  png_infop info = nullptr;
  const bool ok = detail::png_decode(&ctx, &png, &info);
  if (!ok) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw FormatError(what + ": " + (ctx.message[0] ? std::string(ctx.message) : "libpng failure"));
  }
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  if (channels != 3 || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(what + ": unsupported pixel layout (" + std::to_string(channels) + " channels, " +
                      std::to_string(depth) + " bit)");
  }
  ImageRGB img(h, w);
  for (int y = 0; y < h; ++y) {
    const png_bytep row = rows[y];
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        if (depth == 8) {
          img.at(c, y, x) = static_cast<float>(row[x * 3 + c]) / 255.0f;
        } else {
          const int v = (row[(x * 3 + c) * 2] << 8) | row[(x * 3 + c) * 2 + 1];
          img.at(c, y, x) = static_cast<float>(v) / 65535.0f;
        }
      }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline ImageRGB load_png(const std::string& path) { return decode_png(detail::read_file(path), path); }

inline std::uint8_t to_u8(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

/// Writes an 8-bit RGB PNG.
inline void save_png(const ImageRGB& img, const std::string& path) {
  if (img.height < 1 || img.width < 1) throw ShapeError("save_png: empty image");
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.height) * img.width * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = to_u8(img.at(c, y, x));
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot write '" + path + "': " + msg);
  }
}

/// Rounds every value to the nearest 8-bit level, as a save/load cycle would.
inline ImageRGB quantize_u8(ImageRGB img) {
  for (auto& v : img.data) v = static_cast<float>(to_u8(v)) / 255.0f;
  return img;
}

// ---------------------------------------------------------------------------
// Bicubic resampling (a = -0.5, antialiased when shrinking, symmetric edges)

inline double cubic_kernel(double x) {
  const double a = -0.5;
  const double ax = std::fabs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

/// Symmetric (half-sample) reflection of an index into [0, n).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

struct ResampleTaps {
  int taps = 0;
  std::vector<int> index;    // [out][tap]
  std::vector<double> weight;
};

inline ResampleTaps resample_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(out_size) / in_size;
  const double support = scale < 1.0 ? 2.0 / scale : 2.0;
  ResampleTaps t;
  t.taps = static_cast<int>(std::ceil(2.0 * support)) + 2;
  t.index.resize(static_cast<std::size_t>(out_size) * t.taps);
  t.weight.resize(t.index.size());
  for (int i = 0; i < out_size; ++i) {
    const double u = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - support));
    double sum = 0.0;
    for (int k = 0; k < t.taps; ++k) {
      const int j = left + k;
      const double d = u - j;
      const double w = scale < 1.0 ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      t.index[static_cast<std::size_t>(i) * t.taps + k] = reflect_index(j, in_size);
      t.weight[static_cast<std::size_t>(i) * t.taps + k] = w;
      sum += w;
    }
    for (int k = 0; k < t.taps; ++k) t.weight[static_cast<std::size_t>(i) * t.taps + k] /= sum;
  }
  return t;
}

inline ImageRGB bicubic_resize(const ImageRGB& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bicubic_resize: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " is smaller than one pixel");
  }
  if (img.height < 1 || img.width < 1) throw ShapeError("bicubic_resize: empty input");
  const ResampleTaps tx = resample_taps(img.width, out_w);
  const ResampleTaps ty = resample_taps(img.height, out_h);
  // rows first, then columns; intermediate kept in double
  std::vector<double> mid(static_cast<std::size_t>(3) * img.height * out_w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < tx.taps; ++k) {
          const std::size_t t = static_cast<std::size_t>(x) * tx.taps + k;
          acc += tx.weight[t] * img.at(c, y, tx.index[t]);
        }
        mid[(static_cast<std::size_t>(c) * img.height + y) * out_w + x] = acc;
      }
  ImageRGB out(out_h, out_w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < ty.taps; ++k) {
          const std::size_t t = static_cast<std::size_t>(y) * ty.taps + k;
          acc += ty.weight[t] * mid[(static_cast<std::size_t>(c) * img.height + ty.index[t]) * out_w + x];
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

/// Resizes by num/den; output size is ceil(size * num / den).
inline ImageRGB bicubic_scale(const ImageRGB& img, int num, int den) {
  if (num < 1 || den < 1) throw ShapeError("bicubic_scale: scale must be positive");
  auto sz = [&](int n) { return static_cast<int>((static_cast<std::int64_t>(n) * num + den - 1) / den); };
  return bicubic_resize(img, sz(img.height), sz(img.width));
}

/// Crops so both sides are multiples of scale.
inline ImageRGB mod_crop(const ImageRGB& img, int scale) {
  const int h = img.height - img.height % scale, w = img.width - img.width % scale;
  if (h == img.height && w == img.width) return img;
  ImageRGB out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

/// Bicubic LR counterpart of an HR image, clamped and rounded to 8-bit levels.
inline ImageRGB make_lr(const ImageRGB& hr, int scale) {
  if (hr.height % scale || hr.width % scale) throw ShapeError("make_lr: HR size must be a multiple of the scale");
  ImageRGB lr = bicubic_resize(hr, hr.height / scale, hr.width / scale);
  lr.clamp();
  return quantize_u8(std::move(lr));
}

// ---------------------------------------------------------------------------
// Patches and augmentation

struct PatchPair {
  ImageRGB lr;
  ImageRGB hr;
};

inline ImageRGB crop(const ImageRGB& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width) throw ShapeError("crop: window outside image");
  ImageRGB out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y) std::copy_n(&img.data[(static_cast<std::size_t>(c) * img.height + y0 + y) * img.width + x0], w, &out.at(c, y, 0));
  return out;
}

template <class Rng>
PatchPair sample_patch(const ImageRGB& lr, const ImageRGB& hr, int scale, int patch, Rng& rng) {
  if (hr.height != lr.height * scale || hr.width != lr.width * scale) {
    throw ShapeError("sample_patch: HR is not the LR size times " + std::to_string(scale));
  }
  if (patch < 1 || lr.height < patch || lr.width < patch) {
    throw ShapeError("sample_patch: image " + std::to_string(lr.height) + "x" + std::to_string(lr.width) +
                     " too small for patch " + std::to_string(patch));
  }
  std::uniform_int_distribution<int> dy(0, lr.height - patch), dx(0, lr.width - patch);
  const int y = dy(rng), x = dx(rng);
  return {crop(lr, y, x, patch, patch), crop(hr, y * scale, x * scale, patch * scale, patch * scale)};
}

/// 90 degree counter-clockwise rotation.
inline ImageRGB rotate90(const ImageRGB& img) {
  ImageRGB out(img.width, img.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = img.at(c, x, img.width - 1 - y);
  return out;
}

inline ImageRGB hflip(const ImageRGB& img) {
  ImageRGB out(img.height, img.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

/// op in [0, 8): op % 4 quarter turns, then a horizontal flip when op >= 4.
inline ImageRGB dihedral(const ImageRGB& img, int op) {
  ImageRGB out = img;
  for (int i = 0; i < op % 4; ++i) out = rotate90(out);
  if (op >= 4) out = hflip(out);
  return out;
}

template <class Rng>
int draw_augmentation(Rng& rng) {
  return std::uniform_int_distribution<int>(0, 7)(rng);
}

template <class Rng>
PatchPair augment(const PatchPair& p, Rng& rng) {
  const int op = draw_augmentation(rng);
  return {dihedral(p.lr, op), dihedral(p.hr, op)};
}

// ---------------------------------------------------------------------------
// Metrics

inline constexpr double kPsnrCap = 100.0;

/// Luma in the 8-bit domain: 16 + 65.481 R + 128.553 G + 24.966 B.
inline double luma(double r, double g, double b) { return 16.0 + 65.481 * r + 128.553 * g + 24.966 * b; }

/// Y plane (row-major, double) after clamping to [0, 1] and cropping `shave` pixels per side.
inline std::vector<double> y_plane(const ImageRGB& img, int shave, int* h_out = nullptr, int* w_out = nullptr) {
  const int h = img.height - 2 * shave, w = img.width - 2 * shave;
  if (shave < 0 || h < 1 || w < 1) throw ShapeError("shave of " + std::to_string(shave) + " leaves no pixels");
  std::vector<double> y(static_cast<std::size_t>(h) * w);
  auto cl = [](float v) { return static_cast<double>(std::clamp(v, 0.0f, 1.0f)); };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      y[static_cast<std::size_t>(i) * w + j] =
          luma(cl(img.at(0, i + shave, j + shave)), cl(img.at(1, i + shave, j + shave)), cl(img.at(2, i + shave, j + shave)));
  if (h_out) *h_out = h;
  if (w_out) *w_out = w;
  return y;
}

inline Tensor y_channel(const ImageRGB& img) {
  int h = 0, w = 0;
  const auto y = y_plane(img, 0, &h, &w);
  Tensor t({h, w});
  std::transform(y.begin(), y.end(), t.data.begin(), [](double v) { return static_cast<float>(v); });
  return t;
}

inline double psnr(const ImageRGB& a, const ImageRGB& b, int shave) {
  if (!a.same_size(b)) throw ShapeError("psnr: images differ in size");
  const auto ya = y_plane(a, shave), yb = y_plane(b, shave);
  double acc = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) acc += (ya[i] - yb[i]) * (ya[i] - yb[i]);
  const double mse = acc / static_cast<double>(ya.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

inline std::array<double, 11> gaussian_window_1d() {
  std::array<double, 11> g{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

namespace detail {
// 'valid' separable filtering with the 11-tap Gaussian.
inline std::vector<double> gauss_valid(const std::vector<double>& x, int h, int w) {
  const auto g = gaussian_window_1d();
  const int oh = h - 10, ow = w - 10;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * x[static_cast<std::size_t>(i) * w + j + k];
      rows[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 11; ++k) acc += g[k] * rows[static_cast<std::size_t>(i + k) * ow + j];
      out[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  return out;
}
}  // namespace detail

inline double ssim(const ImageRGB& a, const ImageRGB& b, int shave) {
  if (!a.same_size(b)) throw ShapeError("ssim: images differ in size");
  int h = 0, w = 0;
  const auto x = y_plane(a, shave, &h, &w);
  const auto y = y_plane(b, shave);
  if (h < 11 || w < 11) throw ShapeError("ssim: needs at least 11x11 pixels after shaving");
  const std::size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = detail::gauss_valid(x, h, w), my = detail::gauss_valid(y, h, w);
  const auto sxx = detail::gauss_valid(xx, h, w), syy = detail::gauss_valid(yy, h, w), sxy = detail::gauss_valid(xy, h, w);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0), c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

}  // namespace qsr
