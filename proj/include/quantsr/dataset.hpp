#pragma once

// Paired LR/HR image sets, procedural test images and deterministic batches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "quantsr/imaging.hpp"
#include "quantsr/tensor.hpp"

namespace qsr {

struct ImagePair {
  std::string name;
  ImageRGB lr;
  ImageRGB hr;
};

struct Dataset {
  int scale = 2;
  std::vector<ImagePair> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

inline Dataset make_dataset(const std::vector<ImageRGB>& hr_images, int scale, const std::string& prefix = "img") {
  Dataset ds;
  ds.scale = scale;
  for (std::size_t i = 0; i < hr_images.size(); ++i) {
    ImageRGB hr = mod_crop(hr_images[i], scale);
    ImageRGB lr = make_lr(hr, scale);
    ds.items.push_back({prefix + std::to_string(i), std::move(lr), std::move(hr)});
  }
  return ds;
}

/// Loads every *.png in hr_dir (sorted by name). LR images come from a
/// sibling directory LR_x{scale} with the same file names when it exists,
/// otherwise they are generated by bicubic downscaling.
inline Dataset load_dataset(const std::string& hr_dir, int scale) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(hr_dir)) throw Error("dataset directory '" + hr_dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(hr_dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("dataset directory '" + hr_dir + "' contains no PNG files");
  const fs::path lr_dir = fs::path(hr_dir).lexically_normal().parent_path() / ("LR_x" + std::to_string(scale));
  const bool have_lr = fs::is_directory(lr_dir);
  Dataset ds;
  ds.scale = scale;
  for (const auto& f : files) {
    ImageRGB hr = mod_crop(load_png(f.string()), scale);
    ImageRGB lr;
    if (have_lr) {
      const fs::path lp = lr_dir / f.filename();
      if (!fs::exists(lp)) throw Error("missing LR image '" + lp.string() + "'");
      lr = load_png(lp.string());
      if (lr.height * scale != hr.height || lr.width * scale != hr.width) {
        throw ShapeError("LR image '" + lp.string() + "' does not match its HR size at x" + std::to_string(scale));
      }
    } else {
      lr = make_lr(hr, scale);
    }
    ds.items.push_back({f.filename().string(), std::move(lr), std::move(hr)});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Procedural images: smooth colour gradient, oriented stripe textures, sharp
// edged shapes and thin lines. Deterministic in (height, width, seed).

inline ImageRGB synthetic_image(int height, int width, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRGB img(height, width);
  double base[3][3];
  for (auto& row : base)
    for (auto& v : row) v = u(rng);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double fy = static_cast<double>(y) / height, fx = static_cast<double>(x) / width;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(0.15 + 0.7 * (base[c][0] * (1 - fx) * (1 - fy) + base[c][1] * fx + base[c][2] * fy) / 2.0);
    }
  const double two_pi = 6.283185307179586;
  const int stripes = 2 + static_cast<int>(u(rng) * 2);
  for (int s = 0; s < stripes; ++s) {
    const double theta = u(rng) * two_pi, period = 3.0 + u(rng) * 9.0, amp = 0.08 + 0.12 * u(rng);
    const double cx = u(rng) * width, cy = u(rng) * height, radius = (0.25 + 0.35 * u(rng)) * std::max(height, width);
    double col[3];
    for (auto& v : col) v = u(rng) - 0.5;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double r = std::hypot(x - cx, y - cy);
        if (r > radius) continue;
        const double t = std::sin(two_pi * (x * std::cos(theta) + y * std::sin(theta)) / period);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) += static_cast<float>(amp * t * (0.5 + col[c]));
      }
  }
  const int shapes = 4 + static_cast<int>(u(rng) * 5);
  for (int s = 0; s < shapes; ++s) {
    double col[3];
    for (auto& v : col) v = u(rng);
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double rx = (0.05 + 0.2 * u(rng)) * width, ry = (0.05 + 0.2 * u(rng)) * height;
    const bool disk = u(rng) < 0.5;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const bool inside = disk ? dx * dx + dy * dy <= 1.0 : std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
        if (inside)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(col[c]);
      }
  }
  const int lines = 2 + static_cast<int>(u(rng) * 4);
  for (int l = 0; l < lines; ++l) {
    const double theta = u(rng) * two_pi, cx = u(rng) * width, cy = u(rng) * height, thick = 0.6 + 1.2 * u(rng);
    const double v = u(rng) < 0.5 ? 0.05 : 0.95;
    const double nx = -std::sin(theta), ny = std::cos(theta);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (std::fabs((x - cx) * nx + (y - cy) * ny) <= thick)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(v);
  }
  img.clamp();
  return quantize_u8(std::move(img));
}

inline Dataset synthetic_dataset(int count, int hr_size, int scale, std::uint64_t seed) {
  std::vector<ImageRGB> imgs;
  for (int i = 0; i < count; ++i) imgs.push_back(synthetic_image(hr_size, hr_size, seed * 1000003ull + static_cast<std::uint64_t>(i)));
  return make_dataset(imgs, scale, "synth");
}

// ---------------------------------------------------------------------------
// Batches. Each iteration draws from its own RNG streams seeded by
// (seed, purpose, iteration), so a batch depends only on those values.

enum class RngPurpose : std::uint32_t { Init = 0, Patch = 1, Augment = 2 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, RngPurpose purpose, std::uint64_t iter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(iter),
                    static_cast<std::uint32_t>(iter >> 32)};
  return std::mt19937_64(seq);
}

struct Batch {
  Tensor lr;  // B x 3 x p x p
  Tensor hr;  // B x 3 x sp x sp
};

inline Batch make_batch(const Dataset& ds, int batch_size, int patch, std::uint64_t seed, std::uint64_t iter) {
  if (ds.empty()) throw Error("make_batch: empty dataset");
  auto patch_rng = stream_rng(seed, RngPurpose::Patch, iter);
  auto aug_rng = stream_rng(seed, RngPurpose::Augment, iter);
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<ImageRGB> lrs, hrs;
  for (int b = 0; b < batch_size; ++b) {
    const ImagePair& item = ds.items[pick(patch_rng)];
    PatchPair p = augment(sample_patch(item.lr, item.hr, ds.scale, patch, patch_rng), aug_rng);
    lrs.push_back(std::move(p.lr));
    hrs.push_back(std::move(p.hr));
  }
  return {to_batch(lrs), to_batch(hrs)};
}

}  // namespace qsr
