#pragma once

// Parameter / storage / operation accounting for a deployed network.
//
// Body convolutions count at their weight bit width, everything else at 32
// bits. Code bytes are the theoretical ceil(params * b / 8); this equals the
// packed artifact for b in {1, 2, 4, 8} (3-bit artifacts use a byte per code). Ops are multiply-accumulates; a body MAC is weighted by
// max(w_bits, a_bits) / 32 in the effective-ops figure.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quantsr/int_kernel.hpp"
#include "quantsr/network.hpp"

namespace qsr {

struct LayerCost {
  std::string name;
  std::int64_t params = 0;
  int bits = 32;
  std::int64_t macs = 0;
  bool body = false;
};

struct ReferenceReduction {
  std::string label;
  double params_pct = 0.0;
  double ops_pct = 0.0;
};

struct AccountingReport {
  NetworkSpec spec;
  int deployed_blocks = 0;
  int input_h = 0, input_w = 0;
  std::vector<LayerCost> layers;

  std::int64_t params_total = 0;
  std::int64_t body_params = 0;
  std::int64_t body_code_bytes = 0;      // ceil(params * b / 8) per body conv
  std::int64_t body_overhead_bytes = 0;  // section headers, per-channel scales, activation scale/shift
  std::int64_t body_fp32_bytes = 0;
  std::int64_t other_fp32_bytes = 0;     // head, tail, PReLU slopes, alphas
  std::int64_t macs_total = 0;
  std::int64_t body_macs = 0;
  double effective_ops = 0.0;  // MAC-equivalents at 32 bits

  std::int64_t storage_bytes() const { return body_code_bytes + body_overhead_bytes + other_fp32_bytes; }
  std::int64_t fp32_storage_bytes() const { return params_total * 4; }
  double body_code_ratio() const { return body_fp32_bytes ? static_cast<double>(body_code_bytes) / body_fp32_bytes : 0.0; }
  double body_reduction_factor() const {
    const auto b = body_code_bytes + body_overhead_bytes;
    return b ? static_cast<double>(body_fp32_bytes) / b : 0.0;
  }
  double params_reduction_pct() const {
    return 100.0 * (1.0 - static_cast<double>(storage_bytes()) / static_cast<double>(fp32_storage_bytes()));
  }
  double ops_reduction_pct() const { return 100.0 * (1.0 - effective_ops / static_cast<double>(macs_total)); }
};

/// Reference whole-model reductions for the 64-channel, 16-block, x4
/// SRResNet at 2 or 4 bits. These come from a different counting convention
/// and are shown for side-by-side comparison only.
inline std::optional<ReferenceReduction> reference_reduction(const NetworkSpec& spec, int deployed_blocks) {
  if (spec.channels != 64 || deployed_blocks != 16 || spec.upscale != 4 || spec.w_bits != spec.a_bits) return std::nullopt;
  if (spec.w_bits == 2) return ReferenceReduction{"SRResNet x4, 2-bit (reference)", 89.4, 87.9};
  if (spec.w_bits == 4) return ReferenceReduction{"SRResNet x4, 4-bit (reference)", 80.0, 77.5};
  return std::nullopt;
}

/// Accounting for `deployed_blocks` body blocks on an input of input_h x input_w LR pixels.
inline AccountingReport account(const NetworkSpec& spec, int deployed_blocks, int input_h, int input_w,
                                QuantMethod method = QuantMethod::Rbd) {
  spec.validate();
  if (input_h < 1 || input_w < 1) throw ConfigError("accounting input size must be positive");
  AccountingReport r;
  r.spec = spec;
  r.deployed_blocks = deployed_blocks;
  r.input_h = input_h;
  r.input_w = input_w;
  const std::int64_t c = spec.channels;
  std::int64_t hw = static_cast<std::int64_t>(input_h) * input_w;
  auto conv = [&](std::string name, std::int64_t cin, std::int64_t cout, bool bias, bool body, std::int64_t pixels) {
    LayerCost l;
    l.name = std::move(name);
    l.params = cout * cin * 9 + (bias ? cout : 0);
    l.bits = body ? spec.w_bits : 32;
    l.macs = cout * cin * 9 * pixels;
    l.body = body;
    r.layers.push_back(l);
  };
  auto fp = [&](std::string name, std::int64_t n) { r.layers.push_back({std::move(name), n, 32, 0, false}); };
  conv("head.conv", 3, c, true, false, hw);
  fp("head.prelu", c);
  for (int i = 0; i < deployed_blocks; ++i) {
    const std::string p = "body." + std::to_string(i);
    conv(p + ".conv1", c, c, false, true, hw);
    fp(p + ".prelu", c);
    conv(p + ".conv2", c, c, false, true, hw);
    fp(p + ".alpha", 1);
  }
  const int stages = spec.upscale == 4 ? 2 : 1;
  for (int s = 0; s < stages; ++s) {
    const std::string p = "up." + std::to_string(s);
    conv(p + ".conv", c, 4 * c, true, false, hw);
    hw *= 4;
    fp(p + ".prelu", c);
  }
  conv("tail.conv", c, 3, true, false, hw);

  const std::int64_t act_bytes = method == QuantMethod::Rbd ? 8 : 4;
  for (const auto& l : r.layers) {
    r.params_total += l.params;
    r.macs_total += l.macs;
    if (l.body) {
      r.body_params += l.params;
      r.body_code_bytes += (l.params * l.bits + 7) / 8;
      r.body_overhead_bytes += static_cast<std::int64_t>(kPackedHeaderBytes) + 4 * c + act_bytes;
      r.body_fp32_bytes += 4 * l.params;
      r.body_macs += l.macs;
      r.effective_ops += static_cast<double>(l.macs) * std::max(spec.w_bits, spec.a_bits) / 32.0;
    } else {
      r.other_fp32_bytes += 4 * l.params;
      r.effective_ops += static_cast<double>(l.macs);
    }
  }
  return r;
}

}  // namespace qsr
