#pragma once

// Deployable weight form and the integer convolution that consumes it.
//
// Packing layout: codes are stored as b-bit two's complement. For b in
// {1, 2, 4, 8} they are packed densely, 8/b codes per byte, first code in the
// least significant bits. Other widths use one byte per code.
//
// Serialized section (all little endian):
//   offset 0  u32  magic 0x31575051 ("QPW1")
//   offset 4  u8   bits
//   offset 5  u8   reserved[3] = 0
//   offset 8  u16  O, I, KH, KW
//   offset 16 f32  scales[O]
//             u8   packed codes[packed_size(O*I*KH*KW, bits)]

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "quantsr/binary_io.hpp"
#include "quantsr/quantizers.hpp"
#include "quantsr/tensor.hpp"

namespace qsr {

inline constexpr std::uint32_t kPackedMagic = 0x31575051u;
inline constexpr std::size_t kPackedHeaderBytes = 16;

inline bool dense_packing(int bits) { return bits == 1 || bits == 2 || bits == 4 || bits == 8; }

inline std::size_t packed_size(std::size_t num_codes, int bits) {
  if (dense_packing(bits)) return (num_codes * static_cast<std::size_t>(bits) + 7) / 8;
  return num_codes;
}

struct PackedWeights {
  int bits = 0;
  Shape shape;                      // OIKK
  std::vector<std::uint8_t> bytes;  // packed codes
  std::vector<float> scales;        // per output channel

  std::size_t num_codes() const { return shape_numel(shape); }
  int out_channels() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t serialized_size() const { return kPackedHeaderBytes + scales.size() * 4 + bytes.size(); }
};

inline PackedWeights pack_weights(const CodeTensor& codes, std::vector<float> scales, int bits) {
  check_bits(bits);
  if (codes.shape.empty()) throw ShapeError("pack_weights: codes have no shape");
  if (static_cast<int>(scales.size()) != codes.shape[0]) {
    throw ShapeError("pack_weights: " + std::to_string(scales.size()) + " scales for " + std::to_string(codes.shape[0]) +
                     " output channels");
  }
  const int lo = code_min(bits), hi = code_max(bits);
  for (std::size_t i = 0; i < codes.numel(); ++i) {
    const int c = codes.data[i];
    if (c < lo || c > hi) {
      throw Error("pack_weights: code " + std::to_string(c) + " at index " + std::to_string(i) + " outside " +
                  std::to_string(bits) + "-bit range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  PackedWeights pw{bits, codes.shape, std::vector<std::uint8_t>(packed_size(codes.numel(), bits), 0), std::move(scales)};
  if (!dense_packing(bits)) {
    for (std::size_t i = 0; i < codes.numel(); ++i) pw.bytes[i] = static_cast<std::uint8_t>(codes.data[i]);
    return pw;
  }
  const int per_byte = 8 / bits;
  const unsigned mask = (1u << bits) - 1u;
  for (std::size_t i = 0; i < codes.numel(); ++i) {
    const unsigned u = static_cast<unsigned>(static_cast<int>(codes.data[i])) & mask;
    pw.bytes[i / per_byte] |= static_cast<std::uint8_t>(u << ((i % per_byte) * bits));
  }
  return pw;
}

inline CodeTensor unpack_codes(const PackedWeights& pw) {
  CodeTensor codes(pw.shape);
  const std::size_t n = codes.numel();
  if (pw.bytes.size() != packed_size(n, pw.bits)) throw FormatError("unpack: packed byte count does not match shape");
  if (!dense_packing(pw.bits)) {
    for (std::size_t i = 0; i < n; ++i) codes.data[i] = static_cast<std::int8_t>(pw.bytes[i]);
    return codes;
  }
  const int per_byte = 8 / pw.bits;
  const unsigned mask = (1u << pw.bits) - 1u;
  const int sign_bit = 1 << (pw.bits - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int u = static_cast<int>((pw.bytes[i / per_byte] >> ((i % per_byte) * pw.bits)) & mask);
    codes.data[i] = static_cast<std::int8_t>(u >= sign_bit ? u - (1 << pw.bits) : u);
  }
  return codes;
}

struct UnpackedWeights {
  CodeTensor codes;
  std::vector<float> scales;
};

inline UnpackedWeights unpack(const PackedWeights& pw) { return {unpack_codes(pw), pw.scales}; }

inline std::vector<std::uint8_t> serialize_packed(const PackedWeights& pw) {
  if (pw.shape.size() != 4) throw ShapeError("serialize_packed: expected OIKK shape, got " + shape_str(pw.shape));
  ByteWriter w;
  w.u32(kPackedMagic);
  w.u8(static_cast<std::uint8_t>(pw.bits));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  for (int d : pw.shape) {
    if (d < 0 || d > 0xFFFF) throw FormatError("serialize_packed: dimension " + std::to_string(d) + " exceeds u16");
    w.u16(static_cast<std::uint16_t>(d));
  }
  for (float s : pw.scales) w.f32(s);
  w.bytes(pw.bytes.data(), pw.bytes.size());
  return w.take();
}

inline PackedWeights parse_packed(ByteReader& r) {
  if (r.u32() != kPackedMagic) throw FormatError("packed weights: bad section magic");
  PackedWeights pw;
  pw.bits = r.u8();
  check_bits(pw.bits);
  r.bytes(3);
  pw.shape.resize(4);
  for (auto& d : pw.shape) d = r.u16();
  pw.scales.resize(static_cast<std::size_t>(pw.shape[0]));
  for (auto& s : pw.scales) s = r.f32();
  const std::size_t n = packed_size(shape_numel(pw.shape), pw.bits);
  const auto* p = r.bytes(n);
  pw.bytes.assign(p, p + n);
  return pw;
}

inline PackedWeights parse_packed(const std::vector<std::uint8_t>& buf) {
  ByteReader r(buf);
  return parse_packed(r);
}

/// Convolution over integer activation codes and packed integer weights.
/// Accumulates exactly in int32 and rescales once per output channel:
/// out = acc * (act_scale * scale[o]).
inline Tensor int_conv2d(const CodeTensor& act, float act_scale, const PackedWeights& pw) {
  if (act.shape.size() != 4 || pw.shape.size() != 4) {
    throw ShapeError("int_conv2d: expected NCHW codes and OIKK weights, got " + shape_str(act.shape) + " and " +
                     shape_str(pw.shape));
  }
  const int n_batch = act.shape[0], cin = act.shape[1], h = act.shape[2], w = act.shape[3];
  const int cout = pw.shape[0], k = pw.shape[2];
  if (pw.shape[1] != cin) {
    throw ShapeError("int_conv2d: activation channels " + std::to_string(cin) + " vs weight input channels " +
                     std::to_string(pw.shape[1]));
  }
  if (pw.shape[3] != k || k % 2 == 0) throw ShapeError("int_conv2d: kernel must be square and odd");
  const int kdim = cin * k * k;
  // Worst case |acc| = kdim * 128 * 2^(b-1).
  const std::int64_t bound = static_cast<std::int64_t>(kdim) * 128 * (std::int64_t{1} << (pw.bits - 1));
  if (bound > std::numeric_limits<std::int32_t>::max()) {
    throw Error("int_conv2d: int32 accumulator could overflow for " + std::to_string(kdim) + " taps at " +
                std::to_string(pw.bits) + " bits");
  }
  const CodeTensor wcodes = unpack_codes(pw);
  std::vector<std::int32_t> wide(wcodes.data.begin(), wcodes.data.end());
  const int pad = k / 2;
  const int hw = h * w;
  Tensor out({n_batch, cout, h, w});
  std::vector<std::int32_t> col(static_cast<std::size_t>(kdim) * hw);
  std::vector<std::int32_t> acc(static_cast<std::size_t>(cout) * hw);
  for (int n = 0; n < n_batch; ++n) {
    const std::int8_t* img = act.data.data() + static_cast<std::size_t>(n) * cin * hw;
    for (int c = 0; c < cin; ++c)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          std::int32_t* row = col.data() + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - pad;
            for (int x = 0; x < w; ++x) {
              const int sx = x + kx - pad;
              row[y * w + x] = (sy < 0 || sy >= h || sx < 0 || sx >= w) ? 0 : img[(c * h + sy) * w + sx];
            }
          }
        }
    std::fill(acc.begin(), acc.end(), 0);
    for (int kk = 0; kk < kdim; ++kk) {
      const std::int32_t* col_row = col.data() + static_cast<std::size_t>(kk) * hw;
      for (int o = 0; o < cout; ++o) {
        const std::int32_t wv = wide[static_cast<std::size_t>(o) * kdim + kk];
        if (wv == 0) continue;
        std::int32_t* a_row = acc.data() + static_cast<std::size_t>(o) * hw;
        for (int p = 0; p < hw; ++p) a_row[p] += wv * col_row[p];
      }
    }
    for (int o = 0; o < cout; ++o) {
      const float s = act_scale * pw.scales[o];
      float* dst = &out.at(n, o, 0, 0);
      const std::int32_t* a_row = acc.data() + static_cast<std::size_t>(o) * hw;
      for (int p = 0; p < hw; ++p) dst[p] = static_cast<float>(a_row[p]) * s;
    }
  }
  return out;
}

}  // namespace qsr
