#pragma once

// SRResNet-style super-resolution network shared by the full-precision
// teacher and the quantized slimmable student.
//
//   head:  conv3x3 (3 -> C, bias) + PReLU                      FP32
//   body:  2N blocks, Phi_i(x) = conv(PReLU(conv(x))) + alpha_i x
//          with quantized weights and input activations (student)
//   tail:  log2(r) x [conv3x3 (C -> 4C, bias), pixel shuffle x2, PReLU]
//          + conv3x3 (C -> 3, bias)                             FP32
//
// Skipped blocks (not in the retained set) pass features through unchanged.
// Gradients come from explicit per-layer backward functions replayed over the
// Tape recorded by forward().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "quantsr/ops.hpp"
#include "quantsr/quantizers.hpp"
#include "quantsr/tensor.hpp"

namespace qsr {

enum class QuantMethod { Float, Uniform, Rbd };

inline const char* to_string(QuantMethod m) {
  switch (m) {
    case QuantMethod::Float: return "float";
    case QuantMethod::Uniform: return "uniform";
    case QuantMethod::Rbd: return "rbd";
  }
  return "?";
}

inline QuantMethod quant_method_from_string(const std::string& s) {
  if (s == "float") return QuantMethod::Float;
  if (s == "uniform") return QuantMethod::Uniform;
  if (s == "rbd") return QuantMethod::Rbd;
  throw FormatError("unknown quantization method '" + s + "'");
}

struct NetworkSpec {
  int channels = 16;
  int blocks = 8;  // 2N
  int upscale = 2;
  int w_bits = 2;
  int a_bits = 2;

  void validate() const {
    if (channels < 1) throw ConfigError("channels must be positive");
    if (blocks < 2 || blocks % 2 != 0) throw ConfigError("blocks (2N) must be even and >= 2, got " + std::to_string(blocks));
    if (upscale != 2 && upscale != 4) throw ConfigError("upscale must be 2 or 4, got " + std::to_string(upscale));
    check_bits(w_bits);
    check_bits(a_bits);
  }

  bool operator==(const NetworkSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Quantized convolution (no bias)

struct QuantConv {
  Parameter weight;  // OIKK
  QuantMethod method = QuantMethod::Float;
  int w_bits = 32;
  int a_bits = 32;
  RbdWeightQuantizer rbd_w;
  RbdActQuantizer rbd_a;
  UniformQuantizer uni_a;
  bool act_ready = false;

  bool quantized() const { return method != QuantMethod::Float; }

  std::vector<Parameter*> quant_parameters() {
    if (method != QuantMethod::Rbd) return {};
    return {&rbd_w.scale, &rbd_w.gain, &rbd_w.shift, &rbd_a.scale, &rbd_a.shift};
  }
};

struct QuantConvTape {
  Tensor input;  // pre-quantization activation
  Tensor act_dequant;
  Tensor weight_dequant;
  RbdWeightTrace trace;
  UniformQuantizer uni_w;
};

/// Weight codes with their per-output-channel step.
struct WeightCodes {
  CodeTensor codes;
  std::vector<float> scales;
  Tensor dequant;
  RbdWeightTrace trace;
  UniformQuantizer uniform;
};

inline WeightCodes quantize_conv_weight(const QuantConv& qc) {
  WeightCodes out;
  const int cout = qc.weight.value.dim(0);
  if (qc.method == QuantMethod::Rbd) {
    auto r = rbd_weight_quantize(qc.weight.value, qc.rbd_w);
    out.codes = std::move(r.codes);
    out.dequant = std::move(r.dequant);
    out.trace = std::move(r.trace);
    out.scales.resize(cout);
    for (int o = 0; o < cout; ++o) out.scales[o] = detail::safe_scale(qc.rbd_w.scale.value.data[o]);
  } else {
    out.uniform = UniformQuantizer::from_data(qc.weight.value, qc.w_bits);
    auto r = uniform_quantize(qc.weight.value, out.uniform);
    out.codes = std::move(r.codes);
    out.dequant = std::move(r.dequant);
    out.scales.assign(cout, out.uniform.step);
  }
  return out;
}

struct ActCodes {
  Quantized q;
  float scale = 1.0f;
};

inline ActCodes quantize_conv_input(const QuantConv& qc, const Tensor& x) {
  if (!qc.act_ready) throw Error("activation quantizer for " + qc.weight.name + " used before calibration");
  if (qc.method == QuantMethod::Rbd) return {rbd_act_quantize(x, qc.rbd_a), detail::safe_scale(qc.rbd_a.scale.scalar())};
  return {uniform_quantize(x, qc.uni_a), qc.uni_a.step};
}

/// Integer-valued convolution of the codes, rescaled by act_scale * w_scale[o].
/// Partial sums stay exact in float for the supported widths, so this matches
/// the integer kernel bit for bit.
inline Tensor code_conv(const CodeTensor& act, float act_scale, const CodeTensor& w, const std::vector<float>& w_scales) {
  Tensor a(act.shape), wt(w.shape);
  std::transform(act.data.begin(), act.data.end(), a.data.begin(), [](std::int8_t v) { return static_cast<float>(v); });
  std::transform(w.data.begin(), w.data.end(), wt.data.begin(), [](std::int8_t v) { return static_cast<float>(v); });
  Tensor y = conv2d(a, wt);
  const std::size_t hw = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  for (int n = 0; n < y.dim(0); ++n)
    for (int o = 0; o < y.dim(1); ++o) {
      const float s = act_scale * w_scales[o];
      float* p = &y.at(n, o, 0, 0);
      for (std::size_t i = 0; i < hw; ++i) p[i] *= s;
    }
  return y;
}

inline Tensor quant_conv_forward(const QuantConv& qc, const Tensor& x, QuantConvTape* tape) {
  if (!qc.quantized()) {
    if (tape) tape->input = x;
    return conv2d(x, qc.weight.value);
  }
  ActCodes act = quantize_conv_input(qc, x);
  WeightCodes wc = quantize_conv_weight(qc);
  Tensor y = code_conv(act.q.codes, act.scale, wc.codes, wc.scales);
  if (tape) {
    tape->input = x;
    tape->act_dequant = std::move(act.q.dequant);
    tape->weight_dequant = std::move(wc.dequant);
    tape->trace = std::move(wc.trace);
    tape->uni_w = wc.uniform;
  }
  return y;
}

inline void accumulate(Parameter& p, const Tensor& g) {
  if (p.frozen) return;
  require_same_shape(p.grad, g, p.name.c_str());
  for (std::size_t i = 0; i < g.numel(); ++i) p.grad.data[i] += g.data[i];
}

inline void accumulate(Parameter& p, float g) {
  if (!p.frozen) p.grad.data[0] += g;
}

/// Returns the gradient w.r.t. the conv input and accumulates parameter grads.
inline Tensor quant_conv_backward(QuantConv& qc, const Tensor& grad_out, const QuantConvTape& tape, bool need_input) {
  if (!qc.quantized()) {
    ConvGrads g = conv2d_backward(grad_out, tape.input, qc.weight.value, need_input);
    accumulate(qc.weight, g.weight);
    return std::move(g.input);
  }
  ConvGrads g = conv2d_backward(grad_out, tape.act_dequant, tape.weight_dequant, true);
  if (qc.method == QuantMethod::Rbd) {
    RbdWeightGrads wg = rbd_weight_backward(g.weight, qc.weight.value, qc.rbd_w, tape.trace);
    accumulate(qc.weight, wg.weight);
    accumulate(qc.rbd_w.scale, wg.scale);
    accumulate(qc.rbd_w.gain, wg.gain);
    accumulate(qc.rbd_w.shift, wg.shift);
    RbdActGrads ag = rbd_act_backward(g.input, tape.input, qc.rbd_a);
    accumulate(qc.rbd_a.scale, ag.scale);
    accumulate(qc.rbd_a.shift, ag.shift);
    return std::move(ag.input);
  }
  accumulate(qc.weight, uniform_backward(g.weight, qc.weight.value, tape.uni_w));
  return uniform_backward(g.input, tape.input, qc.uni_a);
}

// ---------------------------------------------------------------------------
// Residual block with learnable shortcut scale

struct Block {
  QuantConv conv1;
  QuantConv conv2;
  Parameter slope;  // PReLU, per channel
  Parameter alpha;  // shortcut scale

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps{&conv1.weight, &slope, &conv2.weight, &alpha};
    for (auto* p : conv1.quant_parameters()) ps.push_back(p);
    for (auto* p : conv2.quant_parameters()) ps.push_back(p);
    return ps;
  }
};

struct BlockTape {
  QuantConvTape c1;
  QuantConvTape c2;
  Tensor pre_act;  // conv1 output
  Tensor input;
};

inline Tensor block_forward(const Block& b, const Tensor& x, BlockTape* tape) {
  Tensor h1 = quant_conv_forward(b.conv1, x, tape ? &tape->c1 : nullptr);
  Tensor a = prelu(h1, b.slope.value);
  Tensor h2 = quant_conv_forward(b.conv2, a, tape ? &tape->c2 : nullptr);
  if (tape) {
    tape->pre_act = std::move(h1);
    tape->input = x;
  }
  return add_scaled(h2, x, b.alpha.scalar());
}

inline Tensor block_backward(Block& b, const Tensor& grad_out, const BlockTape& tape) {
  AddScaledGrads gs = add_scaled_backward(grad_out, tape.input, b.alpha.scalar());
  accumulate(b.alpha, gs.alpha);
  Tensor g_a = quant_conv_backward(b.conv2, gs.x, tape.c2, true);
  PreluGrads gp = prelu_backward(g_a, tape.pre_act, b.slope.value);
  accumulate(b.slope, gp.slope);
  Tensor g_x = quant_conv_backward(b.conv1, gp.input, tape.c1, true);
  for (std::size_t i = 0; i < g_x.numel(); ++i) g_x.data[i] += gs.y.data[i];
  return g_x;
}

// ---------------------------------------------------------------------------

struct FpConv {
  Parameter weight;
  Parameter bias;
};

struct UpStage {
  FpConv conv;      // C -> 4C
  Parameter slope;  // PReLU after the shuffle
};

struct Tape {
  Tensor lr;
  Tensor head_pre;
  std::vector<BlockTape> blocks;
  std::vector<Tensor> up_in;
  std::vector<Tensor> up_pre;  // shuffled conv output, PReLU input
  Tensor tail_in;
};

class Network {
 public:
  NetworkSpec spec;
  QuantMethod method = QuantMethod::Float;
  FpConv head;
  Parameter head_slope;
  std::vector<Block> blocks;
  std::vector<UpStage> up;
  FpConv tail;
  std::vector<bool> retained;
  int min_retained = 0;

  int block_count() const { return static_cast<int>(blocks.size()); }

  int retained_count() const { return static_cast<int>(std::count(retained.begin(), retained.end(), true)); }

  std::vector<int> retained_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < block_count(); ++i)
      if (retained[i]) idx.push_back(i);
    return idx;
  }

  bool quantized() const { return method != QuantMethod::Float; }

  Tensor head_forward(const Tensor& lr, Tape* tape = nullptr) const {
    if (lr.rank() != 4 || lr.dim(1) != 3) throw ShapeError("network input must be N x 3 x H x W, got " + shape_str(lr.shape));
    Tensor h = conv2d(lr, head.weight.value);
    add_channel_bias(h, head.bias.value);
    Tensor out = prelu(h, head_slope.value);
    if (tape) {
      tape->lr = lr;
      tape->head_pre = std::move(h);
    }
    return out;
  }

  Tensor block_forward(int i, const Tensor& x, BlockTape* tape = nullptr) const {
    return qsr::block_forward(blocks.at(static_cast<std::size_t>(i)), x, tape);
  }

  Tensor tail_forward(const Tensor& feat, Tape* tape = nullptr) const {
    Tensor x = feat;
    for (std::size_t s = 0; s < up.size(); ++s) {
      Tensor c = conv2d(x, up[s].conv.weight.value);
      add_channel_bias(c, up[s].conv.bias.value);
      Tensor sh = pixel_shuffle(c, 2);
      Tensor y = prelu(sh, up[s].slope.value);
      if (tape) {
        tape->up_in.push_back(std::move(x));
        tape->up_pre.push_back(std::move(sh));
      }
      x = std::move(y);
    }
    Tensor out = conv2d(x, tail.weight.value);
    add_channel_bias(out, tail.bias.value);
    if (tape) tape->tail_in = std::move(x);
    return out;
  }

  /// Runs the network. block_outputs (when given) receives the feature after
  /// each of the 2N positions; skipped positions record the passthrough.
  Tensor forward(const Tensor& lr, std::vector<Tensor>* block_outputs = nullptr, Tape* tape = nullptr) const {
    if (tape) *tape = Tape{};
    Tensor x = head_forward(lr, tape);
    require_finite(x, "head output");
    if (tape) tape->blocks.resize(blocks.size());
    if (block_outputs) block_outputs->assign(blocks.size(), Tensor());
    for (int i = 0; i < block_count(); ++i) {
      if (retained[i]) {
        x = block_forward(i, x, tape ? &tape->blocks[i] : nullptr);
        require_finite(x, "block " + std::to_string(i + 1) + " output");
      }
      if (block_outputs) (*block_outputs)[i] = x;
    }
    Tensor out = tail_forward(x, tape);
    require_finite(out, "network output");
    return out;
  }

  /// Accumulates parameter gradients. block_grads[i], when non-empty, is an
  /// extra gradient arriving at the output of position i (distillation).
  void backward(const Tape& tape, const Tensor& grad_out, const std::vector<Tensor>* block_grads = nullptr) {
    // tail
    ConvGrads gt = conv2d_backward(grad_out, tape.tail_in, tail.weight.value);
    accumulate(tail.weight, gt.weight);
    accumulate(tail.bias, channel_bias_backward(grad_out));
    Tensor g = std::move(gt.input);
    for (int s = static_cast<int>(up.size()) - 1; s >= 0; --s) {
      PreluGrads gp = prelu_backward(g, tape.up_pre[s], up[s].slope.value);
      accumulate(up[s].slope, gp.slope);
      Tensor gc = pixel_shuffle_backward(gp.input, 2);
      ConvGrads gcv = conv2d_backward(gc, tape.up_in[s], up[s].conv.weight.value);
      accumulate(up[s].conv.weight, gcv.weight);
      accumulate(up[s].conv.bias, channel_bias_backward(gc));
      g = std::move(gcv.input);
    }
    // body
    for (int i = block_count() - 1; i >= 0; --i) {
      if (block_grads && !(*block_grads)[i].empty()) {
        const Tensor& extra = (*block_grads)[i];
        require_same_shape(g, extra, "block gradient");
        for (std::size_t k = 0; k < g.numel(); ++k) g.data[k] += extra.data[k];
      }
      if (retained[i]) g = block_backward(blocks[i], g, tape.blocks[i]);
    }
    // head
    PreluGrads gh = prelu_backward(g, tape.head_pre, head_slope.value);
    accumulate(head_slope, gh.slope);
    ConvGrads gc = conv2d_backward(gh.input, tape.lr, head.weight.value, false);
    accumulate(head.weight, gc.weight);
    accumulate(head.bias, channel_bias_backward(gh.input));
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps{&head.weight, &head.bias, &head_slope};
    for (auto& b : blocks)
      for (auto* p : b.parameters()) ps.push_back(p);
    for (auto& s : up) {
      ps.push_back(&s.conv.weight);
      ps.push_back(&s.conv.bias);
      ps.push_back(&s.slope);
    }
    ps.push_back(&tail.weight);
    ps.push_back(&tail.bias);
    return ps;
  }

  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<Network*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  Parameter* find_parameter(const std::string& name) {
    for (auto* p : parameters())
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  std::vector<float> alphas() const {
    std::vector<float> a;
    for (const auto& b : blocks) a.push_back(b.alpha.scalar());
    return a;
  }

  /// Replaces the retained set; rejects sets smaller than min_retained.
  void set_retained(const std::vector<bool>& mask) {
    if (static_cast<int>(mask.size()) != block_count()) throw ShapeError("retained mask length does not match block count");
    const int count = static_cast<int>(std::count(mask.begin(), mask.end(), true));
    if (count < min_retained) {
      throw Error("retained set of " + std::to_string(count) + " blocks is below the target of " +
                  std::to_string(min_retained));
    }
    retained = mask;
    for (int i = 0; i < block_count(); ++i) set_block_frozen(i, !retained[i]);
  }

  void set_block_frozen(int i, bool frozen) {
    auto& b = blocks.at(static_cast<std::size_t>(i));
    for (auto* p : b.parameters()) {
      if (p == &b.alpha && frozen_alpha_) continue;
      p->frozen = frozen;
    }
    if (frozen_alpha_) b.alpha.frozen = true;
  }

  bool alpha_learnable() const { return !frozen_alpha_; }

  void set_alpha_learnable(bool learnable) {
    frozen_alpha_ = !learnable;
    for (int i = 0; i < block_count(); ++i) blocks[i].alpha.frozen = frozen_alpha_ || !retained[i];
  }

 private:
  bool frozen_alpha_ = true;
};

// ---------------------------------------------------------------------------
// Construction

namespace detail {

inline Parameter init_conv_weight(const std::string& name, int cout, int cin, int k, std::mt19937_64& rng, float gain) {
  Tensor w({cout, cin, k, k});
  const float bound = gain / std::sqrt(static_cast<float>(cin * k * k));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& v : w.data) v = dist(rng);
  return Parameter(name, std::move(w));
}

inline QuantConv make_block_conv(const std::string& name, int channels, std::mt19937_64& rng, float gain) {
  QuantConv qc;
  qc.weight = init_conv_weight(name + ".weight", channels, channels, 3, rng, gain);
  return qc;
}

inline void copy_values(Network& dst, const Network& src) {
  auto d = dst.parameters();
  auto s = src.parameters();
  if (d.size() != s.size()) throw ShapeError("cannot copy parameters between different topologies");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i]->name != s[i]->name || d[i]->value.shape != s[i]->value.shape) {
      throw ShapeError("parameter mismatch copying " + s[i]->name + " into " + d[i]->name);
    }
    d[i]->value = s[i]->value;
  }
}

}  // namespace detail

/// Full-precision network with all 2N blocks, alpha fixed at 1.
inline Network build_teacher(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0u};
  std::mt19937_64 rng(seq);
  const int c = spec.channels;
  Network net;
  net.spec = spec;
  net.method = QuantMethod::Float;
  net.head.weight = detail::init_conv_weight("head.conv.weight", c, 3, 3, rng, 1.0f);
  net.head.bias = Parameter("head.conv.bias", Tensor({c}));
  net.head_slope = Parameter("head.prelu", Tensor({c}, 0.25f));
  for (int i = 0; i < spec.blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    Block b;
    b.conv1 = detail::make_block_conv(p + ".conv1", c, rng, 1.0f);
    b.slope = Parameter(p + ".prelu", Tensor({c}, 0.25f));
    b.conv2 = detail::make_block_conv(p + ".conv2", c, rng, 0.1f);
    b.alpha = Parameter(p + ".alpha", Tensor({1}, 1.0f));
    net.blocks.push_back(std::move(b));
  }
  const int stages = spec.upscale == 4 ? 2 : 1;
  for (int s = 0; s < stages; ++s) {
    const std::string p = "up." + std::to_string(s);
    UpStage st;
    st.conv.weight = detail::init_conv_weight(p + ".conv.weight", 4 * c, c, 3, rng, 1.0f);
    st.conv.bias = Parameter(p + ".conv.bias", Tensor({4 * c}));
    st.slope = Parameter(p + ".prelu", Tensor({c}, 0.25f));
    net.up.push_back(std::move(st));
  }
  net.tail.weight = detail::init_conv_weight("tail.conv.weight", 3, c, 3, rng, 1.0f);
  net.tail.bias = Parameter("tail.conv.bias", Tensor({3}));
  net.retained.assign(static_cast<std::size_t>(spec.blocks), true);
  net.min_retained = spec.blocks;
  net.set_alpha_learnable(false);
  return net;
}

struct StudentOptions {
  QuantMethod method = QuantMethod::Rbd;
  bool qsa = true;       // start at 2N blocks with learnable alphas
  int target_blocks = 0; // N; 0 means blocks / 2
};

/// Quantized student. With qsa the student starts with all 2N blocks and
/// learnable alphas; without it the student keeps a fixed set of N blocks
/// (every second position, ending at the last) and alpha stays 1.
/// Conv weights are copied from the teacher when one is given; weight
/// quantizers are initialized from those weights. Activation quantizers need
/// calibrate_activations() before the first forward.
inline Network build_student(const NetworkSpec& spec, const StudentOptions& opts, const Network* teacher,
                             std::uint64_t seed) {
  spec.validate();
  if (opts.method == QuantMethod::Float) throw ConfigError("student requires a quantization method");
  Network net = build_teacher(spec, seed);
  if (teacher) {
    if (!(teacher->spec.channels == spec.channels && teacher->spec.blocks == spec.blocks &&
          teacher->spec.upscale == spec.upscale)) {
      throw ConfigError("teacher topology does not match the student spec");
    }
    detail::copy_values(net, *teacher);
  }
  const int target = opts.target_blocks > 0 ? opts.target_blocks : spec.blocks / 2;
  if (target < 1 || target > spec.blocks) throw ConfigError("target block count out of range");
  net.method = opts.method;
  for (auto& b : net.blocks) {
    for (QuantConv* qc : {&b.conv1, &b.conv2}) {
      qc->method = opts.method;
      qc->w_bits = spec.w_bits;
      qc->a_bits = spec.a_bits;
      const std::string prefix = qc->weight.name.substr(0, qc->weight.name.size() - std::string(".weight").size()) + ".quant.";
      if (opts.method == QuantMethod::Rbd) qc->rbd_w = rbd_weight_init(qc->weight.value, spec.w_bits, prefix);
    }
  }
  net.min_retained = target;
  if (opts.qsa) {
    net.retained.assign(static_cast<std::size_t>(spec.blocks), true);
    net.set_alpha_learnable(true);
    net.set_retained(net.retained);
  } else {
    std::vector<bool> mask(static_cast<std::size_t>(spec.blocks), false);
    // keep `target` blocks spread evenly, always including the last position
    for (int j = 0; j < target; ++j) mask[static_cast<std::size_t>(spec.blocks - 1 - j * (spec.blocks / target))] = true;
    net.set_alpha_learnable(false);
    net.set_retained(mask);
  }
  return net;
}

/// Sequentially initializes activation quantizers from a sample batch: each
/// conv sees the (already quantized) output of the layers before it.
inline void calibrate_activations(Network& net, const Tensor& lr_batch) {
  if (!net.quantized()) return;
  Tensor x = net.head_forward(lr_batch);
  for (auto& b : net.blocks) {
    auto init = [](QuantConv& qc, const Tensor& sample) {
      if (qc.method == QuantMethod::Rbd) {
        const std::string prefix = qc.weight.name.substr(0, qc.weight.name.size() - 7) + ".quant.";
        const bool frozen = qc.rbd_a.scale.frozen;
        qc.rbd_a = rbd_act_init(sample, qc.a_bits, prefix);
        qc.rbd_a.scale.frozen = qc.rbd_a.shift.frozen = frozen;
      } else {
        qc.uni_a = UniformQuantizer::from_data(sample, qc.a_bits);
      }
      qc.act_ready = true;
    };
    init(b.conv1, x);
    Tensor h1 = quant_conv_forward(b.conv1, x, nullptr);
    Tensor a = prelu(h1, b.slope.value);
    init(b.conv2, a);
    Tensor y = add_scaled(quant_conv_forward(b.conv2, a, nullptr), x, b.alpha.scalar());
    if (net.retained[&b - net.blocks.data()]) x = std::move(y);
  }
}

/// Retained block indices (0-based) by descending alpha; ties go to the lower index.
inline std::vector<int> rank_alpha(const Network& net) {
  std::vector<int> idx = net.retained_indices();
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return net.blocks[a].alpha.scalar() > net.blocks[b].alpha.scalar(); });
  return idx;
}

/// Removes a block from the retained set and freezes its parameters.
inline void apply_skip(Network& net, int index) {
  if (index < 0 || index >= net.block_count()) throw Error("apply_skip: block index " + std::to_string(index) + " out of range");
  if (!net.retained[index]) throw Error("apply_skip: block " + std::to_string(index + 1) + " is already skipped");
  if (net.retained_count() <= net.min_retained) {
    throw Error("apply_skip: cannot skip below the target of " + std::to_string(net.min_retained) + " blocks");
  }
  net.retained[index] = false;
  net.set_block_frozen(index, true);
}

}  // namespace qsr
