#pragma once

// Deployable artifact: the retained N blocks with packed integer weights and
// per-tensor activation quantizers, plus the FP32 head and tail. Inference
// runs the body through int_conv2d and needs no training-time state.

#include <string>
#include <vector>

#include "quantsr/checkpoint.hpp"
#include "quantsr/int_kernel.hpp"
#include "quantsr/network.hpp"
#include "quantsr/network_io.hpp"

namespace qsr {

struct DeployedAct {
  float scale = 1.0f;  // effective step (floored)
  float shift = 0.0f;  // RBD only
  float clip = 0.0f;   // uniform only, informational
};

struct DeployedBlock {
  int position = 0;  // index among the 2N training positions
  DeployedAct act1, act2;
  PackedWeights w1, w2;
  Tensor slope;
  float alpha = 1.0f;
};

struct DeployedModel {
  NetworkSpec spec;
  QuantMethod method = QuantMethod::Rbd;
  Tensor head_w, head_b, head_slope;
  std::vector<DeployedBlock> blocks;
  std::vector<Tensor> up_w, up_b, up_slope;
  Tensor tail_w, tail_b;
};

namespace detail {

inline DeployedAct deploy_act(const QuantConv& qc) {
  if (!qc.act_ready) throw Error("export: activation quantizer of " + qc.weight.name + " was never calibrated");
  if (qc.method == QuantMethod::Rbd) return {safe_scale(qc.rbd_a.scale.scalar()), qc.rbd_a.shift.scalar(), 0.0f};
  return {qc.uni_a.step, 0.0f, qc.uni_a.clip_range};
}

inline PackedWeights deploy_weights(const QuantConv& qc) {
  WeightCodes wc = quantize_conv_weight(qc);
  return pack_weights(wc.codes, wc.scales, qc.w_bits);
}

inline CodeTensor act_codes(const Tensor& x, QuantMethod method, int bits, const DeployedAct& a) {
  if (method == QuantMethod::Rbd) {
    RbdActQuantizer q;
    q.bits = bits;
    q.scale = Parameter("v_a", Tensor({1}, a.scale));
    q.shift = Parameter("tau_a", Tensor({1}, a.shift));
    return rbd_act_quantize(x, q).codes;
  }
  UniformQuantizer q;
  q.bits = bits;
  q.step = a.scale;
  q.clip_range = a.clip;
  return uniform_quantize(x, q).codes;
}

}  // namespace detail

/// Slim deployable form of a quantized student; skipped blocks are dropped.
inline DeployedModel export_model(const Network& net) {
  if (!net.quantized()) throw Error("export: network is not quantized");
  DeployedModel m;
  m.spec = net.spec;
  m.method = net.method;
  m.head_w = net.head.weight.value;
  m.head_b = net.head.bias.value;
  m.head_slope = net.head_slope.value;
  for (int i = 0; i < net.block_count(); ++i) {
    if (!net.retained[i]) continue;
    const Block& b = net.blocks[i];
    DeployedBlock d;
    d.position = i;
    d.act1 = detail::deploy_act(b.conv1);
    d.act2 = detail::deploy_act(b.conv2);
    d.w1 = detail::deploy_weights(b.conv1);
    d.w2 = detail::deploy_weights(b.conv2);
    d.slope = b.slope.value;
    d.alpha = b.alpha.scalar();
    m.blocks.push_back(std::move(d));
  }
  for (const auto& s : net.up) {
    m.up_w.push_back(s.conv.weight.value);
    m.up_b.push_back(s.conv.bias.value);
    m.up_slope.push_back(s.slope.value);
  }
  m.tail_w = net.tail.weight.value;
  m.tail_b = net.tail.bias.value;
  return m;
}

/// SR forward with the integer body.
inline Tensor infer(const DeployedModel& m, const Tensor& lr) {
  if (lr.rank() != 4 || lr.dim(1) != 3) throw ShapeError("infer: input must be N x 3 x H x W, got " + shape_str(lr.shape));
  Tensor h = conv2d(lr, m.head_w);
  add_channel_bias(h, m.head_b);
  Tensor x = prelu(h, m.head_slope);
  for (const auto& b : m.blocks) {
    const CodeTensor c1 = detail::act_codes(x, m.method, m.spec.a_bits, b.act1);
    Tensor a = prelu(int_conv2d(c1, b.act1.scale, b.w1), b.slope);
    const CodeTensor c2 = detail::act_codes(a, m.method, m.spec.a_bits, b.act2);
    x = add_scaled(int_conv2d(c2, b.act2.scale, b.w2), x, b.alpha);
  }
  for (std::size_t s = 0; s < m.up_w.size(); ++s) {
    Tensor c = conv2d(x, m.up_w[s]);
    add_channel_bias(c, m.up_b[s]);
    x = prelu(pixel_shuffle(c, 2), m.up_slope[s]);
  }
  Tensor out = conv2d(x, m.tail_w);
  add_channel_bias(out, m.tail_b);
  return out;
}

inline Container deployed_to_container(const DeployedModel& m) {
  Container c;
  c.meta["kind"] = "artifact";
  c.meta["spec"] = spec_to_json(m.spec);
  c.meta["method"] = to_string(m.method);
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    const auto& b = m.blocks[k];
    blocks.push_back({{"position", b.position},
                      {"alpha", b.alpha},
                      {"act1", {b.act1.scale, b.act1.shift, b.act1.clip}},
                      {"act2", {b.act2.scale, b.act2.shift, b.act2.clip}}});
    const std::string p = "body." + std::to_string(k);
    c.blobs[p + ".conv1"] = serialize_packed(b.w1);
    c.blobs[p + ".conv2"] = serialize_packed(b.w2);
    c.tensors[p + ".prelu"] = b.slope;
  }
  c.meta["blocks"] = blocks;
  c.tensors["head.conv.weight"] = m.head_w;
  c.tensors["head.conv.bias"] = m.head_b;
  c.tensors["head.prelu"] = m.head_slope;
  for (std::size_t s = 0; s < m.up_w.size(); ++s) {
    const std::string p = "up." + std::to_string(s);
    c.tensors[p + ".conv.weight"] = m.up_w[s];
    c.tensors[p + ".conv.bias"] = m.up_b[s];
    c.tensors[p + ".prelu"] = m.up_slope[s];
  }
  c.tensors["tail.conv.weight"] = m.tail_w;
  c.tensors["tail.conv.bias"] = m.tail_b;
  return c;
}

inline DeployedModel deployed_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "artifact") throw FormatError("not a deployable artifact (kind '" + c.meta.value("kind", "") + "')");
  DeployedModel m;
  m.spec = spec_from_json(c.meta.at("spec"));
  m.method = quant_method_from_string(c.meta.at("method").get<std::string>());
  const auto& blocks = c.meta.at("blocks");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& j = blocks[k];
    DeployedBlock b;
    b.position = j.at("position").get<int>();
    b.alpha = j.at("alpha").get<float>();
    auto act = [](const nlohmann::json& a) { return DeployedAct{a.at(0).get<float>(), a.at(1).get<float>(), a.at(2).get<float>()}; };
    b.act1 = act(j.at("act1"));
    b.act2 = act(j.at("act2"));
    const std::string p = "body." + std::to_string(k);
    b.w1 = parse_packed(c.blob(p + ".conv1"));
    b.w2 = parse_packed(c.blob(p + ".conv2"));
    b.slope = c.tensor(p + ".prelu");
    m.blocks.push_back(std::move(b));
  }
  m.head_w = c.tensor("head.conv.weight");
  m.head_b = c.tensor("head.conv.bias");
  m.head_slope = c.tensor("head.prelu");
  const int stages = m.spec.upscale == 4 ? 2 : 1;
  for (int s = 0; s < stages; ++s) {
    const std::string p = "up." + std::to_string(s);
    m.up_w.push_back(c.tensor(p + ".conv.weight"));
    m.up_b.push_back(c.tensor(p + ".conv.bias"));
    m.up_slope.push_back(c.tensor(p + ".prelu"));
  }
  m.tail_w = c.tensor("tail.conv.weight");
  m.tail_b = c.tensor("tail.conv.bias");
  return m;
}

inline void save_deployed(const DeployedModel& m, const std::string& path) { save_container(deployed_to_container(m), path); }

inline DeployedModel load_deployed(const std::string& path) { return deployed_from_container(load_container(path)); }

}  // namespace qsr
