#pragma once

// Network state <-> container. Parameters are stored as named tensors under a
// prefix ("student." / "teacher."); topology, retained set and the
// non-learned activation steps go into the JSON metadata.

#include <string>
#include <vector>

#include "quantsr/checkpoint.hpp"
#include "quantsr/network.hpp"

namespace qsr {

inline nlohmann::json spec_to_json(const NetworkSpec& s) {
  return {{"channels", s.channels}, {"blocks", s.blocks}, {"upscale", s.upscale}, {"w_bits", s.w_bits}, {"a_bits", s.a_bits}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.channels = j.at("channels").get<int>();
  s.blocks = j.at("blocks").get<int>();
  s.upscale = j.at("upscale").get<int>();
  s.w_bits = j.at("w_bits").get<int>();
  s.a_bits = j.at("a_bits").get<int>();
  s.validate();
  return s;
}

inline void store_network(Container& c, const Network& net, const std::string& prefix) {
  nlohmann::json j;
  j["spec"] = spec_to_json(net.spec);
  j["method"] = to_string(net.method);
  j["retained"] = net.retained;
  j["min_retained"] = net.min_retained;
  j["alpha_learnable"] = net.alpha_learnable();
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& b : net.blocks)
    for (const QuantConv* qc : {&b.conv1, &b.conv2})
      acts.push_back({{"ready", qc->act_ready}, {"step", qc->uni_a.step}, {"clip", qc->uni_a.clip_range}});
  j["uniform_act"] = acts;
  c.meta[prefix] = j;
  for (const Parameter* p : net.parameters()) c.tensors[prefix + "." + p->name] = p->value;
}

/// Rebuilds a network stored by store_network.
inline Network restore_network(const Container& c, const std::string& prefix) {
  if (!c.meta.contains(prefix)) throw FormatError("checkpoint has no '" + prefix + "' network");
  const auto& j = c.meta.at(prefix);
  const NetworkSpec spec = spec_from_json(j.at("spec"));
  const QuantMethod method = quant_method_from_string(j.at("method").get<std::string>());
  const int min_retained = j.at("min_retained").get<int>();
  Network net;
  if (method == QuantMethod::Float) {
    net = build_teacher(spec, 0);
  } else {
    StudentOptions opts;
    opts.method = method;
    opts.qsa = true;
    opts.target_blocks = min_retained;
    net = build_student(spec, opts, nullptr, 0);
  }
  const auto& acts = j.at("uniform_act");
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    QuantConv* convs[2] = {&net.blocks[i].conv1, &net.blocks[i].conv2};
    for (int k = 0; k < 2; ++k) {
      const auto& a = acts.at(2 * i + static_cast<std::size_t>(k));
      QuantConv& qc = *convs[k];
      qc.act_ready = a.at("ready").get<bool>();
      qc.uni_a.bits = qc.a_bits;
      qc.uni_a.step = a.at("step").get<float>();
      qc.uni_a.clip_range = a.at("clip").get<float>();
      if (method == QuantMethod::Rbd) {
        const std::string p = qc.weight.name.substr(0, qc.weight.name.size() - 7) + ".quant.";
        qc.rbd_a = rbd_act_init(Tensor({1}), qc.a_bits, p);
      }
    }
  }
  for (Parameter* p : net.parameters()) {
    const Tensor& t = c.tensor(prefix + "." + p->name);
    if (t.shape != p->value.shape) throw FormatError("checkpoint tensor '" + p->name + "' has shape " + shape_str(t.shape));
    p->value = t;
    p->grad = Tensor(t.shape);
  }
  net.min_retained = min_retained;
  net.set_alpha_learnable(j.at("alpha_learnable").get<bool>());
  net.set_retained(j.at("retained").get<std::vector<bool>>());
  return net;
}

}  // namespace qsr
