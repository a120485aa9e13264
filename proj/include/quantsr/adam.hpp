#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

/// Bias-corrected Adam. Moments are keyed by parameter name and created on
/// first use; frozen parameters are left untouched.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

inline void adam_step(const std::vector<Parameter*>& params, AdamState& state, float lr) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float b1 = state.config.beta1, b2 = state.config.beta2;
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(b1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(b2), t));
  for (Parameter* p : params) {
    if (p->frozen) continue;
    auto [it, fresh] = state.moments.try_emplace(p->name);
    AdamMoments& mo = it->second;
    if (fresh) {
      mo.m = Tensor(p->value.shape);
      mo.v = Tensor(p->value.shape);
    }
    require_same_shape(mo.m, p->value, "adam moments");
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const float g = p->grad.data[i];
      mo.m.data[i] = b1 * mo.m.data[i] + (1.0f - b1) * g;
      mo.v.data[i] = b2 * mo.v.data[i] + (1.0f - b2) * g * g;
      const float mhat = mo.m.data[i] / c1;
      const float vhat = mo.v.data[i] / c2;
      p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + state.config.eps);
    }
  }
}

}  // namespace qsr
