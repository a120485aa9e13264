#pragma once

// Block-aligned feature distillation between the FP teacher and the student.
//
// Term i compares the two networks at the output of block position i as a
// per-block MSE. During slimming a term stays active only while block i and
// its successor i+1 are both retained (the last position needs only itself),
// so the neighbours of a skipped block are left free to absorb its function.
// The average is always taken over all 2N positions.

#include <string>
#include <vector>

#include "quantsr/tensor.hpp"

namespace qsr {

using DistillMask = std::vector<bool>;

inline DistillMask sfd_mask(const std::vector<bool>& retained) {
  const std::size_t n = retained.size();
  DistillMask active(n, false);
  for (std::size_t i = 0; i < n; ++i) active[i] = retained[i] && (i + 1 == n || retained[i + 1]);
  return active;
}

struct SfdResult {
  float loss = 0.0f;
  std::vector<float> terms;  // per-position MSE, 0 for inactive terms
  std::vector<Tensor> grads; // d loss / d student output, empty for inactive terms
};

namespace detail {
inline void check_sfd_inputs(const std::vector<Tensor>& teacher, const std::vector<Tensor>& student,
                             const DistillMask& mask) {
  if (teacher.empty()) throw ShapeError("sfd: no block outputs");
  if (teacher.size() != student.size()) {
    throw ShapeError("sfd: " + std::to_string(teacher.size()) + " teacher outputs vs " + std::to_string(student.size()) +
                     " student outputs");
  }
  if (mask.size() != teacher.size()) throw ShapeError("sfd: mask length does not match block count");
}
}  // namespace detail

/// Masked block MSE. Gradients (w.r.t. student features only) are filled when
/// want_grads is set.
inline SfdResult sfd_loss(const std::vector<Tensor>& teacher, const std::vector<Tensor>& student, const DistillMask& mask,
                          bool want_grads = false) {
  detail::check_sfd_inputs(teacher, student, mask);
  const std::size_t n = teacher.size();
  SfdResult r;
  r.terms.assign(n, 0.0f);
  if (want_grads) r.grads.assign(n, Tensor());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const Tensor& t = teacher[i];
    const Tensor& s = student[i];
    require_same_shape(t, s, ("sfd term " + std::to_string(i + 1)).c_str());
    if (t.empty()) throw ShapeError("sfd: empty feature at term " + std::to_string(i + 1));
    double acc = 0.0;
    for (std::size_t k = 0; k < t.numel(); ++k) {
      const double d = static_cast<double>(s.data[k]) - t.data[k];
      acc += d * d;
    }
    const double mse = acc / static_cast<double>(t.numel());
    r.terms[i] = static_cast<float>(mse);
    total += mse;
    if (want_grads) {
      Tensor g(s.shape);
      const float k = static_cast<float>(2.0 / (static_cast<double>(n) * static_cast<double>(t.numel())));
      for (std::size_t j = 0; j < t.numel(); ++j) g.data[j] = k * (s.data[j] - t.data[j]);
      r.grads[i] = std::move(g);
    }
  }
  r.loss = static_cast<float>(total / static_cast<double>(n));
  return r;
}

/// Unmasked form used before any block is skipped.
inline float sfd_init_loss(const std::vector<Tensor>& teacher, const std::vector<Tensor>& student) {
  return sfd_loss(teacher, student, DistillMask(teacher.size(), true)).loss;
}

inline float total_loss(float l_pix, float sfd, float lambda) { return l_pix + lambda * sfd; }

}  // namespace qsr
