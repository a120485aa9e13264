#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when tensor shapes disagree; the message names the offending dims.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a value that must stay finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major float32 array. Value semantics; copies are deep.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f) : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_str(shape));
    }
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  bool empty() const { return data.empty(); }

  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }

  // NCHW element access
  float& at(int n, int c, int h, int w) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const float& at(int n, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  std::span<float> values() { return data; }
  std::span<const float> values() const { return data; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

  double norm() const {
    double s = 0.0;
    for (float v : data) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  }

  float max_abs() const {
    float m = 0.0f;
    for (float v : data) m = std::max(m, std::fabs(v));
    return m;
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

inline void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(t.shape));
  }
}

inline void require_finite(const Tensor& t, const std::string& where) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t.data[i])) {
      throw NumericError("non-finite value " + std::to_string(t.data[i]) + " at flat index " + std::to_string(i) +
                         " in " + where + " " + shape_str(t.shape));
    }
  }
}

/// Integer quantization codes. b <= 8 always fits int8.
struct CodeTensor {
  Shape shape;
  std::vector<std::int8_t> data;

  CodeTensor() = default;
  explicit CodeTensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0) {}
  CodeTensor(Shape s, std::vector<std::int8_t> codes) : shape(std::move(s)), data(std::move(codes)) {
    if (data.size() != shape_numel(shape)) throw ShapeError("code tensor length does not match shape " + shape_str(shape));
  }
  std::size_t numel() const { return data.size(); }
};

/// A learnable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.fill(0.0f); }
  std::size_t numel() const { return value.numel(); }
  float scalar() const { return value.data.at(0); }
};

}  // namespace qsr
