#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "omni/errors.hpp"

namespace omni {

enum class DType : uint8_t { f64 = 0, f32 = 1 };

// Dense row-major tensor. All arithmetic runs in double; the dtype tag is
// carried for checkpoint serialization.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;
  DType dtype = DType::f64;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
      throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) throw ShapeError("tensor: non-positive dim in shape " + shape_str(s));
      n *= d;
    }
    return n;
  }

  static std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int64_t> s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor identity(int64_t n) {
    Tensor t({n, n});
    for (int64_t i = 0; i < n; ++i) t.data[static_cast<size_t>(i * n + i)] = 1.0;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  // 2-D accessors; rows() is the product of all but the last dim.
  int64_t rows() const {
    if (shape.empty()) throw ShapeError("tensor: rows() on rank-0");
    return numel() / shape.back();
  }
  int64_t cols() const {
    if (shape.empty()) throw ShapeError("tensor: cols() on rank-0");
    return shape.back();
  }
  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const;
  std::string shape_string() const { return shape_str(shape); }
};

}  // namespace omni
