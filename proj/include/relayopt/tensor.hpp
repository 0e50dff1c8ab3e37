#pragma once
#include <cstdint>
#include <random>
#include <vector>

#include "relayopt/core.hpp"

namespace relayopt::nn {

// Dense row-major 2-D tensor of doubles. Scalars are 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor from_mat(const Mat& m) {
    Tensor t(m.rows, m.cols);
    t.data = m.d;
    return t;
  }
  static Tensor uniform(int r, int c, double lo, double hi, std::mt19937_64& rng) {
    Tensor t(r, c);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data) v = u(rng);
    return t;
  }

  size_t numel() const { return data.size(); }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double value() const {
    if (!is_scalar()) throw ShapeError("tensor is not a scalar");
    return data[0];
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Mat to_mat() const {
    Mat m(rows, cols);
    m.d = data;
    return m;
  }
};

}  // namespace relayopt::nn
