#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sdpg {

// Dense row-major matrix of doubles. Rows are batch entries throughout.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace sdpg
