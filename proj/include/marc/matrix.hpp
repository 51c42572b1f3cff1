#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace marc {

// Dense 2-D matrix of 64-bit floats, row-major.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimensions");
  }

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

namespace kernels {

// Number of OpenMP threads used by the parallel kernels. 1 selects the
// serial path. Results are bit-identical for any thread count: each output
// element is reduced in a fixed order.
int threads();
void set_threads(int n);

// out = a * b (accumulate: out += a * b)
void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// out = a * b^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
// out = a^T * b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

}  // namespace kernels

}  // namespace marc
