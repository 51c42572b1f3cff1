#include "marc/matrix.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace marc::kernels {

namespace {
int g_threads = 1;

void check_mm(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_str() + " * " + b.shape_str());
}

// Column tile sized so an output row tile stays L1-resident across the whole
// k loop. For each output element the k accumulation runs in ascending
// order, so serial and parallel kernels produce bit-identical results.
constexpr int kColTile = 512;

void mm_rows(const Matrix& a, const Matrix& b, Matrix& out, int i0, int i1) {
  const int k = a.cols, m = b.cols;
  for (int j0 = 0; j0 < m; j0 += kColTile) {
    const int j1 = std::min(m, j0 + kColTile);
    int i = i0;
    for (; i + 4 <= i1; i += 4) {  // 4-row micro-kernel: each b row is reused 4x
      double* o0 = &out.data[static_cast<size_t>(i) * m];
      double* o1 = o0 + m;
      double* o2 = o1 + m;
      double* o3 = o2 + m;
      const double* a0 = &a.data[static_cast<size_t>(i) * k];
      const double* a1 = a0 + k;
      const double* a2 = a1 + k;
      const double* a3 = a2 + k;
      for (int p = 0; p < k; ++p) {
        const double* br = &b.data[static_cast<size_t>(p) * m];
        const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
        for (int j = j0; j < j1; ++j) {
          o0[j] += v0 * br[j];
          o1[j] += v1 * br[j];
          o2[j] += v2 * br[j];
          o3[j] += v3 * br[j];
        }
      }
    }
    for (; i < i1; ++i) {
      double* orow = &out.data[static_cast<size_t>(i) * m];
      const double* arow = &a.data[static_cast<size_t>(i) * k];
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* br = &b.data[static_cast<size_t>(p) * m];
        for (int j = j0; j < j1; ++j) orow[j] += av * br[j];
      }
    }
  }
}
}  // namespace

int threads() { return g_threads; }
void set_threads(int n) { g_threads = n < 1 ? 1 : n; }

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_mm(a, b);
  out.rows = a.rows;
  out.cols = b.cols;
  if (!accumulate) out.data.assign(static_cast<size_t>(a.rows) * b.cols, 0.0);
  mm_rows(a, b, out, 0, a.rows);
}

void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_mm(a, b);
  out.rows = a.rows;
  out.cols = b.cols;
  if (!accumulate) out.data.assign(static_cast<size_t>(a.rows) * b.cols, 0.0);
  const int blocks = (a.rows + 3) / 4;
#pragma omp parallel for num_threads(g_threads) schedule(static)
  for (int ib = 0; ib < blocks; ++ib)
    mm_rows(a, b, out, ib * 4, std::min(a.rows, ib * 4 + 4));
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  if (g_threads > 1)
    matmul_omp(a, b, out, accumulate);
  else
    matmul_serial(a, b, out, accumulate);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  // out(i,j) = sum_p a(i,p) * b(j,p); four fixed dot-product lanes keep the
  // reduction order deterministic while still vectorizing.
  if (a.cols != b.cols)
    throw std::invalid_argument("matmul_nt: dimension mismatch " + a.shape_str() + " * " + b.shape_str() + "^T");
  out.rows = a.rows;
  out.cols = b.rows;
  if (!accumulate) out.data.assign(static_cast<size_t>(a.rows) * b.rows, 0.0);
  const int n = a.rows, k = a.cols, m = b.rows;
#pragma omp parallel for num_threads(g_threads) schedule(static) if (g_threads > 1)
  for (int i = 0; i < n; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * m];
    const double* arow = &a.data[static_cast<size_t>(i) * k];
    for (int j = 0; j < m; ++j) {
      const double* brow = &b.data[static_cast<size_t>(j) * k];
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      for (; p < k; ++p) s0 += arow[p] * brow[p];
      orow[j] += (s0 + s1) + (s2 + s3);
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  // out(i,j) = sum_p a(p,i) * b(p,j)
  if (a.rows != b.rows)
    throw std::invalid_argument("matmul_tn: dimension mismatch " + a.shape_str() + "^T * " + b.shape_str());
  out.rows = a.cols;
  out.cols = b.cols;
  if (!accumulate) out.data.assign(static_cast<size_t>(a.cols) * b.cols, 0.0);
  const int n = a.cols, k = a.rows, m = b.cols;
#pragma omp parallel for num_threads(g_threads) schedule(static) if (g_threads > 1)
  for (int i = 0; i < n; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * m];
    for (int j0 = 0; j0 < m; j0 += kColTile) {
      const int j1 = std::min(m, j0 + kColTile);
      for (int p = 0; p < k; ++p) {
        const double av = a.data[static_cast<size_t>(p) * n + i];
        const double* brow = &b.data[static_cast<size_t>(p) * m];
        for (int j = j0; j < j1; ++j) orow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace marc::kernels
