#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

// Dense helpers for the small row-major matrices used throughout (d and m are
// tiny, so no BLAS; keeping the arithmetic explicit also makes the adjoint
// sweeps auditable).
namespace mflab {

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

inline double sqdist(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void scal(double alpha, double* x, int n) {
  for (int i = 0; i < n; ++i) x[i] *= alpha;
}

// y = A x, A is r x c row-major
inline void matvec(const double* A, const double* x, double* y, int r, int c) {
  for (int i = 0; i < r; ++i) y[i] = dot(A + static_cast<size_t>(i) * c, x, c);
}

// y = A^T x, A is r x c row-major, x has r entries, y has c
inline void matvec_t(const double* A, const double* x, double* y, int r, int c) {
  for (int j = 0; j < c; ++j) y[j] = 0.0;
  for (int i = 0; i < r; ++i) {
    const double* row = A + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) y[j] += row[j] * x[i];
  }
}

// C = A B, all n x n row-major
inline void matmul(const double* A, const double* B, double* C, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += A[i * n + k] * B[k * n + j];
      C[i * n + j] = s;
    }
}

inline void mat_identity(double* A, int n) {
  for (int i = 0; i < n * n; ++i) A[i] = 0.0;
  for (int i = 0; i < n; ++i) A[i * n + i] = 1.0;
}

inline bool all_finite(const double* a, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

inline bool all_finite(const std::vector<double>& a) { return all_finite(a.data(), a.size()); }

}  // namespace mflab
