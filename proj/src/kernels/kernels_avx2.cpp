// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "mara/kernels.hpp"

namespace mara::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes), _mm256_loadu_pd(b + i + kLanes), acc1);
  }
  for (; i + kLanes <= n; i += kLanes)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_avx2(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < m; ++l) axpy_avx2(a[i * m + l], b + l * p, c + i * p, p);
}

void gemm_nt_avx2(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) c[i * p + j] += dot_avx2(a + i * m, b + j * m, m);
}

void gemm_tn_avx2(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) axpy_avx2(a[r * m + i], b + r * p, c + i * p, p);
}

void sphere_distances_avx2(const double d[3], double r, const double* gx, const double* gy,
                           const double* gz, double* out, std::size_t k) {
  const __m256d vr = _mm256_set1_pd(r);
  const __m256d dx = _mm256_set1_pd(d[0]);
  const __m256d dy = _mm256_set1_pd(d[1]);
  const __m256d dz = _mm256_set1_pd(d[2]);
  std::size_t i = 0;
  for (; i + kLanes <= k; i += kLanes) {
    __m256d ex = _mm256_fnmadd_pd(vr, _mm256_loadu_pd(gx + i), dx);
    __m256d ey = _mm256_fnmadd_pd(vr, _mm256_loadu_pd(gy + i), dy);
    __m256d ez = _mm256_fnmadd_pd(vr, _mm256_loadu_pd(gz + i), dz);
    __m256d s = _mm256_mul_pd(ex, ex);
    s = _mm256_fmadd_pd(ey, ey, s);
    s = _mm256_fmadd_pd(ez, ez, s);
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(s));
  }
  for (; i < k; ++i) {
    const double ex = d[0] - r * gx[i];
    const double ey = d[1] - r * gy[i];
    const double ez = d[2] - r * gz[i];
    out[i] = std::sqrt(ex * ex + ey * ey + ez * ez);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Backend::avx2, dot_avx2,     axpy_avx2,
                                 gemm_nn_avx2,  gemm_nt_avx2, gemm_tn_avx2,
                                 sphere_distances_avx2};
  return &table;
}

}  // namespace mara::kernels
