#include "mara/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON) && !defined(MARA_NO_NEON)

#include <arm_neon.h>

#include <cmath>

namespace mara::kernels {
namespace {

constexpr std::size_t kLanes = 2;

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + kLanes), vld1q_f64(b + i + kLanes));
  }
  for (; i + kLanes <= n; i += kLanes) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_neon(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < m; ++l) axpy_neon(a[i * m + l], b + l * p, c + i * p, p);
}

void gemm_nt_neon(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) c[i * p + j] += dot_neon(a + i * m, b + j * m, m);
}

void gemm_tn_neon(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) axpy_neon(a[r * m + i], b + r * p, c + i * p, p);
}

void sphere_distances_neon(const double d[3], double r, const double* gx, const double* gy,
                           const double* gz, double* out, std::size_t k) {
  const float64x2_t vr = vdupq_n_f64(r);
  const float64x2_t dx = vdupq_n_f64(d[0]);
  const float64x2_t dy = vdupq_n_f64(d[1]);
  const float64x2_t dz = vdupq_n_f64(d[2]);
  std::size_t i = 0;
  for (; i + kLanes <= k; i += kLanes) {
    float64x2_t ex = vfmsq_f64(dx, vr, vld1q_f64(gx + i));
    float64x2_t ey = vfmsq_f64(dy, vr, vld1q_f64(gy + i));
    float64x2_t ez = vfmsq_f64(dz, vr, vld1q_f64(gz + i));
    float64x2_t s = vmulq_f64(ex, ex);
    s = vfmaq_f64(s, ey, ey);
    s = vfmaq_f64(s, ez, ez);
    vst1q_f64(out + i, vsqrtq_f64(s));
  }
  for (; i < k; ++i) {
    const double ex = d[0] - r * gx[i];
    const double ey = d[1] - r * gy[i];
    const double ez = d[2] - r * gz[i];
    out[i] = std::sqrt(ex * ex + ey * ey + ez * ez);
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{Backend::neon, dot_neon,     axpy_neon,
                                 gemm_nn_neon,  gemm_nt_neon, gemm_tn_neon,
                                 sphere_distances_neon};
  return &table;
}

}  // namespace mara::kernels

#else

namespace mara::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace mara::kernels

#endif
