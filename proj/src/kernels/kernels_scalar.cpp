#include <cmath>

#include "mara/kernels.hpp"

namespace mara::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_scalar(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * p;
    for (std::size_t l = 0; l < m; ++l) {
      const double ail = a[i * m + l];
      const double* bl = b + l * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += ail * bl[j];
    }
  }
}

void gemm_nt_scalar(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) c[i * p + j] += dot_scalar(a + i * m, b + j * m, m);
}

void gemm_tn_scalar(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                    double* c) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* br = b + r * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double ari = a[r * m + i];
      double* ci = c + i * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += ari * br[j];
    }
  }
}

void sphere_distances_scalar(const double d[3], double r, const double* gx, const double* gy,
                             const double* gz, double* out, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    const double ex = d[0] - r * gx[i];
    const double ey = d[1] - r * gy[i];
    const double ez = d[2] - r * gz[i];
    out[i] = std::sqrt(ex * ex + ey * ey + ez * ez);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, dot_scalar,     axpy_scalar,
                                 gemm_nn_scalar,  gemm_nt_scalar, gemm_tn_scalar,
                                 sphere_distances_scalar};
  return table;
}

}  // namespace mara::kernels
